#include "smpnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "smpnn/error.hpp"

namespace smpnn {

double relative_error(double a, double b) noexcept {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

void GradCheckReport::write_csv(std::ostream& out) const {
  out << "param,coordinate,analytic,numeric,rel_err\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.6e\n", e.param, e.coordinate,
                  e.analytic, e.numeric, e.rel_err);
    out << buf;
  }
}

namespace {

double evaluate(const Objective& f, const std::vector<Tensor>& params) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant(p));
  const ad::Var out = f(tape, vars);
  require(out.value().size() == 1, ErrorCode::shape_mismatch,
          "grad_check objective must return a 1x1 value");
  const double v = out.value()(0, 0);
  require(std::isfinite(v), ErrorCode::numerical_error, "objective produced a non-finite value");
  return v;
}

// Neville extrapolation of central differences toward h → 0 over a shrinking
// step sequence; keeps the estimate with the smallest error bound.
template <class F>
double ridders_derivative(F&& at, double h) {
  constexpr int kTable = 10;
  constexpr double kShrink = 1.4;
  constexpr double kShrink2 = kShrink * kShrink;
  double a[kTable][kTable];
  a[0][0] = (at(h) - at(-h)) / (2.0 * h);
  double best = a[0][0];
  double err = INFINITY;
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    a[0][i] = (at(h) - at(-h)) / (2.0 * h);
    double factor = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * factor - a[j - 1][i - 1]) / (factor - 1.0);
      factor *= kShrink2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= 2.0 * err) break;
  }
  return best;
}

}  // namespace

GradCheckReport grad_check(const Objective& f, std::vector<Tensor> params,
                           const GradCheckOptions& options) {
  require(options.step > 0.0, ErrorCode::invalid_argument, "grad_check step must be positive");

  std::vector<Tensor> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.leaf(p, true));
    const ad::Var out = f(tape, vars);
    require(out.value().size() == 1, ErrorCode::shape_mismatch,
            "grad_check objective must return a 1x1 value");
    require(std::isfinite(out.value()(0, 0)), ErrorCode::numerical_error,
            "objective produced a non-finite value");
    tape.backward(out);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const Tensor& g = vars[k].grad();
      analytic.push_back(g.empty() ? Tensor(params[k].rows(), params[k].cols()) : g);
      require(analytic.back().all_finite(), ErrorCode::numerical_error,
              "reverse-mode gradient of parameter " + std::to_string(k) + " is not finite");
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].size(); ++i) coords.emplace_back(k, i);

  GradCheckReport report;
  report.total_coordinates = coords.size();
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.sample_seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  const double h = options.step;
  for (const auto& [k, i] : coords) {
    const double original = params[k][i];
    auto at = [&](double offset) {
      params[k][i] = original + offset;
      return evaluate(f, params);
    };
    double numeric = 0.0;
    switch (options.method) {
      case FdMethod::central:
        numeric = (at(h) - at(-h)) / (2.0 * h);
        break;
      case FdMethod::five_point:
        numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        break;
      case FdMethod::ridders:
        numeric = ridders_derivative(at, h);
        break;
    }
    params[k][i] = original;
    const double a = analytic[k][i];
    GradCheckEntry e{k, i, a, numeric, relative_error(a, numeric)};
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    report.entries.push_back(e);
  }
  report.checked = report.entries.size();
  report.passed = report.max_rel_err < options.tolerance;
  return report;
}

}  // namespace smpnn
