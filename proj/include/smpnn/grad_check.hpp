#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "smpnn/autodiff.hpp"

namespace smpnn {

enum class FdMethod {
  central,     // (f(p+h) − f(p−h)) / 2h
  five_point,  // O(h⁴) stencil
  ridders,     // extrapolated central differences, `step` is the largest step
};

struct GradCheckOptions {
  double step = 1e-2;
  FdMethod method = FdMethod::ridders;
  double tolerance = 1e-5;
  /// Coordinates beyond this count are subsampled with `sample_seed`.
  std::size_t max_coordinates = 1000;
  std::uint64_t sample_seed = 0;
};

struct GradCheckEntry {
  std::size_t param = 0;
  std::size_t coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t total_coordinates = 0;
  bool passed = false;

  void write_csv(std::ostream& out) const;
};

/// Scalar objective over leaf parameters. Called once on a tape with
/// requires_grad leaves and 2× per checked coordinate on fresh tapes.
using Objective = std::function<ad::Var(ad::Tape&, std::span<const ad::Var> params)>;

/// Central differences against reverse mode. Relative
/// error uses max(|a|, |b|, 1e-8) as denominator. Throws
/// Error(numerical_error) on non-finite values.
GradCheckReport grad_check(const Objective& f, std::vector<Tensor> params,
                           const GradCheckOptions& options = {});

double relative_error(double a, double b) noexcept;

}  // namespace smpnn
