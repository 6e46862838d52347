#pragma once

#include <cstdint>

namespace smpnn {

/// Multiply-add counts split by kernel family. Each multiply and each add
/// counts as one FLOP, so a sparse-dense product costs 2·nnz·D and a dense
/// (m×k)(k×n) product costs 2·m·k·n.
struct FlopCount {
  std::uint64_t message_passing = 0;
  std::uint64_t dense = 0;

  std::uint64_t total() const noexcept { return message_passing + dense; }
};

/// Installs a counter for the current thread for the lifetime of the scope.
/// Scopes nest; on destruction a scope folds its count into the enclosing one.
class FlopScope {
 public:
  FlopScope();
  ~FlopScope();
  FlopScope(const FlopScope&) = delete;
  FlopScope& operator=(const FlopScope&) = delete;

  const FlopCount& count() const noexcept { return count_; }

 private:
  FlopCount count_;
  FlopScope* previous_;
};

namespace flops {
void add_message_passing(std::uint64_t n) noexcept;
void add_dense(std::uint64_t n) noexcept;
}  // namespace flops

}  // namespace smpnn
