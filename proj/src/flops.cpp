#include "smpnn/flops.hpp"

namespace smpnn {
namespace {
thread_local FlopScope* active_scope = nullptr;
thread_local FlopCount* active_count = nullptr;
}  // namespace

FlopScope::FlopScope() : previous_(active_scope) {
  active_scope = this;
  active_count = &count_;
}

FlopScope::~FlopScope() {
  active_scope = previous_;
  if (previous_ != nullptr) {
    previous_->count_.message_passing += count_.message_passing;
    previous_->count_.dense += count_.dense;
    active_count = &previous_->count_;
  } else {
    active_count = nullptr;
  }
}

namespace flops {
void add_message_passing(std::uint64_t n) noexcept {
  if (active_count != nullptr) active_count->message_passing += n;
}
void add_dense(std::uint64_t n) noexcept {
  if (active_count != nullptr) active_count->dense += n;
}
}  // namespace flops

}  // namespace smpnn
