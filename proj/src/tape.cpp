#include "picnet/tape.hpp"

#include "picnet/errors.hpp"

namespace picnet {

namespace {
thread_local GradTape* g_active = nullptr;
}

GradTape::GradTape() {
  if (g_active != nullptr) {
    throw UsageError("a GradTape is already active on this thread");
  }
  g_active = this;
}

GradTape::~GradTape() {
  if (g_active == this) g_active = nullptr;
}

GradTape* GradTape::active() { return g_active; }

void GradTape::record(std::function<void()> backward) {
  entries_.push_back(std::move(backward));
}

void GradTape::replay_reverse() {
  if (replayed_) {
    throw UsageError("backward() already replayed this tape");
  }
  replayed_ = true;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() requires a scalar loss");
  }
  GradTape* tape = GradTape::active();
  if (tape == nullptr) {
    throw UsageError("backward() requires an active GradTape");
  }
  if (!loss.requires_grad()) {
    throw UsageError("loss does not depend on any requires_grad tensor");
  }
  Tensor seed = loss;
  seed.ensure_grad()[0] += 1.0;
  tape->replay_reverse();
}

bool grad_recording() { return GradTape::active() != nullptr; }

}  // namespace picnet
