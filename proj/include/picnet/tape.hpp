#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "picnet/tensor.hpp"

namespace picnet {

// Reverse-mode tape. Ops executed while a tape is active append their
// backward rule; recording order is the execution order, so inputs always
// precede their consumers and a reverse replay propagates every gradient
// before the producing op consumes it.
//
// One tape per logical thread: construction activates the tape for the
// current thread, destruction deactivates it. Nesting is rejected.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();

  void record(std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }

  // Replays entries newest-first. Used by backward(), which permits one
  // replay per tape: intermediate gradients persist on the nodes, so a
  // second replay would double-count them.
  void replay_reverse();
  bool replayed() const { return replayed_; }

 private:
  std::vector<std::function<void()>> entries_;
  bool replayed_ = false;
};

// Seeds d(loss)/d(loss) = 1 and replays the active tape, accumulating
// gradients into every requires_grad tensor reachable from the loss.
// Repeated uses of a tensor accumulate additively.
void backward(const Tensor& loss);

// True when an op should record its backward rule.
bool grad_recording();

}  // namespace picnet
