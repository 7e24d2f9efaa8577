#include "picnet/adam.hpp"

#include <cmath>

#include "picnet/errors.hpp"
#include "picnet/kernels.hpp"

namespace picnet {

AdamState::AdamState(double lr_, double beta1_, double beta2_, double epsilon_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), epsilon(epsilon_) {}

void AdamState::ensure_registered(const NamedParams& params) {
  for (const auto& [name, t] : params) {
    if (m_.find(name) == m_.end()) {
      m_[name].assign(t.data().size(), 0.0);
      v_[name].assign(t.data().size(), 0.0);
    }
  }
}

void adam_step(const NamedParams& params, AdamState& state) {
  state.ensure_registered(params);
  state.step_ += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_));
  for (const auto& [name, param] : params) {
    Tensor t = param;
    if (!t.has_grad()) {
      throw UsageError("adam_step: missing gradient for parameter '" + name +
                       "'");
    }
    const std::vector<double>& g = t.grad();
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericError("adam_step: non-finite gradient in parameter '" +
                           name + "'");
      }
    }
    std::vector<double>& m = state.m_[name];
    std::vector<double>& v = state.v_[name];
    kernels::active().adam_update(t.mutable_data().data(), g.data(), m.data(),
                                  v.data(), g.size(), state.lr, state.beta1,
                                  state.beta2, state.epsilon, c1, c2);
    t.zero_grad();
  }
}

}  // namespace picnet
