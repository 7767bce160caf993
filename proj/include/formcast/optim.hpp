#ifndef FORMCAST_OPTIM_HPP
#define FORMCAST_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "formcast/autodiff.hpp"
#include "formcast/tensor.hpp"

namespace formcast::nn {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter tensor.
template <typename Scalar>
struct AdamSlot {
  Tensor<Scalar> m;
  Tensor<Scalar> v;
};

/// One bias-corrected Adam update of `param` in place. `step` is the 1-based
/// index of this update. A missing (empty) gradient counts as zero.
template <typename Scalar>
void adam_step(Tensor<Scalar>& param, const Tensor<Scalar>& grad, AdamSlot<Scalar>& slot,
               std::int64_t step, const AdamConfig& cfg) {
  if (step < 1) throw std::invalid_argument("adam_step: step counter starts at 1");
  if (slot.m.empty()) {
    slot.m = Tensor<Scalar>(param.shape());
    slot.v = Tensor<Scalar>(param.shape());
  }
  if (!(slot.m.shape() == param.shape()) || !(slot.v.shape() == param.shape())) {
    throw std::invalid_argument("adam_step: moment shape differs from parameter " + param.shape().str());
  }
  if (!grad.empty() && !(grad.shape() == param.shape())) {
    throw std::invalid_argument("adam_step: gradient shape differs from parameter " + param.shape().str());
  }
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  if (grad.empty()) {
    slot.m.array() *= b1;
    slot.v.array() *= b2;
  } else {
    slot.m.array() = b1 * slot.m.array() + (Scalar(1) - b1) * grad.array();
    slot.v.array() = b2 * slot.v.array() + (Scalar(1) - b2) * grad.array().square();
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const auto lr = static_cast<Scalar>(cfg.learning_rate / c1);
  const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
  const auto eps = static_cast<Scalar>(cfg.eps);
  param.array() -= lr * slot.m.array() / ((slot.v.array() * inv_c2).sqrt() + eps);
}

/// Adam over a fixed list of parameters.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Var<Scalar>> params, AdamConfig cfg = {})
      : params_(std::move(params)), slots_(params_.size()), cfg_(cfg) {}

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      adam_step(params_[i].mutable_value(), params_[i].grad(), slots_[i], t_, cfg_);
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }
  std::vector<AdamSlot<Scalar>>& slots() { return slots_; }
  const std::vector<AdamSlot<Scalar>>& slots() const { return slots_; }

 private:
  std::vector<Var<Scalar>> params_;
  std::vector<AdamSlot<Scalar>> slots_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace formcast::nn

#endif  // FORMCAST_OPTIM_HPP
