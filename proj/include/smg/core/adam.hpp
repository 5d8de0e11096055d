#pragma once

#include <cmath>
#include <vector>

#include "smg/core/graph.hpp"

namespace smg {

template <typename S>
struct AdamConfig {
  S lr = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

// Adam over an explicit parameter list. Moments are owned here, so the same
// parameter tensor may belong to several optimizers, each with its own state.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var<S>> params, AdamConfig<S> cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > S(0))) throw ConfigError("adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Tensor<S>::zeros(p.val().shape));
      v_.push_back(Tensor<S>::zeros(p.val().shape));
    }
  }

  void step() {
    ++t_;
    const S b1t = S(1) - std::pow(cfg_.beta1, static_cast<S>(t_));
    const S b2t = S(1) - std::pow(cfg_.beta2, static_cast<S>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto node = p.node();
      if (!node->grad_alloc) continue;
      S* w = node->val.data.data();
      const S* g = node->grad.data.data();
      S* m = m_[k].data.data();
      S* v = v_[k].data.data();
      const std::size_t n = node->val.numel();
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg_.beta1 * m[i] + (S(1) - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (S(1) - cfg_.beta2) * g[i] * g[i];
        const S mh = m[i] / b1t;
        const S vh = v[i] / b2t;
        w[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  const std::vector<Var<S>>& params() const { return params_; }
  std::size_t state_count() const { return params_.size(); }
  Tensor<S>& moment1(std::size_t k) { return m_[k]; }
  Tensor<S>& moment2(std::size_t k) { return v_[k]; }

 private:
  std::vector<Var<S>> params_;
  AdamConfig<S> cfg_;
  std::vector<Tensor<S>> m_, v_;
  long t_ = 0;
};

} // namespace smg
