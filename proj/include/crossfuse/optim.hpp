#pragma once

// Squared-error metrics and the three first-order optimizers used by the
// experiments. All three share the decayed first moment
//   m_t = b1 m_{t-1} + (1 - b1) g_t
// and differ in the second-moment scaling:
//
//   adam    v_t = b2 v_{t-1} + (1 - b2) g_t^2
//           theta -= a * (m_t / (1 - b1^t)) / (sqrt(v_t / (1 - b2^t)) + eps)
//
//   nadam   Adam moments plus a Nesterov look-ahead on the first moment:
//           mhat = m_t / (1 - b1^(t+1)),  ghat = g_t / (1 - b1^t),
//           vhat = v_t / (1 - b2^t),
//           theta -= a * (b1 * mhat + (1 - b1) * ghat) / (sqrt(vhat) + eps)
//
//   adamax  u_t = max(b2 * u_{t-1}, |g_t|), floored at eps,
//           theta -= (a / (1 - b1^t)) * m_t / u_t
//
// Defaults: a = 0.001 (adam, nadam) or 0.002 (adamax), b1 = 0.9, b2 = 0.999,
// eps = 1e-8.

#include <cmath>
#include <string>
#include <vector>

#include "crossfuse/nn.hpp"
#include "crossfuse/tensor.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

inline double mse(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size())
    throw ShapeError(strprintf("mse: %zu targets vs %zu predictions", y.size(), yhat.size()));
  if (y.empty()) throw ValueError("mse of empty vectors");
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    double d = y[i] - yhat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  return std::sqrt(mse(y, yhat));
}

// Differentiable mean squared error against a constant target.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError(strprintf("mse_loss: prediction %s vs target %s",
                               shape_str(pred.shape()).c_str(),
                               shape_str(target.shape()).c_str()));
  Tensor diff = add(pred, scale(target, -1.0));
  return mean_all(mul(diff, diff));
}

enum class OptimizerKind { kAdam, kNadam, kAdamax };

inline std::string optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kNadam: return "nadam";
    case OptimizerKind::kAdamax: return "adamax";
  }
  throw ValueError("unknown optimizer kind");
}

inline OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "nadam") return OptimizerKind::kNadam;
  if (name == "adamax") return OptimizerKind::kAdamax;
  throw UsageError("unknown optimizer: " + name + " (expected adam, nadam, or adamax)");
}

inline double default_alpha(OptimizerKind k) {
  return k == OptimizerKind::kAdamax ? 0.002 : 0.001;
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamax;
  double alpha = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerConfig defaults(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    c.alpha = default_alpha(kind);
    return c;
  }
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<NamedParam> params)
      : cfg_(cfg), params_(std::move(params)) {
    for (const auto& p : params_)
      if (!p.tensor.requires_grad())
        throw ValueError("optimizer given non-trainable parameter: " + p.name);
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  void step() {
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    double c1_next = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_ + 1));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& theta = params_[i].tensor.value();
      const auto& grad = params_[i].tensor.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < theta.size(); ++j) {
        double g = grad[j];
        if (!std::isfinite(g))
          throw ValueError("non-finite gradient in parameter " + params_[i].name);
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        switch (cfg_.kind) {
          case OptimizerKind::kAdam: {
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[j] / c1;
            double vhat = v[j] / c2;
            theta[j] -= cfg_.alpha * mhat / (std::sqrt(vhat) + cfg_.eps);
            break;
          }
          case OptimizerKind::kNadam: {
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[j] / c1_next;
            double ghat = g / c1;
            double vhat = v[j] / c2;
            theta[j] -= cfg_.alpha * (cfg_.beta1 * mhat + (1.0 - cfg_.beta1) * ghat) /
                        (std::sqrt(vhat) + cfg_.eps);
            break;
          }
          case OptimizerKind::kAdamax: {
            v[j] = std::max(cfg_.beta2 * v[j], std::abs(g));
            if (v[j] < cfg_.eps) v[j] = cfg_.eps;
            theta[j] -= (cfg_.alpha / c1) * m[j] / v[j];
            break;
          }
        }
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  int64_t steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }
  // Infinity-norm state when kind == adamax, second raw moment otherwise.
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  OptimizerConfig cfg_;
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace crossfuse
