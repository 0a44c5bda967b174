#pragma once

#include <string>

#include "attrgen/tensor.hpp"

namespace attrgen {

enum class LossKind : std::uint8_t { Mse = 0, Mae = 1 };

inline const char* loss_name(LossKind k) { return k == LossKind::Mse ? "mse" : "mae"; }

inline LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::Mse;
  if (s == "mae") return LossKind::Mae;
  throw std::invalid_argument("unknown loss '" + s + "' (expected mse or mae)");
}

template <typename S>
struct LossResult {
  double value = 0.0;
  Tensor<S> grad;
};

/// Mean over elements of (pred - target)^2; grad = 2(pred - target)/N.
template <typename S>
LossResult<S> mse_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  require_same_shape(pred, target, "mse_loss");
  const std::int64_t n = pred.size();
  LossResult<S> r;
  r.grad = Tensor<S>(pred.shape());
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
    r.grad[i] = static_cast<S>(2.0 * d / static_cast<double>(n));
  }
  r.value = acc / static_cast<double>(n);
  return r;
}

/// Mean absolute error; subgradient at exact ties is 0.
template <typename S>
LossResult<S> mae_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  require_same_shape(pred, target, "mae_loss");
  const std::int64_t n = pred.size();
  LossResult<S> r;
  r.grad = Tensor<S>(pred.shape());
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += std::abs(d);
    r.grad[i] = static_cast<S>((d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / static_cast<double>(n));
  }
  r.value = acc / static_cast<double>(n);
  return r;
}

template <typename S>
LossResult<S> compute_loss(LossKind kind, const Tensor<S>& pred, const Tensor<S>& target) {
  return kind == LossKind::Mse ? mse_loss(pred, target) : mae_loss(pred, target);
}

}  // namespace attrgen
