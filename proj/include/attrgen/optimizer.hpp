#pragma once

#include "attrgen/network.hpp"

namespace attrgen {

/// Classic heavy-ball update: v <- mu*v - lr*g; w <- w + v.
template <typename S>
void sgd_momentum_step(Tensor<S>& weights, Tensor<S>& velocity, const Tensor<S>& grad, double lr,
                       double mu) {
  require_same_shape(weights, velocity, "sgd_momentum_step");
  require_same_shape(weights, grad, "sgd_momentum_step");
  velocity.array() = static_cast<S>(mu) * velocity.array() - static_cast<S>(lr) * grad.array();
  weights.array() += velocity.array();
}

/// Zeroed velocity buffers congruent with the network's parameters.
template <typename S>
std::vector<LayerParams<S>> make_velocity(const Network<S>& net) {
  std::vector<LayerParams<S>> vel;
  vel.reserve(net.params.size());
  for (const auto& p : net.params) {
    LayerParams<S> v;
    v.kind = p.kind;
    v.weights = Tensor<S>(p.weights.shape());
    v.bias = Tensor<S>(p.bias.shape());
    vel.push_back(std::move(v));
  }
  return vel;
}

template <typename S>
void sgd_momentum_step(Network<S>& net, std::vector<LayerParams<S>>& velocity,
                       const std::vector<LayerParams<S>>& grads, double lr, double mu) {
  if (velocity.size() != net.params.size() || grads.size() != net.params.size())
    throw std::invalid_argument("sgd_momentum_step: buffer count mismatch");
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    sgd_momentum_step(net.params[i].weights, velocity[i].weights, grads[i].weights, lr, mu);
    sgd_momentum_step(net.params[i].bias, velocity[i].bias, grads[i].bias, lr, mu);
  }
}

}  // namespace attrgen
