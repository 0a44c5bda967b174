#pragma once

#include "attrgen/network.hpp"

namespace attrgen {

namespace detail {

inline LayerDesc conv(int cin, int cout, bool relu) {
  return LayerDesc{LayerKind::Conv3x3, relu, cin, cout, Shape{}, -1};
}
inline LayerDesc fc(int n, int m, bool relu) {
  return LayerDesc{LayerKind::FullyConnected, relu, n, m, Shape{}, -1};
}
inline LayerDesc pool() { return LayerDesc{LayerKind::MaxPool2x2, false, 0, 0, Shape{}, -1}; }
inline LayerDesc unpool() { return LayerDesc{LayerKind::Unpool2x2, false, 0, 0, Shape{}, -1}; }
inline LayerDesc concat(int primary_ch, int total_ch) {
  return LayerDesc{LayerKind::Concat, false, primary_ch, total_ch, Shape{}, -1};
}
inline LayerDesc reshape(Shape to) { return LayerDesc{LayerKind::Reshape, false, 0, 0, to, -1}; }

inline void assign_param_slots(NetworkSpec& spec) {
  int next = 0;
  auto assign = [&](LayerDesc& d) {
    if (d.kind == LayerKind::Conv3x3 || d.kind == LayerKind::FullyConnected)
      d.param_index = next++;
  };
  for (auto& d : spec.trunk) assign(d);
  for (auto& d : spec.attribute_branch) assign(d);
}

}  // namespace detail

/// Stage-1 generator: encodes the source image to half resolution, fuses it
/// with attribute feature maps, and decodes back to a full-size image. The
/// final conv has no activation so the output can take either sign.
/// `input_size` scales the spatial extents only (default 32).
inline NetworkSpec build_stage1(int attribute_count, int attribute_map_channels = 7,
                                int input_size = 32) {
  if (attribute_count < 2)
    throw std::invalid_argument("build_stage1: attribute_count must be at least 2, got " +
                                std::to_string(attribute_count));
  if (attribute_map_channels < 1)
    throw std::invalid_argument("build_stage1: attribute_map_channels must be positive");
  using namespace detail;
  NetworkSpec spec;
  spec.id = NetworkId::Stage1;
  spec.input_size = input_size;
  spec.attribute_count = attribute_count;
  spec.attribute_map_channels = attribute_map_channels;

  const int half = input_size / 2;
  const int maps = attribute_map_channels;
  spec.trunk = {
      conv(1, 64, true),          // image encoder
      conv(64, 64, true),
      pool(),
      concat(64, 64 + maps),      // fuse with attribute maps
      conv(64 + maps, 64, true),
      conv(64, 128, true),
      conv(128, 128, true),
      conv(128, 64, true),
      unpool(),                   // decoder
      conv(64, 64, true),
      conv(64, 1, false),
  };
  spec.attribute_branch = {
      fc(attribute_count, 512, true),
      fc(512, half * half * maps, false),
      reshape(Shape{half, half, maps}),
  };
  assign_param_slots(spec);
  validate_spec(spec);
  return spec;
}

/// Stage-2 refiner: consumes the source image and the stage-1 output,
/// concatenated channel-wise, and produces the refined image.
inline NetworkSpec build_stage2(int input_size = 32) {
  using namespace detail;
  NetworkSpec spec;
  spec.id = NetworkId::Stage2;
  spec.input_size = input_size;
  spec.trunk = {
      concat(1, 2),
      conv(2, 64, true),
      conv(64, 64, true),
      pool(),
      conv(64, 128, true),
      conv(128, 128, true),
      conv(128, 128, true),
      conv(128, 64, true),
      unpool(),
      conv(64, 64, true),
      conv(64, 1, false),
  };
  assign_param_slots(spec);
  validate_spec(spec);
  return spec;
}

/// Small conv classifier used by the two-step retrieval baseline: predicts the
/// attribute one-hot from an image.
inline NetworkSpec build_attribute_classifier(int attribute_count, int input_size = 32) {
  if (attribute_count < 2)
    throw std::invalid_argument("build_attribute_classifier: attribute_count must be at least 2");
  using namespace detail;
  NetworkSpec spec;
  spec.id = NetworkId::AttrClassifier;
  spec.input_size = input_size;
  spec.attribute_count = attribute_count;
  const int quarter = input_size / 4;
  const int flat = quarter * quarter * 16;
  spec.trunk = {
      conv(1, 8, true),
      pool(),
      conv(8, 16, true),
      pool(),
      reshape(Shape{flat}),
      fc(flat, 64, true),
      fc(64, attribute_count, false),
  };
  assign_param_slots(spec);
  validate_spec(spec);
  return spec;
}

template <typename S>
bool is_one_hot(const Tensor<S>& v) {
  int ones = 0;
  for (std::int64_t i = 0; i < v.size(); ++i) {
    if (v[i] == S(1))
      ++ones;
    else if (v[i] != S(0))
      return false;
  }
  return ones == 1;
}

/// Attribute branch alone: one-hot vector -> feature maps. Consumes no image.
template <typename S>
Tensor<S> encode_attribute(const Tensor<S>& attr, const Network<S>& net) {
  if (!net.spec.has_attribute_branch())
    throw std::invalid_argument("encode_attribute: network has no attribute branch");
  if (attr.size() != net.spec.attribute_count)
    throw std::invalid_argument("encode_attribute: vector length " + std::to_string(attr.size()) +
                                ", expected " + std::to_string(net.spec.attribute_count));
  if (!is_one_hot(attr))
    throw std::invalid_argument("encode_attribute: attribute vector is not one-hot");
  Tensor<S> cur = attr;
  for (const auto& d : net.spec.attribute_branch)
    cur = detail::apply_layer(net, d, std::move(cur), Tensor<S>{}, nullptr);
  return cur;
}

/// F1: source image + desired attribute -> generated image.
template <typename S>
Tensor<S> forward_stage1(const Network<S>& net, const Tensor<S>& image, const Tensor<S>& attr,
                         ForwardCache<S>* cache = nullptr) {
  if (net.spec.id != NetworkId::Stage1)
    throw std::invalid_argument("forward_stage1: network is not a stage-1 spec");
  return forward(net, image, attr, cache);
}

/// F2: source image + stage-1 output -> refined image.
template <typename S>
Tensor<S> forward_stage2(const Network<S>& net, const Tensor<S>& image, const Tensor<S>& coarse,
                         ForwardCache<S>* cache = nullptr) {
  if (net.spec.id != NetworkId::Stage2)
    throw std::invalid_argument("forward_stage2: network is not a stage-2 spec");
  return forward(net, image, coarse, cache);
}

/// Activation entering the first unpool layer (the half-resolution feature
/// maps at the deepest point of the network), used as retrieval features.
template <typename S>
Tensor<S> mid_features(const Network<S>& net, const Tensor<S>& primary,
                       const Tensor<S>& secondary) {
  std::size_t at = net.spec.trunk.size();
  for (std::size_t i = 0; i < net.spec.trunk.size(); ++i)
    if (net.spec.trunk[i].kind == LayerKind::Unpool2x2) {
      at = i;
      break;
    }
  if (at == net.spec.trunk.size())
    throw std::invalid_argument("mid_features: network has no unpool layer");
  ForwardCache<S> cache;
  forward(net, primary, secondary, &cache);
  return cache.trunk_in[at];
}

}  // namespace attrgen
