#pragma once

#include <string>
#include <vector>

#include "attrgen/layers.hpp"

namespace attrgen {

enum class LayerKind : std::uint8_t {
  Conv3x3 = 0,
  FullyConnected = 1,
  MaxPool2x2 = 2,
  Unpool2x2 = 3,
  Concat = 4,
  Reshape = 5,
};

enum class NetworkId : std::uint8_t { Stage1 = 1, Stage2 = 2, AttrClassifier = 3 };

struct LayerDesc {
  LayerKind kind = LayerKind::Conv3x3;
  bool relu = false;    // applied after conv/fc output
  int in_channels = 0;  // conv: Cin; fc: input units; concat: primary-side channels
  int out_channels = 0; // conv: Cout; fc: output units; concat: total channels
  Shape reshape_to;     // Reshape only
  int param_index = -1; // slot in Network::params, -1 if parameter-free
};

/// Architecture description. The trunk runs primary input -> output; an
/// optional attribute branch feeds the trunk's single concat layer.
struct NetworkSpec {
  NetworkId id = NetworkId::Stage1;
  int input_size = 32;          // spatial extent of the square image input
  int attribute_count = 0;      // attribute-branch input width (0 if no branch)
  int attribute_map_channels = 0;
  std::vector<LayerDesc> trunk;
  std::vector<LayerDesc> attribute_branch;

  bool has_attribute_branch() const { return !attribute_branch.empty(); }
  int param_layer_count() const;
};

inline int NetworkSpec::param_layer_count() const {
  int n = 0;
  for (const auto& d : trunk) n += d.param_index >= 0;
  for (const auto& d : attribute_branch) n += d.param_index >= 0;
  return n;
}

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::Unpool2x2: return "unpool2x2";
    case LayerKind::Concat: return "concat";
    case LayerKind::Reshape: return "reshape";
  }
  return "?";
}

inline std::string layer_label(const LayerDesc& d) {
  std::string s = layer_kind_name(d.kind);
  if (d.kind == LayerKind::Conv3x3 || d.kind == LayerKind::FullyConnected)
    s += "(" + std::to_string(d.out_channels) + ")";
  if (d.kind == LayerKind::Reshape) s += " " + d.reshape_to.str();
  if (d.relu) s += "+relu";
  return s;
}

/// Learnable parameters of conv/fc layers: (9*Cin + 1)*Cout and (n + 1)*m.
inline std::int64_t parameter_count(const NetworkSpec& spec) {
  std::int64_t total = 0;
  auto add = [&](const LayerDesc& d) {
    if (d.kind == LayerKind::Conv3x3)
      total += (9LL * d.in_channels + 1) * d.out_channels;
    else if (d.kind == LayerKind::FullyConnected)
      total += (static_cast<std::int64_t>(d.in_channels) + 1) * d.out_channels;
  };
  for (const auto& d : spec.trunk) add(d);
  for (const auto& d : spec.attribute_branch) add(d);
  return total;
}

namespace detail {

inline Shape layer_output_shape(const LayerDesc& d, const Shape& in, const Shape& side,
                                const char* where) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(std::string(where) + ": " + layer_label(d) + ": " + msg);
  };
  switch (d.kind) {
    case LayerKind::Conv3x3:
      if (in.channels() != d.in_channels)
        fail("expects " + std::to_string(d.in_channels) + " channels, got " + in.str());
      return Shape{in.height(), in.width(), d.out_channels};
    case LayerKind::FullyConnected:
      if (in.count() != d.in_channels)
        fail("expects " + std::to_string(d.in_channels) + " inputs, got " + in.str());
      return Shape{d.out_channels};
    case LayerKind::MaxPool2x2:
      if (in.height() % 2 != 0 || in.width() % 2 != 0) fail("odd spatial extent " + in.str());
      return Shape{in.height() / 2, in.width() / 2, in.channels()};
    case LayerKind::Unpool2x2:
      return Shape{in.height() * 2, in.width() * 2, in.channels()};
    case LayerKind::Concat:
      if (side.rank() == 0) fail("no secondary input available");
      if (side.height() != in.height() || side.width() != in.width())
        fail("spatial mismatch " + in.str() + " vs " + side.str());
      if (in.channels() != d.in_channels || in.channels() + side.channels() != d.out_channels)
        fail("channel mismatch " + in.str() + " + " + side.str());
      return Shape{in.height(), in.width(), d.out_channels};
    case LayerKind::Reshape:
      if (d.reshape_to.count() != in.count())
        fail("element count mismatch " + in.str() + " -> " + d.reshape_to.str());
      return d.reshape_to;
  }
  fail("unknown layer kind");
  return Shape{};
}

}  // namespace detail

struct TraceEntry {
  std::string name;
  Shape output;
};

/// Symbolic shape walk over the spec; throws on any incompatibility.
/// Attribute-branch entries are prefixed "attr:".
inline std::vector<TraceEntry> shape_trace(const NetworkSpec& spec) {
  std::vector<TraceEntry> trace;
  Shape side;
  if (spec.has_attribute_branch()) {
    Shape cur{spec.attribute_count};
    for (const auto& d : spec.attribute_branch) {
      cur = detail::layer_output_shape(d, cur, Shape{}, "shape_trace");
      trace.push_back({"attr:" + layer_label(d), cur});
    }
    side = cur;
  }
  Shape cur{spec.input_size, spec.input_size, 1};
  bool used_side = false;
  for (const auto& d : spec.trunk) {
    if (d.kind == LayerKind::Concat) {
      if (!spec.has_attribute_branch()) side = Shape{spec.input_size, spec.input_size, 1};
      used_side = true;
    }
    cur = detail::layer_output_shape(d, cur, side, "shape_trace");
    trace.push_back({layer_label(d), cur});
  }
  if (spec.has_attribute_branch() && !used_side)
    throw std::invalid_argument("shape_trace: attribute branch output is never consumed");
  return trace;
}

inline void validate_spec(const NetworkSpec& spec) {
  if (spec.input_size < 4 || spec.input_size % 4 != 0)
    throw std::invalid_argument("validate_spec: input_size must be a positive multiple of 4");
  int concats = 0;
  for (const auto& d : spec.trunk) concats += d.kind == LayerKind::Concat;
  if (spec.has_attribute_branch()) {
    if (concats != 1)
      throw std::invalid_argument("validate_spec: expected exactly one concat, found " +
                                  std::to_string(concats));
    const int half = spec.input_size / 2;
    const int want = half * half * spec.attribute_map_channels;
    const LayerDesc& fc2 = spec.attribute_branch[spec.attribute_branch.size() - 2];
    if (fc2.kind != LayerKind::FullyConnected || fc2.out_channels != want)
      throw std::invalid_argument(
          "validate_spec: attribute FC width " + std::to_string(fc2.out_channels) +
          " != " + std::to_string(half) + "^2 * " + std::to_string(spec.attribute_map_channels) +
          " = " + std::to_string(want));
  }
  shape_trace(spec);
}

template <typename S>
struct Network {
  NetworkSpec spec;
  std::vector<LayerParams<S>> params;  // indexed by LayerDesc::param_index
};

/// He-initialized weights, zero biases; seed stream is per parameter slot.
template <typename S>
Network<S> init_network(const NetworkSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  Network<S> net;
  net.spec = spec;
  net.params.resize(static_cast<std::size_t>(spec.param_layer_count()));
  auto fill = [&](const LayerDesc& d) {
    if (d.param_index < 0) return;
    LayerParams<S>& p = net.params[static_cast<std::size_t>(d.param_index)];
    if (d.kind == LayerKind::Conv3x3) {
      p = make_conv3x3<S>(d.in_channels, d.out_channels);
      p.weights = he_init<S>(p.weights.shape(), 9 * d.in_channels,
                             derive_seed(seed, 0x11, static_cast<std::uint64_t>(d.param_index)));
    } else {
      p = make_fully_connected<S>(d.out_channels, d.in_channels);
      p.weights = he_init<S>(p.weights.shape(), d.in_channels,
                             derive_seed(seed, 0x11, static_cast<std::uint64_t>(d.param_index)));
    }
  };
  for (const auto& d : spec.trunk) fill(d);
  for (const auto& d : spec.attribute_branch) fill(d);
  return net;
}

template <typename To, typename From>
Network<To> cast_network(const Network<From>& src) {
  Network<To> dst;
  dst.spec = src.spec;
  dst.params.reserve(src.params.size());
  for (const auto& p : src.params) {
    LayerParams<To> q;
    q.kind = p.kind;
    q.weights = Tensor<To>(p.weights.shape());
    q.bias = Tensor<To>(p.bias.shape());
    for (std::int64_t i = 0; i < p.weights.size(); ++i)
      q.weights[i] = static_cast<To>(p.weights[i]);
    for (std::int64_t i = 0; i < p.bias.size(); ++i) q.bias[i] = static_cast<To>(p.bias[i]);
    dst.params.push_back(std::move(q));
  }
  return dst;
}

/// Intermediates retained by a training-mode forward pass.
template <typename S>
struct ForwardCache {
  std::vector<Tensor<S>> trunk_in;        // input to trunk layer i
  std::vector<PoolSwitches> trunk_pool;   // filled at pool layers
  std::vector<Tensor<S>> attr_in;         // input to attribute-branch layer j
  Tensor<S> concat_side;                  // tensor joined at the concat
  Tensor<S> output;
};

namespace detail {

template <typename S>
Tensor<S> reshape_copy(const Tensor<S>& t, const Shape& shape) {
  Tensor<S> out(shape);
  std::memcpy(out.data(), t.data(), sizeof(S) * static_cast<std::size_t>(t.size()));
  return out;
}

// ReLU mask recovered from the post-activation value: max(z,0) > 0 iff z > 0.
template <typename S>
Tensor<S> relu_backward_from_output(const Tensor<S>& output, const Tensor<S>& upstream) {
  Tensor<S> g(upstream.shape());
  g.array() = (output.array() > S(0)).select(upstream.array(), S(0));
  return g;
}

template <typename S>
Tensor<S> apply_layer(const Network<S>& net, const LayerDesc& d, Tensor<S> x,
                      const Tensor<S>& side, PoolSwitches* switches) {
  Tensor<S> y;
  switch (d.kind) {
    case LayerKind::Conv3x3:
      y = conv2d_forward(x, net.params[static_cast<std::size_t>(d.param_index)]);
      break;
    case LayerKind::FullyConnected:
      y = fc_forward(x, net.params[static_cast<std::size_t>(d.param_index)]);
      break;
    case LayerKind::MaxPool2x2: {
      auto [p, sw] = maxpool2x2_forward(x);
      y = std::move(p);
      if (switches) *switches = std::move(sw);
      break;
    }
    case LayerKind::Unpool2x2:
      y = unpool2x2_forward(x);
      break;
    case LayerKind::Concat:
      y = concat_channels(x, side);
      break;
    case LayerKind::Reshape:
      y = reshape_copy(x, d.reshape_to);
      break;
  }
  if (d.relu) y = relu_forward(y);
  return y;
}

}  // namespace detail

/// Runs the network. Stage-1 takes (image, attribute one-hot); stage-2 takes
/// (source image, stage-1 output); the classifier takes (image, empty).
template <typename S>
Tensor<S> forward(const Network<S>& net, const Tensor<S>& primary, const Tensor<S>& secondary,
                  ForwardCache<S>* cache = nullptr) {
  const NetworkSpec& spec = net.spec;
  const Shape want{spec.input_size, spec.input_size, 1};
  if (primary.shape() != want)
    throw std::invalid_argument("forward: primary input shape " + primary.shape().str() +
                                ", expected " + want.str());

  Tensor<S> side;
  if (spec.has_attribute_branch()) {
    if (secondary.size() != spec.attribute_count)
      throw std::invalid_argument("forward: attribute vector length " +
                                  std::to_string(secondary.size()) + ", expected " +
                                  std::to_string(spec.attribute_count));
    Tensor<S> cur = secondary;
    if (cache) cache->attr_in.clear();
    for (const auto& d : spec.attribute_branch) {
      if (cache) cache->attr_in.push_back(cur);
      cur = detail::apply_layer(net, d, std::move(cur), Tensor<S>{}, nullptr);
    }
    side = std::move(cur);
  } else {
    bool trunk_concat = false;
    for (const auto& d : spec.trunk) trunk_concat |= d.kind == LayerKind::Concat;
    if (trunk_concat) {
      if (secondary.shape() != want)
        throw std::invalid_argument("forward: secondary input shape " + secondary.shape().str() +
                                    ", expected " + want.str());
      side = secondary;
    } else if (secondary.size() != 0) {
      throw std::invalid_argument("forward: network takes no secondary input");
    }
  }
  if (cache) {
    cache->concat_side = side;
    cache->trunk_in.clear();
    cache->trunk_pool.assign(spec.trunk.size(), PoolSwitches{});
  }

  Tensor<S> cur = primary;
  for (std::size_t i = 0; i < spec.trunk.size(); ++i) {
    const LayerDesc& d = spec.trunk[i];
    if (cache) cache->trunk_in.push_back(cur);
    PoolSwitches* sw = cache && d.kind == LayerKind::MaxPool2x2 ? &cache->trunk_pool[i] : nullptr;
    PoolSwitches local;
    cur = detail::apply_layer(net, d, std::move(cur), side,
                              d.kind == LayerKind::MaxPool2x2 && !sw ? &local : sw);
  }
  if (cache) cache->output = cur;
  return cur;
}

template <typename S>
struct Gradients {
  std::vector<LayerParams<S>> params;  // same layout as Network::params
  Tensor<S> primary;
  Tensor<S> secondary;
};

/// Analytic backward pass over a cached forward. `upstream` is dLoss/dOutput.
template <typename S>
Gradients<S> backward(const Network<S>& net, const ForwardCache<S>& cache,
                      const Tensor<S>& upstream) {
  const NetworkSpec& spec = net.spec;
  if (cache.trunk_in.size() != spec.trunk.size())
    throw std::invalid_argument("backward: cache does not match network trunk");
  require_same_shape(upstream, cache.output, "backward");

  Gradients<S> grads;
  grads.params.resize(net.params.size());

  auto step = [&](const LayerDesc& d, const Tensor<S>& input, const Tensor<S>& output,
                  Tensor<S> g, const PoolSwitches& sw, Tensor<S>* side_grad) -> Tensor<S> {
    if (d.relu) g = detail::relu_backward_from_output(output, g);
    switch (d.kind) {
      case LayerKind::Conv3x3: {
        auto cg = conv2d_backward(input, net.params[static_cast<std::size_t>(d.param_index)], g);
        auto& slot = grads.params[static_cast<std::size_t>(d.param_index)];
        slot.kind = ParamKind::Conv3x3;
        slot.weights = std::move(cg.weights);
        slot.bias = std::move(cg.bias);
        return std::move(cg.input);
      }
      case LayerKind::FullyConnected: {
        auto fg = fc_backward(input, net.params[static_cast<std::size_t>(d.param_index)], g);
        auto& slot = grads.params[static_cast<std::size_t>(d.param_index)];
        slot.kind = ParamKind::FullyConnected;
        slot.weights = std::move(fg.weights);
        slot.bias = std::move(fg.bias);
        return std::move(fg.input);
      }
      case LayerKind::MaxPool2x2:
        if (sw.empty()) throw std::invalid_argument("backward: missing pool switches in cache");
        return maxpool2x2_backward(sw, g);
      case LayerKind::Unpool2x2:
        return unpool2x2_backward(g);
      case LayerKind::Concat: {
        const int ca = input.shape().channels();
        const int cb = cache.concat_side.shape().channels();
        if (side_grad) *side_grad = slice_channels(g, ca, ca + cb);
        return slice_channels(g, 0, ca);
      }
      case LayerKind::Reshape:
        return detail::reshape_copy(g, input.shape());
    }
    throw std::invalid_argument("backward: unknown layer kind");
  };

  Tensor<S> g = upstream;
  Tensor<S> side_grad;
  for (std::size_t k = spec.trunk.size(); k-- > 0;) {
    const LayerDesc& d = spec.trunk[k];
    const Tensor<S>& output = k + 1 < spec.trunk.size() ? cache.trunk_in[k + 1] : cache.output;
    g = step(d, cache.trunk_in[k], output, std::move(g), cache.trunk_pool[k], &side_grad);
  }
  grads.primary = std::move(g);

  if (spec.has_attribute_branch()) {
    if (cache.attr_in.size() != spec.attribute_branch.size())
      throw std::invalid_argument("backward: cache does not match attribute branch");
    Tensor<S> ag = std::move(side_grad);
    for (std::size_t k = spec.attribute_branch.size(); k-- > 0;) {
      const LayerDesc& d = spec.attribute_branch[k];
      const Tensor<S>& output =
          k + 1 < spec.attribute_branch.size() ? cache.attr_in[k + 1] : cache.concat_side;
      ag = step(d, cache.attr_in[k], output, std::move(ag), PoolSwitches{}, nullptr);
    }
    grads.secondary = std::move(ag);
  } else {
    grads.secondary = std::move(side_grad);
  }
  return grads;
}

}  // namespace attrgen
