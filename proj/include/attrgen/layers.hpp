#pragma once

#include <cstring>
#include <random>
#include <vector>

#include "attrgen/rng.hpp"
#include "attrgen/tensor.hpp"

namespace attrgen {

enum class ParamKind : std::uint8_t { Conv3x3 = 0, FullyConnected = 1 };

/// Learnable state of one layer. Conv weights are (3, 3, Cin, Cout); fully
/// connected weights are (m, n) acting as out = W*in + b.
template <typename S>
struct LayerParams {
  ParamKind kind = ParamKind::Conv3x3;
  Tensor<S> weights;
  Tensor<S> bias;

  bool empty() const { return weights.empty(); }
};

/// Argmax offsets of each disjoint 2x2 max-pool window, encoded dy*2 + dx.
struct PoolSwitches {
  Shape shape;  // pooled output shape
  std::vector<std::uint8_t> code;

  bool empty() const { return code.empty(); }
};

template <typename S>
LayerParams<S> make_conv3x3(int in_channels, int out_channels) {
  LayerParams<S> p;
  p.kind = ParamKind::Conv3x3;
  p.weights = Tensor<S>(Shape{3, 3, in_channels, out_channels});
  p.bias = Tensor<S>(Shape{out_channels});
  return p;
}

template <typename S>
LayerParams<S> make_fully_connected(int out_units, int in_units) {
  LayerParams<S> p;
  p.kind = ParamKind::FullyConnected;
  p.weights = Tensor<S>(Shape{out_units, in_units});
  p.bias = Tensor<S>(Shape{out_units});
  return p;
}

/// Gaussian init with std = sqrt(2 / fan_in), deterministic for a given seed.
template <typename S>
Tensor<S> he_init(Shape shape, int fan_in, std::uint64_t seed) {
  if (fan_in <= 0) throw std::invalid_argument("he_init: fan_in must be positive");
  Tensor<S> t(shape);
  std::mt19937 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / fan_in));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(gauss(rng));
  return t;
}

namespace detail {

template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using MatMap = Eigen::Map<MatrixX<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const MatrixX<S>>;

// Patch matrix for 3x3/pad-1 convolution: row p = output pixel y*W + x,
// column r = (c*3 + dy)*3 + dx. Column order matches the conv weight layout,
// so the weight tensor maps onto a (9*Cin x Cout) matrix with no copy.
template <typename S>
void fill_patches(const Tensor<S>& in, MatrixX<S>& patches) {
  const int h = in.shape().height(), w = in.shape().width(), cin = in.shape().channels();
  patches.resize(static_cast<std::int64_t>(h) * w, 9 * cin);
  for (int c = 0; c < cin; ++c) {
    const S* plane = in.data() + static_cast<std::int64_t>(c) * h * w;
    for (int dy = 0; dy < 3; ++dy) {
      for (int dx = 0; dx < 3; ++dx) {
        S* col = patches.data() + static_cast<std::int64_t>((c * 3 + dy) * 3 + dx) * h * w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - 1;
          S* dst = col + static_cast<std::int64_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::memset(dst, 0, sizeof(S) * w);
            continue;
          }
          const S* src = plane + static_cast<std::int64_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + dx - 1;
            dst[x] = (sx >= 0 && sx < w) ? src[sx] : S(0);
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 3x3 convolution, stride 1, zero padding 1: spatial extents are preserved.
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& input, const LayerParams<S>& params) {
  if (params.kind != ParamKind::Conv3x3)
    throw std::invalid_argument("conv2d_forward: params are not conv3x3");
  const Shape& ws = params.weights.shape();
  if (ws.height() != 3 || ws.width() != 3)
    throw std::invalid_argument("conv2d_forward: kernel spatial extent must be 3x3, got " +
                                ws.str());
  const int cin = input.shape().channels();
  if (ws.channels() != cin)
    throw std::invalid_argument("conv2d_forward: input channels " + std::to_string(cin) +
                                " do not match kernel input channels " +
                                std::to_string(ws.channels()) + " (input " + input.shape().str() +
                                ", weights " + ws.str() + ")");
  const int cout = ws.batch();
  if (params.bias.size() != cout)
    throw std::invalid_argument("conv2d_forward: bias length " +
                                std::to_string(params.bias.size()) + " != out channels " +
                                std::to_string(cout));
  const int h = input.shape().height(), w = input.shape().width();

  detail::MatrixX<S> patches;
  detail::fill_patches(input, patches);
  detail::ConstMatMap<S> wmat(params.weights.data(), 9 * cin, cout);

  Tensor<S> out(Shape{h, w, cout});
  detail::MatMap<S> omat(out.data(), static_cast<std::int64_t>(h) * w, cout);
  omat.noalias() = patches * wmat;
  for (int o = 0; o < cout; ++o) omat.col(o).array() += params.bias[o];
  return out;
}

template <typename S>
struct ConvGrads {
  Tensor<S> input;
  Tensor<S> weights;
  Tensor<S> bias;
};

template <typename S>
ConvGrads<S> conv2d_backward(const Tensor<S>& input, const LayerParams<S>& params,
                             const Tensor<S>& upstream) {
  const int h = input.shape().height(), w = input.shape().width();
  const int cin = input.shape().channels(), cout = params.weights.shape().batch();
  if (upstream.shape() != Shape{h, w, cout})
    throw std::invalid_argument("conv2d_backward: upstream shape " + upstream.shape().str() +
                                " does not match output shape " + Shape{h, w, cout}.str());

  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  detail::MatrixX<S> patches;
  detail::fill_patches(input, patches);
  detail::ConstMatMap<S> wmat(params.weights.data(), 9 * cin, cout);
  detail::ConstMatMap<S> umat(upstream.data(), hw, cout);

  ConvGrads<S> g;
  g.weights = Tensor<S>(params.weights.shape());
  g.bias = Tensor<S>(params.bias.shape());
  detail::MatMap<S>(g.weights.data(), 9 * cin, cout).noalias() = patches.transpose() * umat;
  for (int o = 0; o < cout; ++o) g.bias[o] = umat.col(o).sum();

  // dPatches -> scatter-add back through the padding.
  detail::MatrixX<S> dpatch(hw, 9 * cin);
  dpatch.noalias() = umat * wmat.transpose();
  g.input = Tensor<S>(input.shape());
  for (int c = 0; c < cin; ++c) {
    S* plane = g.input.data() + static_cast<std::int64_t>(c) * hw;
    for (int dy = 0; dy < 3; ++dy) {
      for (int dx = 0; dx < 3; ++dx) {
        const S* col = dpatch.data() + static_cast<std::int64_t>((c * 3 + dy) * 3 + dx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - 1;
          if (sy < 0 || sy >= h) continue;
          S* dst = plane + static_cast<std::int64_t>(sy) * w;
          const S* src = col + static_cast<std::int64_t>(y) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + dx - 1;
            if (sx >= 0 && sx < w) dst[sx] += src[x];
          }
        }
      }
    }
  }
  return g;
}

/// Disjoint 2x2 max pooling; ties broken by first occurrence in row-major
/// window order. Switches record where each maximum came from.
template <typename S>
std::pair<Tensor<S>, PoolSwitches> maxpool2x2_forward(const Tensor<S>& input) {
  const int h = input.shape().height(), w = input.shape().width(), ch = input.shape().channels();
  if (h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("maxpool2x2_forward: spatial extents must be even, got " +
                                input.shape().str());
  Tensor<S> out(Shape{h / 2, w / 2, ch});
  PoolSwitches sw;
  sw.shape = out.shape();
  sw.code.resize(static_cast<std::size_t>(out.size()));
  std::int64_t i = 0;
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h / 2; ++y) {
      for (int x = 0; x < w / 2; ++x, ++i) {
        S best = input(2 * y, 2 * x, c);
        std::uint8_t code = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const S v = input(2 * y + dy, 2 * x + dx, c);
            if (v > best) {
              best = v;
              code = static_cast<std::uint8_t>(dy * 2 + dx);
            }
          }
        out(y, x, c) = best;
        sw.code[static_cast<std::size_t>(i)] = code;
      }
    }
  }
  return {std::move(out), std::move(sw)};
}

template <typename S>
Tensor<S> maxpool2x2_backward(const PoolSwitches& switches, const Tensor<S>& upstream) {
  if (upstream.shape() != switches.shape)
    throw std::invalid_argument("maxpool2x2_backward: upstream shape " + upstream.shape().str() +
                                " does not match pooled shape " + switches.shape.str());
  const int ph = switches.shape.height(), pw = switches.shape.width(), ch = switches.shape.channels();
  Tensor<S> grad(Shape{ph * 2, pw * 2, ch});
  std::int64_t i = 0;
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x, ++i) {
        const std::uint8_t code = switches.code[static_cast<std::size_t>(i)];
        grad(2 * y + (code >> 1), 2 * x + (code & 1), c) = upstream(y, x, c);
      }
  return grad;
}

/// Parameter-free 2x unpooling: each value goes to the top-left corner of its
/// 2x2 block, the rest stays zero.
template <typename S>
Tensor<S> unpool2x2_forward(const Tensor<S>& input) {
  const int h = input.shape().height(), w = input.shape().width(), ch = input.shape().channels();
  Tensor<S> out(Shape{h * 2, w * 2, ch});
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(2 * y, 2 * x, c) = input(y, x, c);
  return out;
}

template <typename S>
Tensor<S> unpool2x2_backward(const Tensor<S>& upstream) {
  const int h = upstream.shape().height(), w = upstream.shape().width();
  const int ch = upstream.shape().channels();
  if (h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("unpool2x2_backward: upstream extents must be even, got " +
                                upstream.shape().str());
  Tensor<S> grad(Shape{h / 2, w / 2, ch});
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x) grad(y, x, c) = upstream(2 * y, 2 * x, c);
  return grad;
}

template <typename S>
Tensor<S> fc_forward(const Tensor<S>& input, const LayerParams<S>& params) {
  if (params.kind != ParamKind::FullyConnected)
    throw std::invalid_argument("fc_forward: params are not fully_connected");
  const int m = params.weights.shape().height(), n = params.weights.shape().width();
  if (input.size() != n)
    throw std::invalid_argument("fc_forward: input length " + std::to_string(input.size()) +
                                " != weight columns " + std::to_string(n) + " (weights " +
                                params.weights.shape().str() + ")");
  if (params.bias.size() != m)
    throw std::invalid_argument("fc_forward: bias length " + std::to_string(params.bias.size()) +
                                " != weight rows " + std::to_string(m));
  using RowMajor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> wmat(params.weights.data(), m, n);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> x(input.data(), n);

  Tensor<S> out(Shape{m});
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> y(out.data(), m);
  y.noalias() = wmat * x;
  y += Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(params.bias.data(), m);
  return out;
}

template <typename S>
struct FcGrads {
  Tensor<S> input;
  Tensor<S> weights;
  Tensor<S> bias;
};

template <typename S>
FcGrads<S> fc_backward(const Tensor<S>& input, const LayerParams<S>& params,
                       const Tensor<S>& upstream) {
  const int m = params.weights.shape().height(), n = params.weights.shape().width();
  if (upstream.size() != m)
    throw std::invalid_argument("fc_backward: upstream length " + std::to_string(upstream.size()) +
                                " != output units " + std::to_string(m));
  using RowMajor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  Eigen::Map<const RowMajor> wmat(params.weights.data(), m, n);
  Eigen::Map<const Vec> x(input.data(), n);
  Eigen::Map<const Vec> u(upstream.data(), m);

  FcGrads<S> g;
  g.input = Tensor<S>(input.shape());
  g.weights = Tensor<S>(params.weights.shape());
  g.bias = Tensor<S>(params.bias.shape());
  Eigen::Map<Vec>(g.input.data(), n).noalias() = wmat.transpose() * u;
  Eigen::Map<RowMajor>(g.weights.data(), m, n).noalias() = u * x.transpose();
  Eigen::Map<Vec>(g.bias.data(), m) = u;
  return g;
}

template <typename S>
Tensor<S> relu_forward(const Tensor<S>& input) {
  Tensor<S> out(input.shape());
  out.array() = input.array().max(S(0));
  return out;
}

/// Routes upstream gradient through the strictly-positive-input mask.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& forward_input, const Tensor<S>& upstream) {
  require_same_shape(forward_input, upstream, "relu_backward");
  Tensor<S> grad(upstream.shape());
  grad.array() = (forward_input.array() > S(0)).select(upstream.array(), S(0));
  return grad;
}

/// Channel concatenation: channels of a precede channels of b.
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  const int h = a.shape().height(), w = a.shape().width();
  if (b.shape().height() != h || b.shape().width() != w)
    throw std::invalid_argument("concat_channels: spatial mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  const int ca = a.shape().channels(), cb = b.shape().channels();
  Tensor<S> out(Shape{h, w, ca + cb});
  std::memcpy(out.data(), a.data(), sizeof(S) * a.size());
  std::memcpy(out.data() + a.size(), b.data(), sizeof(S) * b.size());
  return out;
}

/// Channels [begin, end) of x, values unmodified.
template <typename S>
Tensor<S> slice_channels(const Tensor<S>& x, int begin, int end) {
  const int h = x.shape().height(), w = x.shape().width(), ch = x.shape().channels();
  if (begin < 0 || end > ch || begin >= end)
    throw std::invalid_argument("slice_channels: invalid range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") for " + x.shape().str());
  Tensor<S> out(Shape{h, w, end - begin});
  std::memcpy(out.data(), x.data() + static_cast<std::int64_t>(begin) * h * w,
              sizeof(S) * out.size());
  return out;
}

}  // namespace attrgen
