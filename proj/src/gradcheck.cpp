#include "attrgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "attrgen/loss.hpp"
#include "attrgen/rng.hpp"

namespace attrgen {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-6) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

namespace {

constexpr double kEps = 1e-3;

Tensor<double> randn(Shape shape, std::mt19937& rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  Tensor<double> t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = g(rng);
  return t;
}

double dot_all(const Tensor<double>& a, const Tensor<double>& b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Central difference of `loss` with respect to coordinate i of `t`.
template <typename Loss>
double central_diff(Tensor<double>& t, std::int64_t i, Loss&& loss) {
  const double orig = t[i];
  t[i] = orig + kEps;
  const double up = loss();
  t[i] = orig - kEps;
  const double down = loss();
  t[i] = orig;
  return (up - down) / (2.0 * kEps);
}

struct Accum {
  double max_err = 0.0;
  std::int64_t coords = 0;

  void add(double analytic, double numeric) {
    max_err = std::max(max_err, relative_error(analytic, numeric));
    ++coords;
  }
};

template <typename Loss>
void check_all_coords(Accum& acc, Tensor<double>& t, const Tensor<double>& analytic,
                      Loss&& loss) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    acc.add(analytic[i], central_diff(t, i, loss));
}

// --- per-layer checks; loss is a fixed random projection of the output ---

void check_conv(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> x = randn(Shape{6, 6, 2}, rng);
  LayerParams<double> p = make_conv3x3<double>(2, 3);
  p.weights = randn(p.weights.shape(), rng, 0.5);
  p.bias = randn(p.bias.shape(), rng, 0.5);
  const Tensor<double> proj = randn(Shape{6, 6, 3}, rng);
  auto loss = [&]() { return dot_all(conv2d_forward(x, p), proj); };
  const ConvGrads<double> g = conv2d_backward(x, p, proj);
  check_all_coords(acc, x, g.input, loss);
  check_all_coords(acc, p.weights, g.weights, loss);
  check_all_coords(acc, p.bias, g.bias, loss);
}

void check_fc(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> x = randn(Shape{8}, rng);
  LayerParams<double> p = make_fully_connected<double>(5, 8);
  p.weights = randn(p.weights.shape(), rng, 0.5);
  p.bias = randn(p.bias.shape(), rng, 0.5);
  const Tensor<double> proj = randn(Shape{5}, rng);
  auto loss = [&]() { return dot_all(fc_forward(x, p), proj); };
  const FcGrads<double> g = fc_backward(x, p, proj);
  check_all_coords(acc, x, g.input, loss);
  check_all_coords(acc, p.weights, g.weights, loss);
  check_all_coords(acc, p.bias, g.bias, loss);
}

bool pool_has_margin(const Tensor<double>& x, double margin) {
  const int h = x.shape().height(), w = x.shape().width(), c = x.shape().channels();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; y += 2)
      for (int xx = 0; xx < w; xx += 2) {
        double top = -1e300, second = -1e300;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double v = x(y + dy, xx + dx, ch);
            if (v > top) {
              second = top;
              top = v;
            } else if (v > second) {
              second = v;
            }
          }
        if (top - second < margin) return false;
      }
  return true;
}

void check_pool(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> x = randn(Shape{6, 6, 2}, rng);
  for (int retry = 0; !pool_has_margin(x, 0.05) && retry < 100; ++retry)
    x = randn(Shape{6, 6, 2}, rng);
  const Tensor<double> proj = randn(Shape{3, 3, 2}, rng);
  auto loss = [&]() { return dot_all(maxpool2x2_forward(x).first, proj); };
  const PoolSwitches sw = maxpool2x2_forward(x).second;
  const Tensor<double> g = maxpool2x2_backward(sw, proj);
  check_all_coords(acc, x, g, loss);
}

void check_unpool(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> x = randn(Shape{3, 3, 2}, rng);
  const Tensor<double> proj = randn(Shape{6, 6, 2}, rng);
  auto loss = [&]() { return dot_all(unpool2x2_forward(x), proj); };
  const Tensor<double> g = unpool2x2_backward(proj);
  check_all_coords(acc, x, g, loss);
}

void check_relu(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> x = randn(Shape{4, 4, 3}, rng);
  for (std::int64_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < 0.05) x[i] = x[i] < 0.0 ? x[i] - 0.05 : x[i] + 0.05;
  const Tensor<double> proj = randn(x.shape(), rng);
  auto loss = [&]() { return dot_all(relu_forward(x), proj); };
  const Tensor<double> g = relu_backward(x, proj);
  check_all_coords(acc, x, g, loss);
}

void check_concat(Accum& acc, std::uint64_t seed) {
  std::mt19937 rng = make_rng(seed);
  Tensor<double> a = randn(Shape{3, 3, 2}, rng);
  Tensor<double> b = randn(Shape{3, 3, 3}, rng);
  const Tensor<double> proj = randn(Shape{3, 3, 5}, rng);
  auto loss = [&]() { return dot_all(concat_channels(a, b), proj); };
  const Tensor<double> ga = slice_channels(proj, 0, 2);
  const Tensor<double> gb = slice_channels(proj, 2, 5);
  check_all_coords(acc, a, ga, loss);
  check_all_coords(acc, b, gb, loss);
}

// --- full-network checks ---

// ReLU activity bits plus pooling switch codes for one forward pass. A finite
// difference is well-posed only when these decisions agree at both probe
// points; a coordinate whose nudge flips a decision sits on a kink and is
// skipped.
std::vector<std::uint8_t> decision_pattern(const Network<double>& net,
                                           const Tensor<double>& primary,
                                           const Tensor<double>& secondary, double* loss,
                                           const Tensor<double>& target) {
  ForwardCache<double> cache;
  const Tensor<double> out = forward(net, primary, secondary, &cache);
  if (loss) *loss = mse_loss(out, target).value;

  std::vector<std::uint8_t> bits;
  auto mask_of = [&bits](const Tensor<double>& post) {
    for (std::int64_t i = 0; i < post.size(); ++i) bits.push_back(post[i] > 0.0 ? 1 : 0);
  };
  const auto& trunk = net.spec.trunk;
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    if (trunk[i].relu)
      mask_of(i + 1 < trunk.size() ? cache.trunk_in[i + 1] : cache.output);
    if (trunk[i].kind == LayerKind::MaxPool2x2)
      bits.insert(bits.end(), cache.trunk_pool[i].code.begin(), cache.trunk_pool[i].code.end());
  }
  const auto& branch = net.spec.attribute_branch;
  for (std::size_t i = 0; i < branch.size(); ++i)
    if (branch[i].relu)
      mask_of(i + 1 < branch.size() ? cache.attr_in[i + 1] : cache.concat_side);
  return bits;
}

void check_full_network(Accum& acc, int stage, std::uint64_t seed) {
  const NetworkSpec spec = stage == 1 ? build_stage1(3, 2, 8) : build_stage2(8);

  std::mt19937 rng = make_rng(derive_seed(seed, 0xF0, static_cast<std::uint64_t>(stage)));
  Network<double> net = init_network<double>(
      spec, derive_seed(seed, 0xF1, static_cast<std::uint64_t>(stage)));
  Tensor<double> primary = randn(Shape{8, 8, 1}, rng);
  Tensor<double> secondary;
  if (stage == 1) {
    secondary = Tensor<double>(Shape{3});
    secondary[static_cast<std::int64_t>(rng() % 3)] = 1.0;
  } else {
    secondary = randn(Shape{8, 8, 1}, rng);
  }
  const Tensor<double> target = randn(Shape{8, 8, 1}, rng);

  ForwardCache<double> cache;
  const Tensor<double> out = forward(net, primary, secondary, &cache);
  const Gradients<double> grads = backward(net, cache, mse_loss(out, target).grad);

  // Central difference with the decision guard; NaN marks an ill-posed coord.
  auto guarded_diff = [&](Tensor<double>& t, std::int64_t i) {
    const double orig = t[i];
    double up = 0.0, down = 0.0;
    t[i] = orig + kEps;
    const auto up_bits = decision_pattern(net, primary, secondary, &up, target);
    t[i] = orig - kEps;
    const auto down_bits = decision_pattern(net, primary, secondary, &down, target);
    t[i] = orig;
    if (up_bits != down_bits) return std::numeric_limits<double>::quiet_NaN();
    return (up - down) / (2.0 * kEps);
  };
  auto check_sampled = [&](Tensor<double>& t, const Tensor<double>& analytic,
                           std::int64_t want) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(t.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
    std::shuffle(order.begin(), order.end(), rng);
    std::int64_t done = 0;
    for (std::int64_t c : order) {
      if (done >= want) break;
      const double numeric = guarded_diff(t, c);
      if (std::isnan(numeric)) continue;
      acc.add(analytic[c], numeric);
      ++done;
    }
  };

  for (std::size_t t = 0; t < net.params.size(); ++t) {
    check_sampled(net.params[t].weights, grads.params[t].weights, 5);
    check_sampled(net.params[t].bias, grads.params[t].bias, 2);
  }
  check_sampled(primary, grads.primary, 4);
  if (stage == 2) check_sampled(secondary, grads.secondary, 4);
}

template <typename Check>
GradCheckReport run_trials(const std::string& name, int trials, std::uint64_t seed,
                           Check&& check) {
  GradCheckReport report;
  report.name = name;
  report.trials = trials;
  Accum acc;
  for (int t = 0; t < trials; ++t)
    check(acc, derive_seed(seed, 0xCC, static_cast<std::uint64_t>(t)));
  report.max_rel_err = acc.max_err;
  report.coords = acc.coords;
  return report;
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("run_gradient_suite: trials must be positive");
  std::vector<GradCheckReport> reports;
  reports.push_back(run_trials("conv3x3", trials, derive_seed(seed, 1), check_conv));
  reports.push_back(run_trials("fully_connected", trials, derive_seed(seed, 2), check_fc));
  reports.push_back(run_trials("maxpool2x2", trials, derive_seed(seed, 3), check_pool));
  reports.push_back(run_trials("unpool2x2", trials, derive_seed(seed, 4), check_unpool));
  reports.push_back(run_trials("relu", trials, derive_seed(seed, 5), check_relu));
  reports.push_back(run_trials("concat", trials, derive_seed(seed, 6), check_concat));
  reports.push_back(run_trials("stage1_full", trials, derive_seed(seed, 7),
                               [](Accum& a, std::uint64_t s) { check_full_network(a, 1, s); }));
  reports.push_back(run_trials("stage2_full", trials, derive_seed(seed, 8),
                               [](Accum& a, std::uint64_t s) { check_full_network(a, 2, s); }));
  return reports;
}

}  // namespace attrgen
