#include "attrgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "attrgen/normalize.hpp"
#include "attrgen/rng.hpp"

namespace attrgen {

void validate_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be at least 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("config: momentum must be in [0, 1)");
  if (cfg.max_iterations < 1)
    throw std::invalid_argument("config: max_iterations must be at least 1");
  if (cfg.eval_interval < 1)
    throw std::invalid_argument("config: eval_interval must be at least 1");
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "lr")
      cfg.learning_rate = std::stod(value);
    else if (key == "momentum")
      cfg.momentum = std::stod(value);
    else if (key == "batch_size")
      cfg.batch_size = std::stoi(value);
    else if (key == "max_iterations")
      cfg.max_iterations = std::stoll(value);
    else if (key == "loss")
      cfg.loss = parse_loss(value);
    else if (key == "seed")
      cfg.seed = std::stoull(value);
    else if (key == "eval_interval")
      cfg.eval_interval = std::stoll(value);
    else
      throw std::invalid_argument("config: unknown key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  TrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got '" + stripped + "'");
    try {
      set_config_value(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

Dataset prepare_dataset(std::vector<ManifestEntry> entries, std::vector<Image> images,
                        int vocab_size, Task task, const NormStats* fixed_stats) {
  if (entries.size() != images.size())
    throw std::invalid_argument("prepare_dataset: entry/image count mismatch");
  if (entries.empty()) throw std::invalid_argument("prepare_dataset: empty dataset");

  Dataset data;
  data.input_size = images[0].height;
  if (data.input_size % 4 != 0)
    throw std::invalid_argument("prepare_dataset: image size must be a multiple of 4");
  for (const Image& img : images)
    if (img.height != data.input_size || img.width != data.input_size)
      throw std::invalid_argument("prepare_dataset: images differ in size");

  data.entries = std::move(entries);
  data.raw = std::move(images);
  data.vocab_size = vocab_size;
  data.task = task;

  if (fixed_stats) {
    data.stats = *fixed_stats;
  } else {
    std::vector<Image> train_images;
    for (std::size_t i = 0; i < data.entries.size(); ++i)
      if (data.entries[i].split == Split::Train) train_images.push_back(data.raw[i]);
    if (train_images.empty())
      throw std::invalid_argument("prepare_dataset: no train-split images for normalization");
    data.stats = compute_norm_stats(train_images);
  }

  const int bar_top = data.input_size * kEyeBarTop / kImageSize;
  const int bar_h = std::max(1, data.input_size * kEyeBarHeight / kImageSize);
  data.source.reserve(data.raw.size());
  data.target.reserve(data.raw.size());
  for (const Image& img : data.raw) {
    const Image src_raw =
        task == Task::Completion ? apply_eye_occlusion(img, bar_top, bar_h) : img;
    data.source.push_back(to_tensor<float>(normalize(src_raw, data.stats)));
    data.target.push_back(to_tensor<float>(normalize(img, data.stats)));
  }

  if (task == Task::Generation) {
    for (const SamplePair& p : build_pairs(data.entries)) {
      const Split s = data.entries[static_cast<std::size_t>(p.source)].split;
      const Split t = data.entries[static_cast<std::size_t>(p.target)].split;
      if (s != t)
        throw std::invalid_argument("prepare_dataset: pair crosses the train/test split");
      (s == Split::Train ? data.train_pairs : data.eval_pairs).push_back(p);
    }
  } else {
    // Completion regresses each occluded image onto its own clean image.
    for (std::size_t i = 0; i < data.entries.size(); ++i) {
      const SamplePair p{static_cast<int>(i), static_cast<int>(i)};
      (data.entries[i].split == Split::Train ? data.train_pairs : data.eval_pairs).push_back(p);
    }
  }
  return data;
}

void write_loss_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "iteration,train_loss,eval_loss\n";
  char buf[128];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.8g,%.8g", static_cast<long long>(p.iteration),
                  p.train_loss, p.eval_loss);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {

constexpr int kReductionSlots = 8;

std::vector<LayerParams<float>> zeros_like_params(const Network<float>& net) {
  return make_velocity(net);
}

void accumulate(std::vector<LayerParams<float>>& acc,
                const std::vector<LayerParams<float>>& grads) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i].weights.array() += grads[i].weights.array();
    acc[i].bias.array() += grads[i].bias.array();
  }
}

void scale_params(std::vector<LayerParams<float>>& g, float s) {
  for (auto& p : g) {
    p.weights.array() *= s;
    p.bias.array() *= s;
  }
}

std::vector<int> epoch_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng = make_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

struct BatchResult {
  double loss = 0.0;
  std::vector<LayerParams<float>> grads;
};

// Fixed-slot reduction: sample j of the batch lands in slot j % kSlots, slots
// are merged in index order, so sums are bit-stable for any thread count.
template <typename PerSample>
BatchResult run_batch(const Network<float>& net, const std::vector<int>& batch, int threads,
                      PerSample&& per_sample) {
  const int n = static_cast<int>(batch.size());
  std::vector<std::vector<LayerParams<float>>> slot_grads(kReductionSlots);
  std::vector<double> slot_loss(kReductionSlots, 0.0);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int s = 0; s < kReductionSlots; ++s) {
    for (int j = s; j < n; j += kReductionSlots) {
      Gradients<float> g;
      slot_loss[static_cast<std::size_t>(s)] += per_sample(batch[static_cast<std::size_t>(j)], g);
      if (slot_grads[static_cast<std::size_t>(s)].empty())
        slot_grads[static_cast<std::size_t>(s)] = std::move(g.params);
      else
        accumulate(slot_grads[static_cast<std::size_t>(s)], g.params);
    }
  }
  BatchResult r;
  r.grads = zeros_like_params(net);
  for (int s = 0; s < kReductionSlots; ++s) {
    r.loss += slot_loss[static_cast<std::size_t>(s)];
    if (!slot_grads[static_cast<std::size_t>(s)].empty())
      accumulate(r.grads, slot_grads[static_cast<std::size_t>(s)]);
  }
  r.loss /= n;
  scale_params(r.grads, 1.0f / static_cast<float>(n));
  return r;
}

struct LoopHooks {
  std::function<double(int, Gradients<float>&)> per_sample;  // returns sample loss
  std::function<double()> eval;                              // NaN when unavailable
};

TrainResult run_training_loop(Network<float>& net, std::vector<LayerParams<float>>& vel,
                              const std::vector<int>& sample_ids, const TrainConfig& cfg,
                              std::uint64_t seed, std::int64_t start_iteration, int stage,
                              const NormStats& stats, int threads, std::ostream* log,
                              const LoopHooks& hooks) {
  const int n = static_cast<int>(sample_ids.size());
  const int batch = std::min<int>(cfg.batch_size, n);
  const std::int64_t batches_per_epoch = n / batch;

  TrainResult result;
  double window_sum = 0.0;
  std::int64_t window_n = 0;
  for (std::int64_t it = start_iteration; it < cfg.max_iterations; ++it) {
    const std::int64_t epoch = it / batches_per_epoch;
    const std::int64_t offset = (it % batches_per_epoch) * batch;
    const std::vector<int> perm = epoch_permutation(
        n, derive_seed(seed, 0xE7, static_cast<std::uint64_t>(stage),
                       static_cast<std::uint64_t>(epoch)));
    std::vector<int> ids(static_cast<std::size_t>(batch));
    for (int j = 0; j < batch; ++j)
      ids[static_cast<std::size_t>(j)] =
          sample_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(offset + j)])];

    const BatchResult b = run_batch(net, ids, threads, hooks.per_sample);
    if (!std::isfinite(b.loss))
      throw std::runtime_error("training diverged: non-finite loss at iteration " +
                               std::to_string(it + 1));
    sgd_momentum_step(net, vel, b.grads, cfg.learning_rate, cfg.momentum);

    window_sum += b.loss;
    ++window_n;
    if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.max_iterations) {
      CurvePoint p;
      p.iteration = it + 1;
      p.train_loss = window_sum / static_cast<double>(window_n);
      p.eval_loss = hooks.eval();
      result.curve.push_back(p);
      window_sum = 0.0;
      window_n = 0;
      if (log)
        (*log) << "iter " << p.iteration << "  train " << p.train_loss << "  eval "
               << p.eval_loss << "\n";
    }
  }
  result.checkpoint = make_checkpoint(net, vel, stats, seed,
                                      static_cast<std::uint64_t>(cfg.max_iterations));
  return result;
}

}  // namespace

TrainResult train_stage(int stage, const Dataset& data, const TrainConfig& cfg,
                        const Checkpoint* stage1_prior, const Checkpoint* resume,
                        int attribute_map_channels, int threads, std::ostream* log) {
  validate_config(cfg);
  if (stage != 1 && stage != 2)
    throw std::invalid_argument("train_stage: stage must be 1 or 2");
  if (stage == 2 && !stage1_prior)
    throw std::invalid_argument(
        "train_stage: stage 2 requires a trained stage-1 checkpoint (its outputs are the "
        "stage-2 inputs)");
  if (data.train_pairs.empty()) throw std::invalid_argument("train_stage: no training pairs");

  const NetworkSpec spec = stage == 1 ? build_stage1(data.vocab_size, attribute_map_channels,
                                                     data.input_size)
                                      : build_stage2(data.input_size);

  Network<float> f1;
  if (stage == 2) {
    if (stage1_prior->spec.id != NetworkId::Stage1 ||
        stage1_prior->spec.input_size != data.input_size ||
        stage1_prior->spec.attribute_count != data.vocab_size)
      throw std::invalid_argument("train_stage: stage-1 checkpoint does not match the dataset");
    if (stage1_prior->stats.mean != data.stats.mean || stage1_prior->stats.std != data.stats.std)
      throw std::invalid_argument(
          "train_stage: dataset was not normalized with the stage-1 checkpoint statistics");
    f1 = network_from_checkpoint(*stage1_prior);
  }

  Network<float> net;
  std::vector<LayerParams<float>> vel;
  std::uint64_t seed = cfg.seed;
  std::int64_t start_iteration = 0;
  if (resume) {
    if (resume->spec.id != spec.id || resume->spec.input_size != spec.input_size ||
        resume->spec.attribute_count != spec.attribute_count ||
        resume->spec.attribute_map_channels != spec.attribute_map_channels)
      throw std::invalid_argument("train_stage: resume checkpoint does not match architecture");
    net = network_from_checkpoint(*resume);
    vel = resume->velocity;
    seed = resume->seed;
    start_iteration = static_cast<std::int64_t>(resume->iterations);
    if (start_iteration > cfg.max_iterations)
      throw std::invalid_argument("train_stage: checkpoint is already past max_iterations");
  } else {
    net = init_network<float>(spec, derive_seed(seed, 0xA1, static_cast<std::uint64_t>(stage)));
    vel = make_velocity(net);
  }

  std::vector<Tensor<float>> onehots;
  for (int a = 0; a < data.vocab_size; ++a) onehots.push_back(one_hot<float>(a, data.vocab_size));

  auto pair_loss = [&](const Network<float>& model, const SamplePair& p, Gradients<float>* out) {
    const auto src = static_cast<std::size_t>(p.source);
    const auto dst = static_cast<std::size_t>(p.target);
    const Tensor<float>& attr =
        onehots[static_cast<std::size_t>(data.entries[dst].attribute_id)];
    ForwardCache<float> cache;
    Tensor<float> pred;
    if (stage == 1) {
      pred = forward(model, data.source[src], attr, out ? &cache : nullptr);
    } else {
      const Tensor<float> coarse = forward(f1, data.source[src], attr);
      pred = forward(model, data.source[src], coarse, out ? &cache : nullptr);
    }
    LossResult<float> lr = compute_loss(cfg.loss, pred, data.target[dst]);
    if (out) *out = backward(model, cache, lr.grad);
    return lr.value;
  };

  LoopHooks hooks;
  hooks.per_sample = [&](int pair_idx, Gradients<float>& g) {
    return pair_loss(net, data.train_pairs[static_cast<std::size_t>(pair_idx)], &g);
  };
  const std::size_t eval_n = std::min<std::size_t>(data.eval_pairs.size(), 64);
  hooks.eval = [&]() {
    if (eval_n == 0) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (std::size_t i = 0; i < eval_n; ++i) sum += pair_loss(net, data.eval_pairs[i], nullptr);
    return sum / static_cast<double>(eval_n);
  };

  std::vector<int> ids(data.train_pairs.size());
  std::iota(ids.begin(), ids.end(), 0);
  return run_training_loop(net, vel, ids, cfg, seed, start_iteration, stage, data.stats,
                           threads, log, hooks);
}

int classify_attribute(const Network<float>& net, const Tensor<float>& image) {
  const Tensor<float> logits = forward(net, image, Tensor<float>{});
  int best = 0;
  for (std::int64_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

TrainResult train_classifier(const Dataset& data, const TrainConfig& cfg, int threads,
                             std::ostream* log) {
  validate_config(cfg);
  std::vector<int> train_entries;
  std::vector<int> eval_entries;
  for (std::size_t i = 0; i < data.entries.size(); ++i)
    (data.entries[i].split == Split::Train ? train_entries : eval_entries)
        .push_back(static_cast<int>(i));
  if (train_entries.empty()) throw std::invalid_argument("train_classifier: no train entries");

  const NetworkSpec spec = build_attribute_classifier(data.vocab_size, data.input_size);
  Network<float> net = init_network<float>(spec, derive_seed(cfg.seed, 0xA1, 3));
  std::vector<LayerParams<float>> vel = make_velocity(net);

  std::vector<Tensor<float>> onehots;
  for (int a = 0; a < data.vocab_size; ++a) onehots.push_back(one_hot<float>(a, data.vocab_size));

  auto entry_loss = [&](const Network<float>& model, int entry, Gradients<float>* out) {
    const auto e = static_cast<std::size_t>(entry);
    ForwardCache<float> cache;
    const Tensor<float> logits =
        forward(model, data.target[e], Tensor<float>{}, out ? &cache : nullptr);
    LossResult<float> lr =
        mse_loss(logits, onehots[static_cast<std::size_t>(data.entries[e].attribute_id)]);
    if (out) *out = backward(model, cache, lr.grad);
    return lr.value;
  };

  LoopHooks hooks;
  hooks.per_sample = [&](int entry, Gradients<float>& g) { return entry_loss(net, entry, &g); };
  const std::size_t eval_n = std::min<std::size_t>(eval_entries.size(), 64);
  hooks.eval = [&]() {
    if (eval_n == 0) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (std::size_t i = 0; i < eval_n; ++i)
      sum += entry_loss(net, eval_entries[i], nullptr);
    return sum / static_cast<double>(eval_n);
  };

  return run_training_loop(net, vel, train_entries, cfg, cfg.seed, 0, 3,
                           data.stats, threads, log, hooks);
}

double classifier_accuracy(const Checkpoint& ckpt, const Dataset& data,
                           const std::vector<int>& entry_indices) {
  if (entry_indices.empty())
    throw std::invalid_argument("classifier_accuracy: no entries to score");
  const Network<float> net = network_from_checkpoint(ckpt);
  int correct = 0;
  for (int idx : entry_indices) {
    const auto e = static_cast<std::size_t>(idx);
    correct += classify_attribute(net, data.target[e]) == data.entries[e].attribute_id;
  }
  return static_cast<double>(correct) / static_cast<double>(entry_indices.size());
}

}  // namespace attrgen
