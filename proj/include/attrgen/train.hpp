#pragma once

#include <iosfwd>
#include <optional>

#include "attrgen/checkpoint.hpp"
#include "attrgen/loss.hpp"
#include "attrgen/manifest.hpp"

namespace attrgen {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-5;
  double momentum = 0.95;
  std::int64_t max_iterations = 1000;
  LossKind loss = LossKind::Mse;
  std::uint64_t seed = 1;
  std::int64_t eval_interval = 100;
};

void validate_config(const TrainConfig& cfg);

/// Plain-text "key = value" config file; keys lr, momentum, batch_size,
/// max_iterations, loss, seed, eval_interval. Unknown keys rejected.
TrainConfig load_train_config(const std::string& path);
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

enum class Task : std::uint8_t { Generation, Completion };

/// Training-ready view of a manifest: raw images plus normalized tensors for
/// the source side (eye-occluded first for the completion task) and target
/// side, and the train/eval pair lists.
struct Dataset {
  std::vector<ManifestEntry> entries;
  std::vector<Image> raw;                // clean raw images, aligned with entries
  std::vector<Tensor<float>> source;     // normalized network inputs
  std::vector<Tensor<float>> target;     // normalized regression targets
  std::vector<SamplePair> train_pairs;
  std::vector<SamplePair> eval_pairs;
  NormStats stats;
  int vocab_size = 7;
  int input_size = kImageSize;
  Task task = Task::Generation;
};

/// Stats come from the train-split images unless `fixed_stats` pins them
/// (required when preparing data for a stage-2 run or for evaluation against
/// an existing stage-1 checkpoint).
Dataset prepare_dataset(std::vector<ManifestEntry> entries, std::vector<Image> images,
                        int vocab_size, Task task, const NormStats* fixed_stats = nullptr);

struct CurvePoint {
  std::int64_t iteration = 0;
  double train_loss = 0.0;  // mean over the window since the previous point
  double eval_loss = 0.0;   // NaN when the dataset has no eval pairs
};

void write_loss_curve(const std::string& path, const std::vector<CurvePoint>& curve);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<CurvePoint> curve;
};

/// Minibatch SGD over the dataset's train pairs; shuffles every epoch with a
/// seeded RNG and is bit-deterministic for a given seed regardless of thread
/// count. Stage 2 requires the stage-1 checkpoint whose outputs feed it
/// (computed on the fly, never precomputed). `resume` continues a checkpoint
/// to a larger max_iterations along the identical trajectory.
TrainResult train_stage(int stage, const Dataset& data, const TrainConfig& cfg,
                        const Checkpoint* stage1_prior = nullptr,
                        const Checkpoint* resume = nullptr, int attribute_map_channels = 7,
                        int threads = 1, std::ostream* log = nullptr);

/// Attribute classifier for the two-step retrieval baseline, trained with MSE
/// against one-hot labels on the train split.
TrainResult train_classifier(const Dataset& data, const TrainConfig& cfg, int threads = 1,
                             std::ostream* log = nullptr);

/// Fraction of entries whose predicted attribute matches the label.
double classifier_accuracy(const Checkpoint& ckpt, const Dataset& data,
                           const std::vector<int>& entry_indices);

/// Argmax of the classifier logits for one normalized image.
int classify_attribute(const Network<float>& net, const Tensor<float>& image);

}  // namespace attrgen
