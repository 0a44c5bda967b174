// Acceptance harness: runs every release criterion in order and prints one
// [PASS]/[FAIL] line per criterion. Exit code 0 only if all pass.
//
// Usage: acceptance [--only N ...] [--scratch DIR]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "attrgen/eval.hpp"
#include "attrgen/gradcheck.hpp"
#include "attrgen/rng.hpp"
#include "attrgen/synth.hpp"

using namespace attrgen;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Tunables (chosen to fit the runtime budgets on one desktop core).

constexpr int kGradTrials = 20;
constexpr std::uint64_t kGradSeed = 20240901;

constexpr int kOverfitChunk = 250;        // iterations between convergence checks
constexpr std::int64_t kOverfitMax = 2000;
constexpr double kOverfitLr = 1e-3;

constexpr int kPoseTrainIds = 40;
constexpr int kPoseTestIds = 12;
constexpr int kPoseIllums = 2;
constexpr std::int64_t kStage1Iters = 600;
constexpr std::int64_t kStage2Iters = 1000;  // the refiner needs a margin past pass-through
constexpr double kStageLr = 3e-4;

constexpr int kRetrievalQueries = 250;
constexpr std::int64_t kClassifierIters = 300;
constexpr double kClassifierLr = 1e-3;

constexpr std::int64_t kCompletionIters = 500;
constexpr double kCompletionLr = 3e-4;

std::string g_scratch = "/tmp/attrgen-acceptance";

// ---------------------------------------------------------------------------

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Image downsample_2x2(const Image& img) {
  Image out(img.height / 2, img.width / 2, img.space);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.pix[static_cast<std::size_t>(y) * out.width + x] =
          (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) + img.at(2 * y + 1, 2 * x) +
           img.at(2 * y + 1, 2 * x + 1)) /
          4.0f;
  return out;
}

double dataset_mse(const Checkpoint& ckpt, const Dataset& data,
                   const std::vector<SamplePair>& pairs) {
  const Network<float> net = network_from_checkpoint(ckpt);
  double sum = 0.0;
  for (const SamplePair& p : pairs) {
    const auto dst = static_cast<std::size_t>(p.target);
    const Tensor<float> pred =
        forward(net, data.source[static_cast<std::size_t>(p.source)],
                one_hot<float>(data.entries[dst].attribute_id, data.vocab_size));
    sum += mse_loss(pred, data.target[dst]).value;
  }
  return sum / static_cast<double>(pairs.size());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared slow artifacts: the synthetic pose dataset and both trained stages
// (criterion 5), reused by the retrieval criteria (6, 7).

struct StageArtifacts {
  Dataset data;
  Checkpoint stage1;
  Checkpoint stage2;
  double err1 = 0.0;
  double err2 = 0.0;
};

StageArtifacts& trained_stages() {
  static std::optional<StageArtifacts> cached;
  if (cached) return *cached;

  SynthSpec spec;
  spec.identities = kPoseTrainIds;
  spec.test_identities = kPoseTestIds;
  spec.illuminations = kPoseIllums;
  spec.seed = 7;
  spec.out_dir = g_scratch + "/pose-data";
  fs::remove_all(spec.out_dir);
  const SynthResult synth = synth_generate(spec);
  const auto images = load_images(synth.entries, spec.out_dir);

  StageArtifacts art;
  art.data = prepare_dataset(synth.entries, images, spec.vocab.size, Task::Generation);

  TrainConfig cfg;
  cfg.learning_rate = kStageLr;
  cfg.max_iterations = kStage1Iters;
  cfg.eval_interval = 100;
  cfg.seed = 11;
  std::fprintf(stderr, "  [stages] training stage 1 (%lld iterations)...\n",
               static_cast<long long>(kStage1Iters));
  const TrainResult r1 = train_stage(1, art.data, cfg);
  art.stage1 = r1.checkpoint;

  cfg.max_iterations = kStage2Iters;
  std::fprintf(stderr, "  [stages] training stage 2 (%lld iterations)...\n",
               static_cast<long long>(kStage2Iters));
  const TrainResult r2 = train_stage(2, art.data, cfg, &art.stage1);
  art.stage2 = r2.checkpoint;

  std::fprintf(stderr, "  [stages] scoring held-out generation error...\n");
  art.err1 = generation_error(art.data, art.data.eval_pairs, art.stage1);
  art.err2 = generation_error(art.data, art.data.eval_pairs, art.stage1, &art.stage2);

  save_checkpoint(g_scratch + "/pose-stage1.ckpt", art.stage1);
  save_checkpoint(g_scratch + "/pose-stage2.ckpt", art.stage2);
  cached = std::move(art);
  return *cached;
}

struct RetrievalArtifacts {
  std::vector<RetrievalQuery> queries;
  std::vector<RetrievalResult> ours;
  std::vector<RetrievalResult> two_step;
  double classifier_accuracy = 0.0;
};

RetrievalArtifacts& retrieval() {
  static std::optional<RetrievalArtifacts> cached;
  if (cached) return *cached;

  StageArtifacts& stages = trained_stages();
  RetrievalArtifacts art;

  std::vector<int> gallery;
  for (std::size_t i = 0; i < stages.data.entries.size(); ++i)
    if (stages.data.entries[i].split == Split::Test) gallery.push_back(static_cast<int>(i));

  for (const SamplePair& p : stages.data.eval_pairs)
    art.queries.push_back(
        {p.source, stages.data.entries[static_cast<std::size_t>(p.target)].attribute_id});
  std::shuffle(art.queries.begin(), art.queries.end(), make_rng(derive_seed(13, 0xE)));
  if (static_cast<int>(art.queries.size()) > kRetrievalQueries)
    art.queries.resize(kRetrievalQueries);

  std::fprintf(stderr, "  [retrieval] aligning %zu gallery images...\n", gallery.size());
  const AlignedGallery aligned = align_gallery(stages.data, gallery, stages.stage1, &stages.stage2);
  const FeatureGallery feats = gallery_features(aligned, FeatureKind::Pixels);

  std::fprintf(stderr, "  [retrieval] running %zu queries...\n", art.queries.size());
  for (const RetrievalQuery& q : art.queries)
    art.ours.push_back(retrieve(stages.data, q, feats, stages.stage1, &stages.stage2, FeatureKind::Pixels,
                                static_cast<int>(gallery.size())));

  std::fprintf(stderr, "  [retrieval] training the 2-step classifier...\n");
  TrainConfig ccfg;
  ccfg.learning_rate = kClassifierLr;
  ccfg.max_iterations = kClassifierIters;
  ccfg.eval_interval = kClassifierIters;
  ccfg.seed = 17;
  const Checkpoint classifier = train_classifier(stages.data, ccfg).checkpoint;
  art.classifier_accuracy = classifier_accuracy(classifier, stages.data, gallery);

  const TwoStepContext ctx = build_two_step_context(stages.data, gallery, classifier);
  for (const RetrievalQuery& q : art.queries)
    art.two_step.push_back(two_step_baseline(stages.data, q, ctx, static_cast<int>(gallery.size())));

  cached = std::move(art);
  return *cached;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome criterion_gradients() {
  const auto reports = run_gradient_suite(kGradTrials, kGradSeed);
  double worst = 0.0;
  std::string worst_name;
  bool pass = true;
  for (const auto& r : reports) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
    pass &= r.max_rel_err < 1e-4 && r.trials >= 20;
  }
  return {pass, "worst " + worst_name + " rel err " + fmt(worst) + " over " +
                    std::to_string(kGradTrials) + " trials/check, tolerance 1e-4"};
}

Outcome criterion_architecture() {
  // independent counting oracle, written out literally
  const std::int64_t conv_params = (9 * 1 + 1) * 64 + (9 * 64 + 1) * 64 + (9 * 71 + 1) * 64 +
                                   (9 * 64 + 1) * 128 + (9 * 128 + 1) * 128 +
                                   (9 * 128 + 1) * 64 + (9 * 64 + 1) * 64 + (9 * 64 + 1) * 1;
  const std::int64_t fc_params = (7 + 1) * 512 + (512 + 1) * 1792;
  const std::int64_t oracle = conv_params + fc_params;

  const NetworkSpec spec = build_stage1(7);
  const std::int64_t counted = parameter_count(spec);
  if (oracle != 1334657)
    return {false, "counting oracle drifted: " + std::to_string(oracle)};
  if (counted != oracle)
    return {false, "parameter_count " + std::to_string(counted) + " != oracle " +
                       std::to_string(oracle)};

  const auto trace = shape_trace(spec);
  auto has = [&](const Shape& s, bool attr_side) {
    for (const auto& e : trace)
      if (e.output == s && (e.name.rfind("attr:", 0) == 0) == attr_side) return true;
    return false;
  };
  if (!has(Shape{16, 16, 64}, false)) return {false, "missing 16x16x64 encoder output"};
  if (!has(Shape{16, 16, 7}, true)) return {false, "missing 16x16x7 attribute maps"};
  if (!has(Shape{16, 16, 71}, false)) return {false, "missing 16x16x71 fusion concat"};
  if (!(trace.back().output == Shape{32, 32, 1})) return {false, "output is not 32x32x1"};
  return {true, "1,334,657 parameters; trace 32x32x1 -> 16x16x64 | 7 -> 16x16x7 -> 16x16x71 "
                "-> 32x32x1"};
}

Outcome criterion_pairs() {
  std::vector<ManifestEntry> entries;
  entries.reserve(100 * 20 * 7);
  for (int id = 0; id < 100; ++id)
    for (int il = 0; il < 20; ++il)
      for (int a = 0; a < 7; ++a) {
        ManifestEntry e;
        e.path = std::to_string(id) + "/" + std::to_string(il) + "/" + std::to_string(a);
        e.identity = id;
        e.attribute_id = a;
        e.illumination_id = il;
        entries.push_back(e);
      }
  const auto pairs = build_pairs(entries);
  if (pairs.size() != 84000)
    return {false, "expected 84000 pairs, got " + std::to_string(pairs.size())};

  // spot-check the pair contract on a seeded sample
  std::mt19937 rng = make_rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    const SamplePair& p = pairs[pick(rng)];
    const auto& s = entries[static_cast<std::size_t>(p.source)];
    const auto& t = entries[static_cast<std::size_t>(p.target)];
    if (s.identity != t.identity || s.illumination_id != t.illumination_id ||
        s.attribute_id == t.attribute_id)
      return {false, "pair contract violated at (" + std::to_string(p.source) + ", " +
                         std::to_string(p.target) + ")"};
  }
  return {true, "100 x 20 x P(7,2) = 84000 ordered pairs"};
}

Outcome criterion_overfit() {
  // 8 fixed pairs: 4 identities x 2 poses, 32x32 renders reduced to 16x16
  std::vector<ManifestEntry> entries;
  std::vector<Image> images;
  const AttributeVocab vocab = parse_vocab("poses-7");
  for (int id = 0; id < 4; ++id)
    for (int a : {1, 5}) {
      ManifestEntry e;
      e.path = "of/" + std::to_string(id) + "_" + std::to_string(a);
      e.identity = id;
      e.attribute_id = a;
      e.illumination_id = 0;
      entries.push_back(e);
      images.push_back(downsample_2x2(render_face(31, id, a, 0, 1, vocab)));
    }
  const Dataset data = prepare_dataset(entries, images, vocab.size, Task::Generation);
  if (data.train_pairs.size() != 8)
    return {false, "expected 8 pairs, got " + std::to_string(data.train_pairs.size())};

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = kOverfitLr;
  cfg.max_iterations = 1;
  cfg.eval_interval = 1;
  cfg.seed = 29;
  TrainResult r = train_stage(1, data, cfg);
  const double initial = r.curve.front().train_loss;  // loss before any update

  double final_mse = initial;
  std::int64_t done = 1;
  while (done < kOverfitMax) {
    cfg.max_iterations = std::min<std::int64_t>(done + kOverfitChunk, kOverfitMax);
    cfg.eval_interval = kOverfitChunk;
    r = train_stage(1, data, cfg, nullptr, &r.checkpoint);
    done = cfg.max_iterations;
    final_mse = dataset_mse(r.checkpoint, data, data.train_pairs);
    if (final_mse < 0.01 * initial) break;
  }
  const bool pass = final_mse < 0.01 * initial;
  return {pass, "MSE " + fmt(initial) + " -> " + fmt(final_mse) + " after " +
                    std::to_string(done) + " iterations (need < " + fmt(0.01 * initial) + ")"};
}

Outcome criterion_refinement() {
  StageArtifacts& stages = trained_stages();
  const bool pass = stages.err2 <= stages.err1;
  return {pass, "held-out per-pixel error: stage-1 " + fmt(stages.err1) + ", stage-2 " +
                    fmt(stages.err2) + " (" + std::to_string(stages.data.eval_pairs.size()) +
                    " pairs)"};
}

Outcome criterion_retrieval() {
  RetrievalArtifacts& ret = retrieval();
  if (ret.queries.size() < 200)
    return {false, "only " + std::to_string(ret.queries.size()) + " held-out queries"};
  const double ours = recall_at_k(ret.ours, 5, 2);
  const double base = recall_at_k(ret.two_step, 5, 2);
  const bool pass = ours > base;
  return {pass, "criterion-2 recall@5: ours " + fmt(ours) + " vs 2-step " + fmt(base) +
                    " (classifier acc " + fmt(ret.classifier_accuracy) + ", " +
                    std::to_string(ret.queries.size()) + " queries)"};
}

Outcome criterion_pose_bins() {
  RetrievalArtifacts& ret = retrieval();
  StageArtifacts& stages = trained_stages();
  const auto bins = pose_change_bins(ret.queries, ret.ours, stages.data, 1);
  const PoseBin* g1 = nullptr;
  const PoseBin* g6 = nullptr;
  for (const PoseBin& b : bins) {
    if (b.delta == 1) g1 = &b;
    if (b.delta == 6) g6 = &b;
  }
  if (!g1 || !g6) return {false, "pose-change groups 1 and 6 not both populated"};
  const bool pass = g1->recall_at_5 >= g6->recall_at_5;
  std::string detail = "recall@5 by pose delta:";
  for (const PoseBin& b : bins)
    detail += " " + std::to_string(b.delta) + ":" + fmt(b.recall_at_5) + "(n=" +
              std::to_string(b.count) + ")";
  return {pass, detail};
}

Outcome criterion_completion() {
  // fresh completion training on the shared synthetic images, MAE loss
  StageArtifacts& stages = trained_stages();
  const Dataset data =
      prepare_dataset(stages.data.entries, stages.data.raw, stages.data.vocab_size, Task::Completion);

  TrainConfig cfg;
  cfg.learning_rate = kCompletionLr;
  cfg.loss = LossKind::Mae;
  cfg.max_iterations = kCompletionIters;
  cfg.eval_interval = 100;
  cfg.seed = 41;
  std::fprintf(stderr, "  [completion] training with MAE (%lld iterations)...\n",
               static_cast<long long>(kCompletionIters));
  const TrainResult r = train_stage(1, data, cfg);

  const Network<float> net = network_from_checkpoint(r.checkpoint);
  double model_mae = 0.0, trivial_mae = 0.0;
  std::int64_t bar_pixels = 0;
  for (const SamplePair& p : data.eval_pairs) {
    const auto i = static_cast<std::size_t>(p.source);
    const Tensor<float> pred =
        forward(net, data.source[i],
                one_hot<float>(data.entries[i].attribute_id, data.vocab_size));
    const Image pred_raw =
        denormalize(image_from_tensor(pred, PixelSpace::Normalized), data.stats);
    const Image& clean = data.raw[i];
    for (int y = kEyeBarTop; y < kEyeBarTop + kEyeBarHeight; ++y)
      for (int x = 0; x < clean.width; ++x) {
        model_mae += std::abs(pred_raw.at(y, x) - clean.at(y, x));
        trivial_mae += std::abs(0.0f - clean.at(y, x));  // black bar kept
        ++bar_pixels;
      }
  }
  model_mae /= static_cast<double>(bar_pixels);
  trivial_mae /= static_cast<double>(bar_pixels);
  const bool pass = model_mae < 0.5 * trivial_mae;
  return {pass, "occluded-region MAE " + fmt(model_mae) + " vs trivial " + fmt(trivial_mae) +
                    " (need < " + fmt(0.5 * trivial_mae) + ", " +
                    std::to_string(data.eval_pairs.size()) + " held-out images)"};
}

Outcome criterion_determinism() {
  // two identical train runs -> byte-identical checkpoints on disk
  SynthSpec spec;
  spec.identities = 4;
  spec.illuminations = 1;
  spec.seed = 19;
  spec.out_dir = g_scratch + "/det-data";
  fs::remove_all(spec.out_dir);
  const SynthResult synth = synth_generate(spec);
  const Dataset data = prepare_dataset(
      synth.entries, load_images(synth.entries, spec.out_dir), spec.vocab.size,
      Task::Generation);

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-4;
  cfg.max_iterations = 12;
  cfg.eval_interval = 6;
  cfg.seed = 23;
  const std::string path_a = g_scratch + "/det-a.ckpt";
  const std::string path_b = g_scratch + "/det-b.ckpt";
  save_checkpoint(path_a, train_stage(1, data, cfg, nullptr, nullptr, 7, 1).checkpoint);
  save_checkpoint(path_b, train_stage(1, data, cfg, nullptr, nullptr, 7, 4).checkpoint);
  if (read_file(path_a) != read_file(path_b))
    return {false, "identical seed/config produced different checkpoint bytes"};

  // save -> load -> save is byte-stable
  const std::string path_c = g_scratch + "/det-c.ckpt";
  save_checkpoint(path_c, load_checkpoint(path_a));
  if (read_file(path_a) != read_file(path_c))
    return {false, "checkpoint roundtrip changed bytes"};

  // PGM write -> read -> write is byte-stable
  const Image img = render_face(43, 0, 3, 0, 1, parse_vocab("poses-7"));
  const std::string pgm_a = g_scratch + "/det-a.pgm";
  const std::string pgm_b = g_scratch + "/det-b.pgm";
  write_image(pgm_a, img);
  write_image(pgm_b, read_image(pgm_a));
  if (read_file(pgm_a) != read_file(pgm_b)) return {false, "PGM roundtrip changed bytes"};

  return {true, "train/train bit-identical (1 vs 4 threads); checkpoint and PGM "
                "roundtrips byte-stable"};
}

Outcome criterion_invariants() {
  std::mt19937 rng = make_rng(47);

  // maxpool(unpool(x)) == max(x, 0)
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<float> val(-2.0f, 2.0f);
  for (int i = 0; i < 120; ++i) {
    const Shape s{2 * dim(rng), 2 * dim(rng), dim(rng)};
    Tensor<float> x(s);
    for (std::int64_t j = 0; j < x.size(); ++j) x[j] = val(rng);
    const auto back = maxpool2x2_forward(unpool2x2_forward(x)).first;
    for (std::int64_t j = 0; j < x.size(); ++j)
      if (back[j] != std::max(x[j], 0.0f))
        return {false, "maxpool∘unpool != clamp at instance " + std::to_string(i)};
  }

  // recall@K monotone in K; criterion-2 recall <= criterion-1 recall
  std::uniform_int_distribution<int> len(1, 10);
  std::bernoulli_distribution hit(0.35), follow(0.5);
  for (int i = 0; i < 120; ++i) {
    std::vector<RetrievalResult> rs;
    const int queries = 1 + i % 5;
    for (int q = 0; q < queries; ++q) {
      RetrievalResult r;
      const int n = len(rng);
      r.ranking.resize(static_cast<std::size_t>(n));
      std::iota(r.ranking.begin(), r.ranking.end(), 0);
      r.c1.resize(static_cast<std::size_t>(n));
      r.c2.resize(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        r.c1[static_cast<std::size_t>(j)] = hit(rng);
        r.c2[static_cast<std::size_t>(j)] = r.c1[static_cast<std::size_t>(j)] && follow(rng);
      }
      rs.push_back(std::move(r));
    }
    double prev1 = 0.0, prev2 = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double r1 = recall_at_k(rs, k, 1);
      const double r2 = recall_at_k(rs, k, 2);
      if (r1 < prev1 || r2 < prev2)
        return {false, "recall@K decreased in K at instance " + std::to_string(i)};
      if (r2 > r1)
        return {false, "criterion-2 recall exceeded criterion-1 at instance " +
                           std::to_string(i)};
      prev1 = r1;
      prev2 = r2;
    }
  }

  // align_gallery keeps the argmin self-generation
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t seed = derive_seed(53, static_cast<std::uint64_t>(i));
    std::vector<ManifestEntry> entries;
    std::vector<Image> images;
    std::mt19937 irng = make_rng(seed);
    std::uniform_real_distribution<float> gray(0.0f, 255.0f);
    for (int a = 0; a < 3; ++a) {
      ManifestEntry e;
      e.path = "inv/" + std::to_string(a);
      e.identity = 0;
      e.attribute_id = a;
      entries.push_back(e);
      Image img(8, 8, PixelSpace::Raw);
      for (float& v : img.pix) v = gray(irng);
      images.push_back(img);
    }
    const Dataset data = prepare_dataset(entries, images, 3, Task::Generation);
    const auto net = init_network<float>(build_stage1(3, 2, 8), seed);
    const Checkpoint ckpt = make_checkpoint(net, make_velocity(net), data.stats, seed, 0);

    const std::vector<int> gallery{0, 1, 2};
    const AlignedGallery aligned = align_gallery(data, gallery, ckpt);
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      const auto e = static_cast<std::size_t>(gallery[g]);
      double best = 0.0;
      int best_attr = -1;
      for (int a = 0; a < 3; ++a) {
        const Tensor<float> pred = forward(net, data.source[e], one_hot<float>(a, 3));
        const Image raw =
            denormalize(image_from_tensor(pred, PixelSpace::Normalized), data.stats);
        double acc = 0.0;
        for (std::int64_t j = 0; j < raw.size(); ++j) {
          const double d = static_cast<double>(raw.pix[static_cast<std::size_t>(j)]) -
                           static_cast<double>(data.raw[e].pix[static_cast<std::size_t>(j)]);
          acc += d * d;
        }
        const double dist = acc / static_cast<double>(raw.size());
        if (best_attr < 0 || dist < best) {
          best = dist;
          best_attr = a;
        }
      }
      if (aligned.kept_attr[g] != best_attr)
        return {false, "align_gallery kept attr " + std::to_string(aligned.kept_attr[g]) +
                           ", argmin is " + std::to_string(best_attr) + " at instance " +
                           std::to_string(i)};
    }
  }

  return {true, "maxpool∘unpool clamp (120), recall monotone + criterion order (120), "
                "align argmin (100)"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = no stated budget
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else if (arg == "--scratch" && i + 1 < argc) {
      g_scratch = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N ...] [--scratch DIR]\n");
      return 2;
    }
  }
  fs::create_directories(g_scratch);

  const std::vector<Criterion> criteria{
      {1, "gradient suite", 120.0, criterion_gradients},
      {2, "architecture exactness", 0.0, criterion_architecture},
      {3, "pair construction", 5.0, criterion_pairs},
      {4, "overfit check", 300.0, criterion_overfit},
      {5, "stage refinement", 3600.0, criterion_refinement},
      {6, "retrieval vs 2-step", 0.0, criterion_retrieval},
      {7, "pose-change decay", 0.0, criterion_pose_bins},
      {8, "image completion", 0.0, criterion_completion},
      {9, "determinism", 0.0, criterion_determinism},
      {10, "invariant suite", 0.0, criterion_invariants},
  };

  int passed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    if (out.pass && c.budget_seconds > 0.0 && dt > c.budget_seconds) {
      out.pass = false;
      out.detail += " [exceeded " + fmt(c.budget_seconds) + " s budget]";
    }
    std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id,
                c.name, out.detail.c_str(), dt);
    std::fflush(stdout);
    passed += out.pass;
  }
  std::printf("acceptance: %d/%d passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
