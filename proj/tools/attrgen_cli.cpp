// Command-line front end: dataset synthesis, two-stage training, generation,
// completion, evaluation, and gradient diagnostics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <thread>

#include "attrgen/eval.hpp"
#include "attrgen/gradcheck.hpp"
#include "attrgen/rng.hpp"
#include "attrgen/synth.hpp"

namespace {

using namespace attrgen;

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

Dataset load_prepared(const std::string& manifest, int vocab_size, Task task,
                      const NormStats* fixed_stats) {
  std::vector<ManifestEntry> entries = load_manifest(manifest, vocab_size);
  if (entries.empty()) throw std::runtime_error(manifest + ": manifest lists no images");
  std::vector<Image> images = load_images(entries, parent_dir(manifest));
  return prepare_dataset(std::move(entries), std::move(images), vocab_size, task, fixed_stats);
}

Image generate_image(const Checkpoint& ckpt1, const Checkpoint* ckpt2, const Image& source_raw,
                     int attr) {
  const Network<float> f1 = network_from_checkpoint(ckpt1);
  const Tensor<float> src = to_tensor<float>(normalize(source_raw, ckpt1.stats));
  const Tensor<float> onehot = one_hot<float>(attr, ckpt1.spec.attribute_count);
  Tensor<float> out = forward(f1, src, onehot);
  if (ckpt2) {
    const Network<float> f2 = network_from_checkpoint(*ckpt2);
    out = forward(f2, src, out);
  }
  return quantize_raw(denormalize(image_from_tensor(out, PixelSpace::Normalized), ckpt1.stats));
}

struct TrainCli {
  int stage = 1;
  std::string task = "generation";
  std::string manifest;
  std::string vocab = "poses-7";
  std::string config_path;
  std::string out = "stage.ckpt";
  std::string curve_path;
  std::string ckpt1_path;
  std::string resume_path;
  int maps = 7;
};

int run_train(const TrainCli& cli, TrainConfig cfg, int threads) {
  const AttributeVocab vocab = parse_vocab(cli.vocab);

  std::optional<Checkpoint> ckpt1;
  if (!cli.ckpt1_path.empty()) ckpt1 = load_checkpoint(cli.ckpt1_path);
  std::optional<Checkpoint> resume;
  if (!cli.resume_path.empty()) resume = load_checkpoint(cli.resume_path);

  const Task task = cli.task == "completion" ? Task::Completion : Task::Generation;
  const NormStats* fixed = nullptr;
  if (cli.stage == 2) fixed = &ckpt1->stats;
  else if (resume) fixed = &resume->stats;

  const Dataset data = load_prepared(cli.manifest, vocab.size, task, fixed);
  std::cerr << "training stage " << cli.stage << " on " << data.train_pairs.size()
            << " pairs (" << data.eval_pairs.size() << " held out)\n";

  const TrainResult result =
      train_stage(cli.stage, data, cfg, ckpt1 ? &*ckpt1 : nullptr, resume ? &*resume : nullptr,
                  cli.maps, threads, &std::cerr);
  save_checkpoint(cli.out, result.checkpoint);
  std::cout << "checkpoint written to " << cli.out << "\n";
  if (!cli.curve_path.empty()) {
    write_loss_curve(cli.curve_path, result.curve);
    std::cout << "loss curve written to " << cli.curve_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-conditioned face generation pipeline"};
  app.require_subcommand(1);
  int threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (results identical for any count)")
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the procedural dataset");
  SynthSpec synth_spec;
  std::string synth_vocab = "poses-7";
  synth->add_option("--ids", synth_spec.identities, "Train-split identities")
      ->capture_default_str();
  synth->add_option("--test-ids", synth_spec.test_identities, "Held-out identities")
      ->capture_default_str();
  synth->add_option("--illums", synth_spec.illuminations, "Illumination conditions")
      ->capture_default_str();
  synth->add_option("--vocab", synth_vocab, "Attribute vocabulary (poses-7 | accessories-7)")
      ->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", synth_spec.out_dir, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train stage 1 or stage 2");
  TrainCli train_cli;
  TrainConfig defaults;
  train->add_option("--stage", train_cli.stage, "Network stage (1 or 2)")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  train->add_option("--task", train_cli.task, "generation | completion")
      ->check(CLI::IsMember({"generation", "completion"}))
      ->capture_default_str();
  train->add_option("--manifest", train_cli.manifest, "Dataset manifest CSV")->required();
  train->add_option("--vocab", train_cli.vocab, "Attribute vocabulary")->capture_default_str();
  train->add_option("--config", train_cli.config_path, "key = value config file");
  train->add_option("--out", train_cli.out, "Checkpoint output path")->capture_default_str();
  train->add_option("--curve", train_cli.curve_path, "Loss curve CSV output path");
  train->add_option("--ckpt1", train_cli.ckpt1_path,
                    "Trained stage-1 checkpoint (required for --stage 2)");
  train->add_option("--resume", train_cli.resume_path, "Checkpoint to continue training from");
  train->add_option("--maps", train_cli.maps, "Attribute feature-map channels")
      ->capture_default_str();
  auto* f_lr = train->add_option("--lr", defaults.learning_rate, "Learning rate")
                   ->capture_default_str();
  auto* f_mom = train->add_option("--momentum", defaults.momentum, "Momentum coefficient")
                    ->capture_default_str();
  auto* f_batch = train->add_option("--batch-size", defaults.batch_size, "Minibatch size")
                      ->capture_default_str();
  auto* f_iters =
      train->add_option("--max-iterations", defaults.max_iterations, "Total SGD iterations")
          ->capture_default_str();
  std::string loss_name_flag = "mse";
  auto* f_loss = train->add_option("--loss", loss_name_flag, "Loss (mse | mae)")
                     ->check(CLI::IsMember({"mse", "mae"}))
                     ->capture_default_str();
  auto* f_seed = train->add_option("--seed", defaults.seed, "RNG seed")->capture_default_str();
  auto* f_eval = train->add_option("--eval-interval", defaults.eval_interval,
                                   "Iterations between loss-curve points")
                     ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Generate attribute-modified images");
  std::string gen_ckpt1, gen_ckpt2, gen_input, gen_out = "generated.pgm";
  int gen_attr = -1;
  gen->add_option("--ckpt1", gen_ckpt1, "Stage-1 checkpoint")->required();
  gen->add_option("--ckpt2", gen_ckpt2, "Stage-2 checkpoint (optional refinement)");
  gen->add_option("--input", gen_input, "Source image (32x32 PGM)")->required();
  gen->add_option("--attr", gen_attr, "Target attribute id; -1 generates every attribute")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output montage PGM")->capture_default_str();

  // complete
  auto* complete = app.add_subcommand("complete", "Eye-occlusion completion");
  std::string comp_ckpt1, comp_ckpt2, comp_input, comp_out = "completed.pgm";
  int comp_attr = 3;
  bool comp_no_occlude = false;
  complete->add_option("--ckpt1", comp_ckpt1, "Completion stage-1 checkpoint")->required();
  complete->add_option("--ckpt2", comp_ckpt2, "Completion stage-2 checkpoint");
  complete->add_option("--input", comp_input, "Source image (32x32 PGM)")->required();
  complete->add_option("--attr", comp_attr, "Attribute id of the source image")
      ->capture_default_str();
  complete->add_flag("--no-occlude", comp_no_occlude,
                     "Input already carries the black bar; do not add one");
  complete->add_option("--out", comp_out, "Output montage PGM")->capture_default_str();

  // eval-gen
  auto* eval_gen = app.add_subcommand("eval-gen", "Mean per-pixel generation error");
  std::string eg_manifest, eg_ckpt1, eg_ckpt2, eg_out;
  eval_gen->add_option("--manifest", eg_manifest, "Dataset manifest CSV")->required();
  eval_gen->add_option("--ckpt1", eg_ckpt1, "Stage-1 checkpoint")->required();
  eval_gen->add_option("--ckpt2", eg_ckpt2, "Stage-2 checkpoint (optional)");
  eval_gen->add_option("--out", eg_out, "Metrics CSV output path");

  // eval-retrieval
  auto* eval_ret = app.add_subcommand("eval-retrieval", "Recall@K retrieval evaluation");
  std::string er_manifest, er_ckpt1, er_ckpt2, er_out, er_bins_out, er_montage;
  std::string er_feature = "pixels";
  int er_criterion = 2, er_k = 5, er_queries = 500, er_cls_iters = 300;
  std::uint64_t er_seed = 1;
  bool er_no_two_step = false;
  eval_ret->add_option("--manifest", er_manifest, "Dataset manifest CSV")->required();
  eval_ret->add_option("--ckpt1", er_ckpt1, "Stage-1 checkpoint")->required();
  eval_ret->add_option("--ckpt2", er_ckpt2, "Stage-2 checkpoint (optional)");
  eval_ret->add_option("--feature", er_feature, "pixels | stage2-mid")
      ->check(CLI::IsMember({"pixels", "stage2-mid"}))
      ->capture_default_str();
  eval_ret->add_option("--criterion", er_criterion, "Headline criterion (1 or 2)")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  eval_ret->add_option("--k", er_k, "Recall cutoff K")->capture_default_str();
  eval_ret->add_option("--queries", er_queries, "Maximum query count")->capture_default_str();
  eval_ret->add_option("--seed", er_seed, "Query sampling seed")->capture_default_str();
  eval_ret->add_flag("--no-two-step", er_no_two_step, "Skip the 2-step classifier baseline");
  eval_ret->add_option("--classifier-iters", er_cls_iters,
                       "Training iterations for the baseline classifier")
      ->capture_default_str();
  eval_ret->add_option("--out", er_out, "Metrics CSV output path");
  eval_ret->add_option("--bins-out", er_bins_out, "Pose-change bins CSV output path");
  eval_ret->add_option("--montage-out", er_montage, "Qualitative montage PGM path");

  // dump-maps
  auto* dump = app.add_subcommand("dump-maps", "Write attribute feature maps as PGMs");
  std::string dm_ckpt1, dm_out = "maps";
  dump->add_option("--ckpt1", dm_ckpt1, "Stage-1 checkpoint")->required();
  dump->add_option("--out", dm_out, "Output directory")->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  int gc_trials = 20;
  std::uint64_t gc_seed = 1;
  gc->add_option("--trials", gc_trials, "Trials per check")->capture_default_str();
  gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      synth_spec.vocab = parse_vocab(synth_vocab);
      const SynthResult result = synth_generate(synth_spec);
      std::cout << "wrote " << result.entries.size() << " images and " << result.manifest_path
                << "\n";
      return 0;
    }

    if (*train) {
      if (train_cli.stage == 2 && train_cli.ckpt1_path.empty()) {
        std::cerr << "train: --stage 2 requires --ckpt1 (the trained stage-1 checkpoint whose "
                     "outputs feed stage 2)\n";
        return 2;
      }
      TrainConfig cfg;
      if (!train_cli.config_path.empty()) cfg = load_train_config(train_cli.config_path);
      if (f_lr->count()) cfg.learning_rate = defaults.learning_rate;
      if (f_mom->count()) cfg.momentum = defaults.momentum;
      if (f_batch->count()) cfg.batch_size = defaults.batch_size;
      if (f_iters->count()) cfg.max_iterations = defaults.max_iterations;
      if (f_loss->count()) cfg.loss = parse_loss(loss_name_flag);
      if (f_seed->count()) cfg.seed = defaults.seed;
      if (f_eval->count()) cfg.eval_interval = defaults.eval_interval;
      validate_config(cfg);
      return run_train(train_cli, cfg, threads);
    }

    if (*gen) {
      const Checkpoint ckpt1 = load_checkpoint(gen_ckpt1);
      std::optional<Checkpoint> ckpt2;
      if (!gen_ckpt2.empty()) ckpt2 = load_checkpoint(gen_ckpt2);
      const Image source = read_image(gen_input);
      std::vector<Image> tiles{quantize_raw(source)};
      if (gen_attr >= 0) {
        tiles.push_back(generate_image(ckpt1, ckpt2 ? &*ckpt2 : nullptr, source, gen_attr));
      } else {
        for (int a = 0; a < ckpt1.spec.attribute_count; ++a)
          tiles.push_back(generate_image(ckpt1, ckpt2 ? &*ckpt2 : nullptr, source, a));
      }
      write_montage(gen_out, tiles, static_cast<int>(tiles.size()));
      std::cout << "wrote " << gen_out << "\n";
      return 0;
    }

    if (*complete) {
      const Checkpoint ckpt1 = load_checkpoint(comp_ckpt1);
      std::optional<Checkpoint> ckpt2;
      if (!comp_ckpt2.empty()) ckpt2 = load_checkpoint(comp_ckpt2);
      const Image source = read_image(comp_input);
      const Image occluded = comp_no_occlude ? source : apply_eye_occlusion(source);
      const Image restored =
          generate_image(ckpt1, ckpt2 ? &*ckpt2 : nullptr, occluded, comp_attr);
      write_montage(comp_out, {quantize_raw(occluded), restored, quantize_raw(source)}, 3);
      std::cout << "wrote " << comp_out << " (occluded | completed | original)\n";
      return 0;
    }

    if (*eval_gen) {
      const Checkpoint ckpt1 = load_checkpoint(eg_ckpt1);
      std::optional<Checkpoint> ckpt2;
      if (!eg_ckpt2.empty()) ckpt2 = load_checkpoint(eg_ckpt2);
      const Dataset data = load_prepared(eg_manifest, ckpt1.spec.attribute_count,
                                         Task::Generation, &ckpt1.stats);
      const std::vector<SamplePair>& pairs =
          data.eval_pairs.empty() ? data.train_pairs : data.eval_pairs;
      std::vector<MetricRow> rows;
      const double e1 = generation_error(data, pairs, ckpt1, nullptr, threads);
      rows.push_back({"gen_error_stage1", "", "", e1});
      std::cout << "stage-1 mean per-pixel error: " << e1 << "\n";
      if (ckpt2) {
        const double e2 = generation_error(data, pairs, ckpt1, &*ckpt2, threads);
        rows.push_back({"gen_error_stage2", "", "", e2});
        std::cout << "stage-2 mean per-pixel error: " << e2 << "\n";
      }
      if (!eg_out.empty()) write_metrics_csv(eg_out, rows);
      return 0;
    }

    if (*eval_ret) {
      const Checkpoint ckpt1 = load_checkpoint(er_ckpt1);
      std::optional<Checkpoint> ckpt2;
      if (!er_ckpt2.empty()) ckpt2 = load_checkpoint(er_ckpt2);
      const FeatureKind feature = parse_feature(er_feature);
      if (feature == FeatureKind::Stage2Mid && !ckpt2)
        throw std::runtime_error("eval-retrieval: --feature stage2-mid requires --ckpt2");
      const Dataset data = load_prepared(er_manifest, ckpt1.spec.attribute_count,
                                         Task::Generation, &ckpt1.stats);

      std::vector<int> gallery_entries;
      for (std::size_t i = 0; i < data.entries.size(); ++i)
        if (data.entries[i].split == Split::Test)
          gallery_entries.push_back(static_cast<int>(i));
      if (gallery_entries.empty())
        throw std::runtime_error("eval-retrieval: manifest has no test split");

      std::vector<RetrievalQuery> queries;
      for (const SamplePair& p : data.eval_pairs)
        queries.push_back({p.source, data.entries[static_cast<std::size_t>(p.target)]
                                         .attribute_id});
      std::shuffle(queries.begin(), queries.end(), make_rng(derive_seed(er_seed, 0xE)));
      if (static_cast<int>(queries.size()) > er_queries) queries.resize(er_queries);
      if (queries.empty()) throw std::runtime_error("eval-retrieval: no queries available");

      std::cerr << "aligning gallery of " << gallery_entries.size() << " images\n";
      const AlignedGallery aligned =
          align_gallery(data, gallery_entries, ckpt1, ckpt2 ? &*ckpt2 : nullptr, threads);
      const FeatureGallery gal = gallery_features(aligned, feature);

      std::cerr << "running " << queries.size() << " queries\n";
      std::vector<RetrievalResult> ours;
      for (const RetrievalQuery& q : queries)
        ours.push_back(
            retrieve(data, q, gal, ckpt1, ckpt2 ? &*ckpt2 : nullptr, feature, er_k));

      std::vector<MetricRow> rows;
      for (int crit : {1, 2}) {
        const double r = recall_at_k(ours, er_k, crit);
        rows.push_back({"recall_ours", std::to_string(crit), std::to_string(er_k), r});
        std::cout << "ours (" << er_feature << ") criterion-" << crit << " recall@" << er_k
                  << ": " << r << "\n";
      }
      rows.push_back({"align_self_attr_rate", "", "", aligned.self_attr_rate});

      if (!er_no_two_step) {
        TrainConfig ccfg;
        ccfg.learning_rate = 1e-3;
        ccfg.max_iterations = er_cls_iters;
        ccfg.seed = derive_seed(er_seed, 0xC);
        ccfg.eval_interval = er_cls_iters;
        const Checkpoint classifier = train_classifier(data, ccfg, threads).checkpoint;
        std::vector<int> test_entries = gallery_entries;
        const double acc = classifier_accuracy(classifier, data, test_entries);
        rows.push_back({"classifier_accuracy", "", "", acc});
        std::cout << "baseline classifier accuracy: " << acc << "\n";
        const TwoStepContext ctx = build_two_step_context(data, gallery_entries, classifier);
        std::vector<RetrievalResult> two_step;
        for (const RetrievalQuery& q : queries)
          two_step.push_back(two_step_baseline(data, q, ctx, er_k));
        for (int crit : {1, 2}) {
          const double r = recall_at_k(two_step, er_k, crit);
          rows.push_back({"recall_two_step", std::to_string(crit), std::to_string(er_k), r});
          std::cout << "2-step (pixels) criterion-" << crit << " recall@" << er_k << ": " << r
                    << "\n";
        }
      }

      if (!er_out.empty()) write_metrics_csv(er_out, rows);
      if (!er_bins_out.empty()) {
        if (er_k < 5)
          std::cerr << "pose bins use recall@5; rerun with --k >= 5 for exact bins\n";
        write_pose_bins_csv(er_bins_out, pose_change_bins(queries, ours, data, er_criterion));
      }
      if (!er_montage.empty()) {
        std::vector<Image> tiles;
        const int show = std::min<int>(8, static_cast<int>(queries.size()));
        const int top = std::min(5, er_k);
        for (int i = 0; i < show; ++i) {
          const RetrievalQuery& q = queries[static_cast<std::size_t>(i)];
          tiles.push_back(
              quantize_raw(data.raw[static_cast<std::size_t>(q.entry)]));
          tiles.push_back(generate_image(ckpt1, ckpt2 ? &*ckpt2 : nullptr,
                                         data.raw[static_cast<std::size_t>(q.entry)],
                                         q.target_attr));
          const RetrievalResult& r = ours[static_cast<std::size_t>(i)];
          for (int j = 0; j < top; ++j)
            tiles.push_back(quantize_raw(
                aligned.images[static_cast<std::size_t>(r.ranking[static_cast<std::size_t>(j)])]));
        }
        write_montage(er_montage, tiles, 2 + top);
      }
      return 0;
    }

    if (*dump) {
      const Checkpoint ckpt1 = load_checkpoint(dm_ckpt1);
      const std::vector<std::string> paths = dump_attribute_maps(ckpt1, dm_out);
      std::cout << "wrote " << paths.size() << " maps to " << dm_out << "\n";
      return 0;
    }

    if (*gc) {
      const std::vector<GradCheckReport> reports = run_gradient_suite(gc_trials, gc_seed);
      bool ok = true;
      for (const GradCheckReport& r : reports) {
        std::printf("%-18s max rel err %.3e  (%lld coords, %d trials)\n", r.name.c_str(),
                    r.max_rel_err, static_cast<long long>(r.coords), r.trials);
        ok &= r.max_rel_err < 1e-4;
      }
      std::printf("gradient suite: %s\n", ok ? "PASS" : "FAIL");
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
