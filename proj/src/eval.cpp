#include "attrgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "attrgen/normalize.hpp"

namespace attrgen {

FeatureKind parse_feature(const std::string& s) {
  if (s == "pixels") return FeatureKind::Pixels;
  if (s == "stage2-mid") return FeatureKind::Stage2Mid;
  throw std::invalid_argument("unknown feature '" + s + "' (expected pixels or stage2-mid)");
}

namespace {

void check_compatible(const Dataset& data, const Checkpoint& stage1) {
  if (stage1.spec.id != NetworkId::Stage1)
    throw std::invalid_argument("evaluation: checkpoint is not a stage-1 network");
  if (stage1.spec.attribute_count != data.vocab_size)
    throw std::invalid_argument("evaluation: checkpoint vocabulary size " +
                                std::to_string(stage1.spec.attribute_count) +
                                " does not match dataset vocabulary " +
                                std::to_string(data.vocab_size));
  if (stage1.spec.input_size != data.input_size)
    throw std::invalid_argument("evaluation: checkpoint input size mismatch");
  if (stage1.stats.mean != data.stats.mean || stage1.stats.std != data.stats.std)
    throw std::invalid_argument(
        "evaluation: dataset was not normalized with the checkpoint statistics");
}

// Normalized-space generation for one (source, target attribute) pair.
Tensor<float> generate_normalized(const Network<float>& f1, const Network<float>* f2,
                                  const Tensor<float>& source, const Tensor<float>& attr) {
  Tensor<float> out = forward(f1, source, attr);
  if (f2) out = forward(*f2, source, out);
  return out;
}

double raw_sq_error(const Tensor<float>& pred_norm, const Image& target_raw,
                    const NormStats& stats) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred_norm.size(); ++i) {
    const double raw = static_cast<double>(pred_norm[i]) * stats.std + stats.mean;
    const double d = raw - static_cast<double>(target_raw.pix[static_cast<std::size_t>(i)]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred_norm.size());
}

}  // namespace

double generation_error(const Dataset& data, const std::vector<SamplePair>& pairs,
                        const Checkpoint& stage1, const Checkpoint* stage2, int threads) {
  check_compatible(data, stage1);
  if (pairs.empty()) throw std::invalid_argument("generation_error: no pairs");
  const Network<float> f1 = network_from_checkpoint(stage1);
  Network<float> f2_store;
  const Network<float>* f2 = nullptr;
  if (stage2) {
    f2_store = network_from_checkpoint(*stage2);
    f2 = &f2_store;
  }
  std::vector<Tensor<float>> onehots;
  for (int a = 0; a < data.vocab_size; ++a) onehots.push_back(one_hot<float>(a, data.vocab_size));

  const auto n = static_cast<std::int64_t>(pairs.size());
  std::vector<double> per_pair(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const SamplePair& p = pairs[static_cast<std::size_t>(i)];
    const auto dst = static_cast<std::size_t>(p.target);
    const Tensor<float> pred = generate_normalized(
        f1, f2, data.source[static_cast<std::size_t>(p.source)],
        onehots[static_cast<std::size_t>(data.entries[dst].attribute_id)]);
    per_pair[static_cast<std::size_t>(i)] = raw_sq_error(pred, data.raw[dst], data.stats);
  }
  return std::accumulate(per_pair.begin(), per_pair.end(), 0.0) / static_cast<double>(n);
}

AlignedGallery align_gallery(const Dataset& data, const std::vector<int>& gallery_entries,
                             const Checkpoint& stage1, const Checkpoint* stage2, int threads) {
  check_compatible(data, stage1);
  const Network<float> f1 = network_from_checkpoint(stage1);
  Network<float> f2_store;
  const Network<float>* f2 = nullptr;
  if (stage2) {
    f2_store = network_from_checkpoint(*stage2);
    f2 = &f2_store;
  }
  std::vector<Tensor<float>> onehots;
  for (int a = 0; a < data.vocab_size; ++a) onehots.push_back(one_hot<float>(a, data.vocab_size));

  AlignedGallery out;
  out.entries = gallery_entries;
  const auto n = static_cast<std::int64_t>(gallery_entries.size());
  out.images.resize(static_cast<std::size_t>(n));
  out.kept_attr.assign(static_cast<std::size_t>(n), 0);
  out.kept_distance.assign(static_cast<std::size_t>(n), 0.0);
  if (f2) out.mid.resize(static_cast<std::size_t>(n));

  std::int64_t self_kept = 0;
#pragma omp parallel for schedule(static) num_threads(threads) reduction(+ : self_kept)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto e = static_cast<std::size_t>(gallery_entries[static_cast<std::size_t>(i)]);
    const Tensor<float>& src = data.source[e];
    double best = 0.0;
    int best_attr = -1;
    Tensor<float> best_pred;
    for (int a = 0; a < data.vocab_size; ++a) {
      const Tensor<float> pred =
          generate_normalized(f1, f2, src, onehots[static_cast<std::size_t>(a)]);
      const double d = raw_sq_error(pred, data.raw[e], data.stats);
      if (best_attr < 0 || d < best) {
        best = d;
        best_attr = a;
        best_pred = pred;
      }
    }
    out.images[static_cast<std::size_t>(i)] = denormalize(
        image_from_tensor(best_pred, PixelSpace::Normalized), data.stats);
    out.kept_attr[static_cast<std::size_t>(i)] = best_attr;
    out.kept_distance[static_cast<std::size_t>(i)] = best;
    self_kept += best_attr == data.entries[e].attribute_id;
    if (f2) {
      const Tensor<float> coarse =
          forward(f1, src, onehots[static_cast<std::size_t>(best_attr)]);
      out.mid[static_cast<std::size_t>(i)] = mid_features(*f2, src, coarse);
    }
  }
  out.self_attr_rate = n == 0 ? 0.0 : static_cast<double>(self_kept) / static_cast<double>(n);
  return out;
}

Eigen::VectorXf l2_normalized(const Eigen::VectorXf& v) {
  const float norm = v.norm();
  return norm > 0.0f ? Eigen::VectorXf(v / norm) : v;
}

namespace {

Eigen::VectorXf image_feature(const Image& img) {
  Eigen::VectorXf v(img.size());
  for (std::int64_t i = 0; i < img.size(); ++i) v[i] = img.pix[static_cast<std::size_t>(i)];
  return l2_normalized(v);
}

Eigen::VectorXf tensor_feature(const Tensor<float>& t) {
  Eigen::VectorXf v(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) v[i] = t[i];
  return l2_normalized(v);
}

std::vector<int> rank_by_distance(const Eigen::VectorXf& query,
                                  const std::vector<Eigen::VectorXf>& features,
                                  const std::vector<int>& candidates, int k) {
  std::vector<std::pair<float, int>> scored;
  scored.reserve(candidates.size());
  for (int c : candidates)
    scored.emplace_back((features[static_cast<std::size_t>(c)] - query).norm(), c);
  std::sort(scored.begin(), scored.end());  // distance, then ascending index
  std::vector<int> ranking;
  ranking.reserve(static_cast<std::size_t>(std::min<std::size_t>(scored.size(),
                                                                 static_cast<std::size_t>(k))));
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i)
    ranking.push_back(scored[i].second);
  return ranking;
}

void fill_correctness(RetrievalResult& r, const Dataset& data, const RetrievalQuery& query,
                      const std::vector<int>& gallery_entries) {
  const ManifestEntry& q = data.entries[static_cast<std::size_t>(query.entry)];
  r.c1.resize(r.ranking.size());
  r.c2.resize(r.ranking.size());
  for (std::size_t i = 0; i < r.ranking.size(); ++i) {
    const ManifestEntry& g =
        data.entries[static_cast<std::size_t>(gallery_entries[static_cast<std::size_t>(
            r.ranking[i])])];
    const bool c1 = g.identity == q.identity && g.attribute_id == query.target_attr;
    r.c1[i] = c1;
    r.c2[i] = c1 && g.illumination_id == q.illumination_id;
  }
}

}  // namespace

FeatureGallery gallery_features(const AlignedGallery& aligned, FeatureKind kind) {
  FeatureGallery g;
  g.entries = aligned.entries;
  if (kind == FeatureKind::Pixels) {
    for (const Image& img : aligned.images) g.features.push_back(image_feature(img));
  } else {
    if (aligned.mid.empty())
      throw std::invalid_argument(
          "gallery_features: stage2-mid features require an aligned gallery built with a "
          "stage-2 checkpoint");
    for (const Tensor<float>& t : aligned.mid) g.features.push_back(tensor_feature(t));
  }
  return g;
}

RetrievalResult retrieve(const Dataset& data, const RetrievalQuery& query,
                         const FeatureGallery& gallery, const Checkpoint& stage1,
                         const Checkpoint* stage2, FeatureKind feature, int k) {
  check_compatible(data, stage1);
  if (k < 1) throw std::invalid_argument("retrieve: K must be at least 1");
  if (static_cast<std::size_t>(k) > gallery.entries.size())
    throw std::invalid_argument("retrieve: K = " + std::to_string(k) + " exceeds gallery size " +
                                std::to_string(gallery.entries.size()));
  if (query.target_attr < 0 || query.target_attr >= data.vocab_size)
    throw std::invalid_argument("retrieve: target attribute outside vocabulary");
  if (feature == FeatureKind::Stage2Mid && !stage2)
    throw std::invalid_argument("retrieve: stage2-mid features require a stage-2 checkpoint");

  const Network<float> f1 = network_from_checkpoint(stage1);
  Network<float> f2_store;
  const Network<float>* f2 = nullptr;
  if (stage2) {
    f2_store = network_from_checkpoint(*stage2);
    f2 = &f2_store;
  }
  const Tensor<float>& src = data.source[static_cast<std::size_t>(query.entry)];
  const Tensor<float> attr = one_hot<float>(query.target_attr, data.vocab_size);

  Eigen::VectorXf qf;
  if (feature == FeatureKind::Pixels) {
    const Tensor<float> pred = generate_normalized(f1, f2, src, attr);
    qf = image_feature(denormalize(image_from_tensor(pred, PixelSpace::Normalized), data.stats));
  } else {
    const Tensor<float> coarse = forward(f1, src, attr);
    qf = tensor_feature(mid_features(*f2, src, coarse));
  }

  std::vector<int> all(gallery.entries.size());
  std::iota(all.begin(), all.end(), 0);
  RetrievalResult r;
  r.ranking = rank_by_distance(qf, gallery.features, all, k);
  fill_correctness(r, data, query, gallery.entries);
  return r;
}

double recall_at_k(const std::vector<RetrievalResult>& results, int k, int criterion) {
  if (results.empty()) throw std::invalid_argument("recall_at_k: empty result list");
  if (k < 1) throw std::invalid_argument("recall_at_k: K must be at least 1");
  if (criterion != 1 && criterion != 2)
    throw std::invalid_argument("recall_at_k: criterion must be 1 or 2");
  int hit = 0;
  for (const RetrievalResult& r : results) {
    const std::vector<char>& c = criterion == 1 ? r.c1 : r.c2;
    bool any = false;
    for (std::size_t i = 0; i < c.size() && static_cast<int>(i) < k; ++i) any |= c[i] != 0;
    hit += any;
  }
  return static_cast<double>(hit) / static_cast<double>(results.size());
}

TwoStepContext build_two_step_context(const Dataset& data,
                                      const std::vector<int>& gallery_entries,
                                      const Checkpoint& classifier) {
  if (classifier.spec.id != NetworkId::AttrClassifier)
    throw std::invalid_argument("two_step: checkpoint is not an attribute classifier");
  if (classifier.spec.attribute_count != data.vocab_size)
    throw std::invalid_argument("two_step: classifier vocabulary mismatch");
  const Network<float> net = network_from_checkpoint(classifier);
  TwoStepContext ctx;
  ctx.entries = gallery_entries;
  for (int e : gallery_entries) {
    const auto i = static_cast<std::size_t>(e);
    ctx.predicted.push_back(classify_attribute(net, data.target[i]));
    ctx.features.push_back(image_feature(data.raw[i]));
  }
  return ctx;
}

RetrievalResult two_step_baseline(const Dataset& data, const RetrievalQuery& query,
                                  const TwoStepContext& ctx, int k) {
  if (k < 1) throw std::invalid_argument("two_step_baseline: K must be at least 1");
  if (ctx.predicted.size() != ctx.entries.size() || ctx.features.size() != ctx.entries.size())
    throw std::invalid_argument("two_step_baseline: context fields differ in length");
  const auto dim = static_cast<Eigen::Index>(data.input_size) * data.input_size;
  for (const Eigen::VectorXf& f : ctx.features)
    if (f.size() != dim)
      throw std::invalid_argument("two_step_baseline: feature length " +
                                  std::to_string(f.size()) + " != pixel count " +
                                  std::to_string(dim));
  std::vector<int> candidates;
  for (std::size_t i = 0; i < ctx.entries.size(); ++i)
    if (ctx.predicted[i] == query.target_attr) candidates.push_back(static_cast<int>(i));

  RetrievalResult r;
  if (!candidates.empty()) {
    const Eigen::VectorXf qf =
        image_feature(data.raw[static_cast<std::size_t>(query.entry)]);
    r.ranking = rank_by_distance(qf, ctx.features, candidates, k);
  }
  fill_correctness(r, data, query, ctx.entries);
  return r;
}

std::vector<PoseBin> pose_change_bins(const std::vector<RetrievalQuery>& queries,
                                      const std::vector<RetrievalResult>& results,
                                      const Dataset& data, int criterion) {
  if (queries.size() != results.size())
    throw std::invalid_argument("pose_change_bins: query/result count mismatch");
  std::map<int, std::vector<RetrievalResult>> grouped;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const int src_attr =
        data.entries[static_cast<std::size_t>(queries[i].entry)].attribute_id;
    const int delta = std::abs(queries[i].target_attr - src_attr);
    if (delta == 0) continue;
    grouped[delta].push_back(results[i]);
  }
  std::vector<PoseBin> bins;
  for (const auto& [delta, rs] : grouped) {
    PoseBin b;
    b.delta = delta;
    b.count = static_cast<int>(rs.size());
    b.recall_at_5 = recall_at_k(rs, 5, criterion);
    bins.push_back(b);
  }
  return bins;
}

std::vector<std::string> dump_attribute_maps(const Checkpoint& stage1,
                                             const std::string& out_dir) {
  if (stage1.spec.id != NetworkId::Stage1)
    throw std::invalid_argument("dump_attribute_maps: checkpoint is not a stage-1 network");
  std::filesystem::create_directories(out_dir);
  const Network<float> net = network_from_checkpoint(stage1);
  std::vector<std::string> paths;
  for (int a = 0; a < stage1.spec.attribute_count; ++a) {
    const Tensor<float> maps =
        encode_attribute(one_hot<float>(a, stage1.spec.attribute_count), net);
    const int h = maps.shape().height(), w = maps.shape().width();
    for (int m = 0; m < maps.shape().channels(); ++m) {
      float lo = maps(0, 0, m), hi = maps(0, 0, m);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          lo = std::min(lo, maps(y, x, m));
          hi = std::max(hi, maps(y, x, m));
        }
      Image img(h, w, PixelSpace::Raw);
      const float span = hi - lo;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.at(y, x) = span > 0.0f ? (maps(y, x, m) - lo) / span * 255.0f : 0.0f;
      char name[64];
      std::snprintf(name, sizeof(name), "attr%d_map%02d.pgm", a, m);
      const std::string path = (std::filesystem::path(out_dir) / name).string();
      write_image(path, quantize_raw(img));
      paths.push_back(path);
    }
  }
  return paths;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "metric,criterion,K,value\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.8g", r.value);
    out << r.metric << ',' << r.criterion << ',' << r.k << ',' << buf << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_pose_bins_csv(const std::string& path, const std::vector<PoseBin>& bins) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "delta,recall_at_5,count\n";
  char buf[64];
  for (const PoseBin& b : bins) {
    std::snprintf(buf, sizeof(buf), "%.8g", b.recall_at_5);
    out << b.delta << ',' << buf << ',' << b.count << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace attrgen
