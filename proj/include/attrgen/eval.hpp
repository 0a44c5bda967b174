#pragma once

#include "attrgen/train.hpp"

namespace attrgen {

enum class FeatureKind : std::uint8_t { Pixels, Stage2Mid };

FeatureKind parse_feature(const std::string& s);

/// Mean per-pixel squared error in raw 0-255 space over the given pairs:
/// generate from each pair's source with the target attribute (stage 1, then
/// optionally refined by stage 2), denormalize, compare against the raw
/// target. The dataset must be normalized with the stage-1 statistics.
double generation_error(const Dataset& data, const std::vector<SamplePair>& pairs,
                        const Checkpoint& stage1, const Checkpoint* stage2 = nullptr,
                        int threads = 1);

struct RetrievalQuery {
  int entry = 0;        // manifest entry of the query image
  int target_attr = 0;  // desired attribute (C_Y)
};

struct RetrievalResult {
  std::vector<int> ranking;  // gallery item positions, best first
  std::vector<char> c1;      // correct under identity + attribute
  std::vector<char> c2;      // correct under identity + attribute + illumination
};

/// Gallery replaced by each image's closest self-generation over the full
/// vocabulary (raw-pixel Euclidean argmin), plus the features of the kept
/// generation when a stage-2 checkpoint supplies them.
struct AlignedGallery {
  std::vector<int> entries;            // manifest entry per gallery item
  std::vector<Image> images;           // aligned raw images (unquantized)
  std::vector<int> kept_attr;
  std::vector<Tensor<float>> mid;      // stage-2 mid features, empty without stage 2
  std::vector<double> kept_distance;   // raw-pixel distance of the kept candidate
  double self_attr_rate = 0.0;         // diagnostic: kept attr == own attr
};

AlignedGallery align_gallery(const Dataset& data, const std::vector<int>& gallery_entries,
                             const Checkpoint& stage1, const Checkpoint* stage2 = nullptr,
                             int threads = 1);

/// L2-normalized feature vectors for ranking; zero vectors pass through.
struct FeatureGallery {
  std::vector<int> entries;
  std::vector<Eigen::VectorXf> features;
};

FeatureGallery gallery_features(const AlignedGallery& aligned, FeatureKind kind);

Eigen::VectorXf l2_normalized(const Eigen::VectorXf& v);

/// Generation-based retrieval: modify the query toward the target attribute,
/// extract features (raw pixels or the stage-2 pre-unpool activation), rank
/// the gallery by Euclidean distance, ties broken by ascending index.
RetrievalResult retrieve(const Dataset& data, const RetrievalQuery& query,
                         const FeatureGallery& gallery, const Checkpoint& stage1,
                         const Checkpoint* stage2, FeatureKind feature, int k);

/// Fraction of queries with at least one correct item among their top K.
double recall_at_k(const std::vector<RetrievalResult>& results, int k, int criterion);

/// Gallery-side state of the two-step baseline: per-item predicted attribute
/// from the classifier, plus L2-normalized raw-pixel features.
struct TwoStepContext {
  std::vector<int> entries;
  std::vector<int> predicted;
  std::vector<Eigen::VectorXf> features;
};

TwoStepContext build_two_step_context(const Dataset& data,
                                      const std::vector<int>& gallery_entries,
                                      const Checkpoint& classifier);

/// Filters the gallery to items the classifier labels with the target
/// attribute, then ranks them by pixel distance to the unmodified query. An
/// empty filtered set yields a result with zero ranked items.
RetrievalResult two_step_baseline(const Dataset& data, const RetrievalQuery& query,
                                  const TwoStepContext& ctx, int k);

struct PoseBin {
  int delta = 0;  // |target attr - source attr|, 1..6
  double recall_at_5 = 0.0;
  int count = 0;
};

/// Recall@5 per pose-change magnitude; empty groups are absent from the list.
std::vector<PoseBin> pose_change_bins(const std::vector<RetrievalQuery>& queries,
                                      const std::vector<RetrievalResult>& results,
                                      const Dataset& data, int criterion = 1);

/// One min-max scaled PGM per (attribute, map channel); returns the paths.
std::vector<std::string> dump_attribute_maps(const Checkpoint& stage1,
                                             const std::string& out_dir);

struct MetricRow {
  std::string metric;
  std::string criterion;  // empty when not applicable
  std::string k;          // empty when not applicable
  double value = 0.0;
};

/// CSV "metric,criterion,K,value".
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

/// CSV "delta,recall_at_5,count".
void write_pose_bins_csv(const std::string& path, const std::vector<PoseBin>& bins);

}  // namespace attrgen
