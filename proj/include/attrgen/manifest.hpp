#pragma once

#include <string>
#include <vector>

#include "attrgen/image.hpp"
#include "attrgen/tensor.hpp"

namespace attrgen {

enum class Split : std::uint8_t { Train, Test };

struct AttributeVocab {
  std::string name;  // poses-7 | accessories-7
  int size = 7;
};

AttributeVocab parse_vocab(const std::string& name);

struct ManifestEntry {
  std::string path;
  int identity = 0;
  int attribute_id = 0;
  int illumination_id = -1;  // -1 when the column is empty (accessory task)
  Split split = Split::Train;
};

inline constexpr const char* kManifestHeader = "path,identity,attribute_id,illumination_id,split";

/// CSV manifest with the exact header above. Malformed rows are rejected with
/// their line number; duplicate paths and out-of-range attributes rejected.
std::vector<ManifestEntry> load_manifest(const std::string& path, int vocab_size = 7);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

/// Ordered training pair: indices into the manifest entry list. Source and
/// target share identity and illumination and differ in attribute.
struct SamplePair {
  int source = 0;
  int target = 0;
};

/// Every ordered pair of distinct attribute values within each
/// (identity, illumination) group, sorted by (identity, illumination,
/// source attribute, target attribute). Groups with one attribute yield
/// nothing. When a group holds duplicate attribute values, the earliest
/// manifest row represents that value.
std::vector<SamplePair> build_pairs(const std::vector<ManifestEntry>& entries);

template <typename S>
Tensor<S> one_hot(int attribute_id, int vocab_size) {
  if (vocab_size < 1) throw std::invalid_argument("one_hot: vocab_size must be positive");
  if (attribute_id < 0 || attribute_id >= vocab_size)
    throw std::invalid_argument("one_hot: attribute_id " + std::to_string(attribute_id) +
                                " outside vocabulary of size " + std::to_string(vocab_size));
  Tensor<S> v(Shape{vocab_size});
  v[attribute_id] = S(1);
  return v;
}

/// Loads every entry's image, resolving relative paths against `root`.
std::vector<Image> load_images(const std::vector<ManifestEntry>& entries,
                               const std::string& root);

/// Directory part of a manifest path, for resolving relative image paths.
std::string parent_dir(const std::string& path);

}  // namespace attrgen
