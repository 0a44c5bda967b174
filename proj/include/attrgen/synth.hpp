#pragma once

#include "attrgen/manifest.hpp"

namespace attrgen {

struct SynthSpec {
  int identities = 40;        // train-split identities
  int test_identities = 0;    // extra held-out identities appended after the train ones
  int illuminations = 4;
  AttributeVocab vocab{"poses-7", 7};
  std::uint64_t seed = 7;
  std::string out_dir;
};

/// Renders one procedural face. Pure function of its arguments: identity
/// drives the geometry, the attribute drives pose shift or accessory overlay,
/// illumination drives a left-right brightness gradient.
Image render_face(std::uint64_t seed, int identity, int attribute_id, int illumination_id,
                  int n_illuminations, const AttributeVocab& vocab);

struct SynthResult {
  std::vector<ManifestEntry> entries;
  std::string manifest_path;
};

/// Writes identities x illuminations x vocab.size PGM images plus a manifest
/// into out_dir. Byte-identical for identical arguments.
SynthResult synth_generate(const SynthSpec& spec);

}  // namespace attrgen
