#pragma once

#include <string>

#include "attrgen/models.hpp"
#include "attrgen/normalize.hpp"
#include "attrgen/optimizer.hpp"

namespace attrgen {

/// Everything needed to resume or reuse a trained network: parameters,
/// optimizer velocity, normalization statistics, and seed provenance.
struct Checkpoint {
  NetworkSpec spec;
  std::vector<LayerParams<float>> params;
  std::vector<LayerParams<float>> velocity;
  NormStats stats;
  std::uint64_t seed = 0;
  std::uint64_t iterations = 0;
};

Checkpoint make_checkpoint(const Network<float>& net, const std::vector<LayerParams<float>>& vel,
                           const NormStats& stats, std::uint64_t seed, std::uint64_t iterations);

Network<float> network_from_checkpoint(const Checkpoint& ckpt);

/// Binary format: magic "ATNC", version, network id, architecture meta, seed,
/// iteration count, per-layer tensors (params then velocity), normalization
/// stats, crc32 of the payload. Little-endian throughout.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace attrgen
