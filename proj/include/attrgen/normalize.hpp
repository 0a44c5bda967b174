#pragma once

#include <cmath>

#include "attrgen/image.hpp"

namespace attrgen {

/// Dataset-global pixel statistics in raw units.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

inline constexpr double kMinStd = 1e-6;

/// Population mean/std over every pixel of the collection; std clamped away
/// from zero so constant data stays usable.
inline NormStats compute_norm_stats(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("compute_norm_stats: empty image collection");
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
  for (const Image& img : images) {
    require_space(img, PixelSpace::Raw, "compute_norm_stats");
    for (float v : img.pix) {
      sum += v;
      sum_sq += static_cast<double>(v) * v;
    }
    n += img.size();
  }
  NormStats s;
  s.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - s.mean * s.mean);
  s.std = std::max(kMinStd, std::sqrt(var));
  return s;
}

inline Image normalize(const Image& img, const NormStats& stats) {
  require_space(img, PixelSpace::Raw, "normalize");
  Image out(img.height, img.width, PixelSpace::Normalized);
  for (std::size_t i = 0; i < img.pix.size(); ++i)
    out.pix[i] = static_cast<float>((static_cast<double>(img.pix[i]) - stats.mean) / stats.std);
  return out;
}

inline Image denormalize(const Image& img, const NormStats& stats) {
  require_space(img, PixelSpace::Normalized, "denormalize");
  Image out(img.height, img.width, PixelSpace::Raw);
  for (std::size_t i = 0; i < img.pix.size(); ++i)
    out.pix[i] = static_cast<float>(static_cast<double>(img.pix[i]) * stats.std + stats.mean);
  return out;
}

}  // namespace attrgen
