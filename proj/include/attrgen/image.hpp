#pragma once

#include <string>
#include <vector>

#include "attrgen/tensor.hpp"

namespace attrgen {

enum class PixelSpace : std::uint8_t { Raw, Normalized };

inline constexpr int kImageSize = 32;

/// Grayscale image. Raw space holds 8-bit gray values (still stored as float,
/// integral in [0, 255]); normalized space holds standardized reals. The tag
/// guards against mixing the two in arithmetic.
struct Image {
  int height = 0;
  int width = 0;
  PixelSpace space = PixelSpace::Raw;
  std::vector<float> pix;  // row-major, y * width + x

  Image() = default;
  Image(int h, int w, PixelSpace s = PixelSpace::Raw)
      : height(h), width(w), space(s), pix(static_cast<std::size_t>(h) * w, 0.0f) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("Image: extents must be positive");
  }

  float& at(int y, int x) { return pix[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return pix[static_cast<std::size_t>(y) * width + x]; }
  std::int64_t size() const { return static_cast<std::int64_t>(height) * width; }
};

inline void require_space(const Image& img, PixelSpace want, const char* where) {
  if (img.space != want)
    throw std::invalid_argument(std::string(where) + ": expected " +
                                (want == PixelSpace::Raw ? "raw" : "normalized") +
                                "-space image, got " +
                                (img.space == PixelSpace::Raw ? "raw" : "normalized"));
}

inline void require_same_extents(const Image& a, const Image& b, const char* where) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument(std::string(where) + ": image extents " +
                                std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

template <typename S>
Tensor<S> to_tensor(const Image& img) {
  Tensor<S> t(Shape{img.height, img.width, 1});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(img.pix[i]);
  return t;
}

template <typename S>
Image image_from_tensor(const Tensor<S>& t, PixelSpace space) {
  if (t.shape().channels() != 1 || t.shape().batch() != 1)
    throw std::invalid_argument("image_from_tensor: expected single-channel tensor, got " +
                                t.shape().str());
  Image img(t.shape().height(), t.shape().width(), space);
  for (std::int64_t i = 0; i < t.size(); ++i) img.pix[i] = static_cast<float>(t[i]);
  return img;
}

/// Clamps to [0, 255] and rounds half away from zero; stays in raw space.
Image quantize_raw(const Image& img);

/// Binary 8-bit PGM (P5, maxval 255). Reading enforces 32x32 for training
/// I/O; read_pgm accepts any size.
Image read_image(const std::string& path);
Image read_pgm(const std::string& path);
void write_image(const std::string& path, const Image& img);

/// Grid of equally sized raw images, written as one PGM with 1px separators.
void write_montage(const std::string& path, const std::vector<Image>& tiles, int columns);

inline constexpr int kEyeBarTop = 10;
inline constexpr int kEyeBarHeight = 6;

/// Zeroes rows [bar_top, bar_top + bar_height); idempotent.
Image apply_eye_occlusion(const Image& img, int bar_top = kEyeBarTop,
                          int bar_height = kEyeBarHeight);

}  // namespace attrgen
