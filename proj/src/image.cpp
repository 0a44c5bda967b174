#include "attrgen/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace attrgen {

Image quantize_raw(const Image& img) {
  require_space(img, PixelSpace::Raw, "quantize_raw");
  Image out = img;
  for (float& v : out.pix) v = std::min(255.0f, std::max(0.0f, std::round(v)));
  return out;
}

namespace {

// Next whitespace-delimited token, skipping '#' comments per the PGM grammar.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(c));
  if (c == '#') in.unget();
  return tok;
}

int parse_extent(const std::string& tok, const std::string& path, const char* what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw std::runtime_error(path + ": bad PGM " + what + " '" + tok + "'");
  long v = std::stol(tok);
  if (v <= 0 || v > 1 << 16) throw std::runtime_error(path + ": PGM " + what + " out of range");
  return static_cast<int>(v);
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  if (next_token(in) != "P5") throw std::runtime_error(path + ": not a binary PGM (magic != P5)");
  const int w = parse_extent(next_token(in), path, "width");
  const int h = parse_extent(next_token(in), path, "height");
  const int maxval = parse_extent(next_token(in), path, "maxval");
  if (maxval != 255) throw std::runtime_error(path + ": unsupported maxval " +
                                              std::to_string(maxval) + " (need 255)");
  // The single whitespace byte after maxval was already consumed by next_token.
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path + ": truncated payload (" + std::to_string(in.gcount()) +
                             " of " + std::to_string(buf.size()) + " bytes)");
  Image img(h, w, PixelSpace::Raw);
  for (std::size_t i = 0; i < buf.size(); ++i) img.pix[i] = static_cast<float>(buf[i]);
  return img;
}

Image read_image(const std::string& path) {
  Image img = read_pgm(path);
  if (img.width != kImageSize || img.height != kImageSize)
    throw std::runtime_error(path + ": expected " + std::to_string(kImageSize) + "x" +
                             std::to_string(kImageSize) + " image, got " +
                             std::to_string(img.width) + "x" + std::to_string(img.height));
  return img;
}

void write_image(const std::string& path, const Image& img) {
  require_space(img, PixelSpace::Raw, "write_image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(img.size()));
  for (std::int64_t i = 0; i < img.size(); ++i) {
    const float v = std::round(img.pix[static_cast<std::size_t>(i)]);
    if (v < 0.0f || v > 255.0f)
      throw std::invalid_argument(path + ": raw pixel " + std::to_string(v) +
                                  " outside [0,255]; quantize first");
    buf[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_montage(const std::string& path, const std::vector<Image>& tiles, int columns) {
  if (tiles.empty()) throw std::invalid_argument("write_montage: no tiles");
  if (columns < 1) throw std::invalid_argument("write_montage: columns must be positive");
  const int th = tiles[0].height, tw = tiles[0].width;
  for (const Image& t : tiles) {
    require_space(t, PixelSpace::Raw, "write_montage");
    if (t.height != th || t.width != tw)
      throw std::invalid_argument("write_montage: tiles differ in size");
  }
  const int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
  Image canvas(rows * (th + 1) - 1, columns * (tw + 1) - 1, PixelSpace::Raw);
  for (float& v : canvas.pix) v = 255.0f;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int r = static_cast<int>(i) / columns, c = static_cast<int>(i) % columns;
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x)
        canvas.at(r * (th + 1) + y, c * (tw + 1) + x) = tiles[i].at(y, x);
  }
  write_image(path, quantize_raw(canvas));
}

Image apply_eye_occlusion(const Image& img, int bar_top, int bar_height) {
  require_space(img, PixelSpace::Raw, "apply_eye_occlusion");
  if (bar_top < 0 || bar_height < 1 || bar_top + bar_height > img.height)
    throw std::invalid_argument("apply_eye_occlusion: bar rows [" + std::to_string(bar_top) +
                                ", " + std::to_string(bar_top + bar_height) +
                                ") outside image of height " + std::to_string(img.height));
  Image out = img;
  for (int y = bar_top; y < bar_top + bar_height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = 0.0f;
  return out;
}

}  // namespace attrgen
