#include "attrgen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "attrgen/rng.hpp"

namespace attrgen {

namespace {

struct FaceGeometry {
  float skin, bg, feature_gray;
  float cx, cy;          // face center
  float rx, ry;          // face half-extents
  float eye_dx, eye_y, eye_r;
  float mouth_y, mouth_hw, mouth_ht;
  float nose_len;
  float brow_y;
};

FaceGeometry sample_geometry(std::uint64_t seed, int identity) {
  std::mt19937 rng = make_rng(derive_seed(seed, 0x1D, static_cast<std::uint64_t>(identity)));
  auto uni = [&](float lo, float hi) {
    return lo + (hi - lo) * static_cast<float>(std::generate_canonical<double, 32>(rng));
  };
  FaceGeometry g;
  g.skin = uni(150.0f, 225.0f);
  g.bg = uni(25.0f, 85.0f);
  g.feature_gray = uni(10.0f, 45.0f);
  g.cx = 15.5f + uni(-0.8f, 0.8f);
  g.cy = 15.5f + uni(-0.8f, 0.8f);
  g.rx = uni(8.5f, 11.5f);
  g.ry = uni(10.5f, 13.5f);
  g.eye_dx = uni(3.2f, 5.2f);
  g.eye_y = uni(-4.5f, -2.5f);
  g.eye_r = uni(1.1f, 1.9f);
  g.mouth_y = uni(4.5f, 6.8f);
  g.mouth_hw = uni(2.4f, 4.4f);
  g.mouth_ht = uni(0.7f, 1.4f);
  g.nose_len = uni(2.0f, 4.0f);
  g.brow_y = g.eye_y - uni(2.2f, 3.2f);
  return g;
}

float smooth_in(float signed_dist) {  // 1 inside, 0 outside, ~1px soft edge
  return std::clamp(0.5f - signed_dist, 0.0f, 1.0f);
}

void paint(Image& img, int y, int x, float cover, float gray) {
  float& p = img.at(y, x);
  p = p + cover * (gray - p);
}

void draw_ellipse(Image& img, float cx, float cy, float rx, float ry, float gray) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float dx = (static_cast<float>(x) - cx) / rx;
      const float dy = (static_cast<float>(y) - cy) / ry;
      const float d = std::sqrt(dx * dx + dy * dy);
      paint(img, y, x, smooth_in((d - 1.0f) * std::min(rx, ry)), gray);
    }
}

void draw_disk(Image& img, float cx, float cy, float r, float gray) {
  draw_ellipse(img, cx, cy, r, r, gray);
}

void draw_ring(Image& img, float cx, float cy, float r, float thickness, float gray) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float dx = static_cast<float>(x) - cx;
      const float dy = static_cast<float>(y) - cy;
      const float d = std::abs(std::sqrt(dx * dx + dy * dy) - r) - thickness * 0.5f;
      paint(img, y, x, smooth_in(d), gray);
    }
}

void draw_box(Image& img, float x0, float y0, float x1, float y1, float gray) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float ddx = std::max({x0 - static_cast<float>(x), static_cast<float>(x) - x1, 0.0f});
      const float ddy = std::max({y0 - static_cast<float>(y), static_cast<float>(y) - y1, 0.0f});
      paint(img, y, x, smooth_in(std::sqrt(ddx * ddx + ddy * ddy) - 0.5f), gray);
    }
}

void draw_pose_face(Image& img, const FaceGeometry& g, int pose_index) {
  const float t = static_cast<float>(pose_index - 3);  // -3 .. +3
  const float face_dx = 0.6f * t;
  const float feat_dx = 1.5f * t;
  const float squeeze = 1.0f - 0.07f * std::abs(t);
  const float cx = g.cx + face_dx;

  draw_ellipse(img, cx, g.cy, g.rx * squeeze, g.ry, g.skin);

  // Eyes drift with the pose; the trailing eye narrows as the face turns.
  const float lead = 1.0f + 0.10f * t, trail = 1.0f - 0.10f * t;
  draw_ellipse(img, cx + feat_dx - g.eye_dx * squeeze, g.cy + g.eye_y, g.eye_r * trail, g.eye_r,
               g.feature_gray);
  draw_ellipse(img, cx + feat_dx + g.eye_dx * squeeze, g.cy + g.eye_y, g.eye_r * lead, g.eye_r,
               g.feature_gray);

  // Brows
  draw_box(img, cx + feat_dx - g.eye_dx * squeeze - g.eye_r, g.cy + g.brow_y,
           cx + feat_dx - g.eye_dx * squeeze + g.eye_r, g.cy + g.brow_y + 0.6f, g.feature_gray);
  draw_box(img, cx + feat_dx + g.eye_dx * squeeze - g.eye_r, g.cy + g.brow_y,
           cx + feat_dx + g.eye_dx * squeeze + g.eye_r, g.cy + g.brow_y + 0.6f, g.feature_gray);

  // Nose: shifts more than the eyes, the strongest pose cue.
  const float nose_x = cx + 2.1f * t;
  draw_box(img, nose_x - 0.5f, g.cy - 0.5f, nose_x + 0.5f, g.cy + g.nose_len - 0.5f,
           g.skin * 0.6f);

  draw_box(img, cx + feat_dx - g.mouth_hw * squeeze, g.cy + g.mouth_y - g.mouth_ht * 0.5f,
           cx + feat_dx + g.mouth_hw * squeeze, g.cy + g.mouth_y + g.mouth_ht * 0.5f,
           std::min(70.0f, g.feature_gray + 25.0f));
}

void draw_accessory(Image& img, const FaceGeometry& g, int attr) {
  const float top = g.cy - g.ry;
  const float eye_l = g.cx - g.eye_dx, eye_r_x = g.cx + g.eye_dx, ey = g.cy + g.eye_y;
  switch (attr) {
    case 0:
      break;  // bare face
    case 1:  // flat cap
      draw_box(img, g.cx - g.rx - 1.0f, top - 1.5f, g.cx + g.rx + 1.0f, top + 2.0f, 20.0f);
      break;
    case 2:  // tall hat
      draw_box(img, g.cx - g.rx * 0.6f, std::max(0.0f, top - 7.0f), g.cx + g.rx * 0.6f,
               top + 1.5f, 35.0f);
      break;
    case 3:  // brimmed hat
      draw_box(img, g.cx - g.rx - 2.5f, top + 0.5f, g.cx + g.rx + 2.5f, top + 2.2f, 15.0f);
      draw_box(img, g.cx - g.rx * 0.55f, std::max(0.0f, top - 4.5f), g.cx + g.rx * 0.55f,
               top + 0.5f, 50.0f);
      break;
    case 4:  // thin round glasses
      draw_ring(img, eye_l, ey, g.eye_r + 1.6f, 0.8f, 15.0f);
      draw_ring(img, eye_r_x, ey, g.eye_r + 1.6f, 0.8f, 15.0f);
      draw_box(img, eye_l, ey - 0.4f, eye_r_x, ey + 0.4f, 15.0f);
      break;
    case 5:  // thick frames
      draw_ring(img, eye_l, ey, g.eye_r + 2.0f, 1.8f, 10.0f);
      draw_ring(img, eye_r_x, ey, g.eye_r + 2.0f, 1.8f, 10.0f);
      draw_box(img, eye_l, ey - 0.5f, eye_r_x, ey + 0.5f, 10.0f);
      break;
    case 6:  // shaded lenses
      draw_disk(img, eye_l, ey, g.eye_r + 1.8f, 60.0f);
      draw_disk(img, eye_r_x, ey, g.eye_r + 1.8f, 60.0f);
      draw_box(img, eye_l, ey - 0.4f, eye_r_x, ey + 0.4f, 40.0f);
      break;
    default:
      throw std::invalid_argument("render_face: accessory id " + std::to_string(attr));
  }
}

}  // namespace

Image render_face(std::uint64_t seed, int identity, int attribute_id, int illumination_id,
                  int n_illuminations, const AttributeVocab& vocab) {
  if (attribute_id < 0 || attribute_id >= vocab.size)
    throw std::invalid_argument("render_face: attribute_id " + std::to_string(attribute_id) +
                                " outside " + vocab.name);
  if (illumination_id < 0 || illumination_id >= n_illuminations)
    throw std::invalid_argument("render_face: illumination_id out of range");

  const FaceGeometry g = sample_geometry(seed, identity);
  Image img(kImageSize, kImageSize, PixelSpace::Raw);
  for (float& v : img.pix) v = g.bg;

  if (vocab.name == "poses-7") {
    draw_pose_face(img, g, attribute_id);
  } else {
    draw_pose_face(img, g, 3);  // frontal
    draw_accessory(img, g, attribute_id);
  }

  // Left-right illumination gradient, symmetric around the neutral middle.
  const float alpha =
      n_illuminations == 1
          ? 0.0f
          : -0.45f + 0.9f * static_cast<float>(illumination_id) /
                         static_cast<float>(n_illuminations - 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      img.at(y, x) *= 1.0f + alpha * (static_cast<float>(x) - 15.5f) / 15.5f;

  // Mild sensor noise so statistics never degenerate.
  std::mt19937 rng = make_rng(derive_seed(seed, 0x2E, static_cast<std::uint64_t>(identity),
                                          (static_cast<std::uint64_t>(illumination_id) << 32) |
                                              static_cast<std::uint64_t>(attribute_id)));
  std::normal_distribution<float> noise(0.0f, 2.0f);
  for (float& v : img.pix) v += noise(rng);

  return quantize_raw(img);
}

SynthResult synth_generate(const SynthSpec& spec) {
  if (spec.identities < 1 || spec.illuminations < 1)
    throw std::invalid_argument("synth_generate: counts must be at least 1");
  if (spec.test_identities < 0)
    throw std::invalid_argument("synth_generate: test_identities must be nonnegative");
  if (spec.out_dir.empty()) throw std::invalid_argument("synth_generate: out_dir required");

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(spec.out_dir) / "images");

  SynthResult result;
  const int total = spec.identities + spec.test_identities;
  for (int id = 0; id < total; ++id) {
    for (int illum = 0; illum < spec.illuminations; ++illum) {
      for (int attr = 0; attr < spec.vocab.size; ++attr) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/id%04d_a%d_i%02d.pgm", id, attr, illum);
        const Image img =
            render_face(spec.seed, id, attr, illum, spec.illuminations, spec.vocab);
        write_image((fs::path(spec.out_dir) / name).string(), img);
        ManifestEntry e;
        e.path = name;
        e.identity = id;
        e.attribute_id = attr;
        e.illumination_id = illum;
        e.split = id < spec.identities ? Split::Train : Split::Test;
        result.entries.push_back(std::move(e));
      }
    }
  }
  result.manifest_path = (fs::path(spec.out_dir) / "manifest.csv").string();
  save_manifest(result.manifest_path, result.entries);
  return result;
}

}  // namespace attrgen
