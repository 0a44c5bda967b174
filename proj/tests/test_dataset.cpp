#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "attrgen/rng.hpp"
#include "attrgen/synth.hpp"

using namespace attrgen;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = std::string("/tmp/") + name;
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void expect_manifest_error(const std::string& body, const std::string& needle) {
  const std::string path = write_temp("attrgen_manifest_err.csv", body);
  try {
    load_manifest(path);
    FAIL("expected a throw for: ", needle);
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    INFO("message: ", msg);
    CHECK(msg.find(needle) != std::string::npos);
  }
  std::remove(path.c_str());
}

}  // namespace

TEST_CASE("manifest round-trips through save and load") {
  std::vector<ManifestEntry> entries;
  for (int id = 0; id < 2; ++id)
    for (int a = 0; a < 3; ++a) {
      ManifestEntry e;
      e.path = "img/" + std::to_string(id) + "_" + std::to_string(a) + ".pgm";
      e.identity = id;
      e.attribute_id = a;
      e.illumination_id = a == 1 ? -1 : a;  // exercise the empty column
      e.split = id == 1 ? Split::Test : Split::Train;
      entries.push_back(e);
    }
  const std::string path = "/tmp/attrgen_manifest_rt.csv";
  save_manifest(path, entries);

  const std::string text = read_all(path);
  CHECK(text.rfind(std::string(kManifestHeader) + "\n", 0) == 0);

  const auto back = load_manifest(path, 3);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].path == entries[i].path);
    CHECK(back[i].identity == entries[i].identity);
    CHECK(back[i].attribute_id == entries[i].attribute_id);
    CHECK(back[i].illumination_id == entries[i].illumination_id);
    CHECK(back[i].split == entries[i].split);
  }
  std::remove(path.c_str());
}

TEST_CASE("manifest errors carry line numbers") {
  const std::string header = std::string(kManifestHeader) + "\n";
  expect_manifest_error("path,identity\n", "header");
  expect_manifest_error(header + "a.pgm,0,0,0\n", ":2:");                    // missing field
  expect_manifest_error(header + "a.pgm,0,0,0,train,extra\n", ":2:");        // extra field
  expect_manifest_error(header + "a.pgm,zero,0,0,train\n", ":2:");           // bad int
  expect_manifest_error(header + "a.pgm,0,9,0,train\n", "attribute");        // out of vocab
  expect_manifest_error(header + "a.pgm,0,-1,0,train\n", "attribute");
  expect_manifest_error(header + "a.pgm,0,0,0,validation\n", "split");       // bad split
  expect_manifest_error(header + ",0,0,0,train\n", "path");                  // empty path
  expect_manifest_error(header + "a.pgm,0,0,0,train\na.pgm,1,1,0,train\n", "duplicate");
  expect_manifest_error(header + "a.pgm,0,0,0,train\nb.pgm,0,1,0,test\nb.pgm,1,1,0,test\n",
                        ":4:");  // physical file line of the second b.pgm
}

TEST_CASE("an empty manifest is an empty dataset, not an error") {
  const std::string path =
      write_temp("attrgen_manifest_empty.csv", std::string(kManifestHeader) + "\n");
  CHECK(load_manifest(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("empty illumination column maps to -1 and back") {
  const std::string path = write_temp(
      "attrgen_manifest_noillum.csv",
      std::string(kManifestHeader) + "\na.pgm,4,2,,test\n");
  const auto entries = load_manifest(path);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].illumination_id == -1);
  CHECK(entries[0].identity == 4);
  CHECK(entries[0].split == Split::Test);
  std::remove(path.c_str());
}

TEST_CASE("build_pairs enumerates ordered distinct-attribute pairs per group") {
  // 2 identities x 2 illuminations x 3 attributes -> 4 groups x 3*2 pairs
  std::vector<ManifestEntry> entries;
  for (int id = 0; id < 2; ++id)
    for (int il = 0; il < 2; ++il)
      for (int a = 0; a < 3; ++a) {
        ManifestEntry e;
        e.path = std::to_string(id) + "/" + std::to_string(il) + "/" + std::to_string(a);
        e.identity = id;
        e.attribute_id = a;
        e.illumination_id = il;
        entries.push_back(e);
      }
  const auto pairs = build_pairs(entries);
  CHECK(pairs.size() == 2 * 2 * 3 * 2);

  std::set<std::pair<int, int>> seen;
  for (const SamplePair& p : pairs) {
    const auto& s = entries[static_cast<std::size_t>(p.source)];
    const auto& t = entries[static_cast<std::size_t>(p.target)];
    CHECK(s.identity == t.identity);
    CHECK(s.illumination_id == t.illumination_id);
    CHECK(s.attribute_id != t.attribute_id);
    seen.insert({p.source, p.target});
  }
  CHECK(seen.size() == pairs.size());  // no duplicates

  // deterministic order: sorted by identity, illumination, source, target attr
  const auto& first = entries[static_cast<std::size_t>(pairs[0].source)];
  CHECK(first.identity == 0);
  CHECK(first.illumination_id == 0);
  CHECK(first.attribute_id == 0);
  CHECK(entries[static_cast<std::size_t>(pairs[0].target)].attribute_id == 1);
  const auto again = build_pairs(entries);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].source == again[i].source);
    CHECK(pairs[i].target == again[i].target);
  }
}

TEST_CASE("groups with a single attribute yield no pairs") {
  std::vector<ManifestEntry> entries;
  ManifestEntry e;
  e.path = "only.pgm";
  e.identity = 0;
  e.attribute_id = 3;
  entries.push_back(e);
  CHECK(build_pairs(entries).empty());

  // same attribute twice in a group still pairs with a different attribute once
  ManifestEntry dup = e;
  dup.path = "dup.pgm";
  entries.push_back(dup);
  ManifestEntry other = e;
  other.path = "other.pgm";
  other.attribute_id = 4;
  entries.push_back(other);
  const auto pairs = build_pairs(entries);
  CHECK(pairs.size() == 2);  // 3->4 and 4->3, earliest row represents attr 3
  for (const SamplePair& p : pairs) {
    CHECK(p.source != 1);
    CHECK(p.target != 1);
  }
}

TEST_CASE("one_hot basics") {
  const auto v = one_hot<float>(2, 7);
  CHECK(v.shape() == Shape{7});
  for (int i = 0; i < 7; ++i) CHECK(v[i] == (i == 2 ? 1.0f : 0.0f));
  CHECK_THROWS_AS(one_hot<float>(7, 7), std::invalid_argument);
  CHECK_THROWS_AS(one_hot<float>(-1, 7), std::invalid_argument);
}

TEST_CASE("PGM write/read round-trips quantized images byte-exactly") {
  Image img(kImageSize, kImageSize, PixelSpace::Raw);
  std::mt19937 rng = make_rng(404);
  std::uniform_int_distribution<int> gray(0, 255);
  for (float& v : img.pix) v = static_cast<float>(gray(rng));

  const std::string path = "/tmp/attrgen_rt.pgm";
  write_image(path, img);

  const std::string bytes = read_all(path);
  CHECK(bytes.rfind("P5\n32 32\n255\n", 0) == 0);
  CHECK(bytes.size() == 13 + 32 * 32);  // "P5\n32 32\n255\n" is 13 bytes

  const Image back = read_image(path);
  REQUIRE(back.pix.size() == img.pix.size());
  for (std::size_t i = 0; i < img.pix.size(); ++i) CHECK(back.pix[i] == img.pix[i]);
  std::remove(path.c_str());
}

TEST_CASE("PGM reader rejects malformed files") {
  auto bad = [](const std::string& name, const std::string& body) {
    const std::string path = write_temp(name, body);
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
    std::remove(path.c_str());
  };
  bad("attrgen_p2.pgm", "P2\n2 2\n255\n0 0 0 0\n");          // ascii variant
  bad("attrgen_trunc.pgm", "P5\n4 4\n255\n\x01\x02");        // truncated pixels
  bad("attrgen_maxval.pgm", std::string("P5\n1 1\n65535\n") + "ab");
  bad("attrgen_nosize.pgm", "P5\n255\n");
  CHECK_THROWS_AS(read_pgm("/tmp/attrgen_does_not_exist.pgm"), std::runtime_error);
}

TEST_CASE("PGM reader skips comments and read_image enforces 32x32") {
  const std::string path =
      write_temp("attrgen_comment.pgm", std::string("P5\n# a comment\n2 2\n255\nabcd"));
  const Image img = read_pgm(path);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.at(0, 0) == static_cast<float>('a'));
  CHECK_THROWS_AS(read_image(path), std::runtime_error);  // not 32x32
  std::remove(path.c_str());
}

TEST_CASE("write_image rejects non-quantized or out-of-range pixels") {
  Image img(kImageSize, kImageSize, PixelSpace::Raw);
  img.pix[5] = 300.0f;
  CHECK_THROWS_AS(write_image("/tmp/attrgen_bad.pgm", img), std::invalid_argument);
  img.pix[5] = -1.0f;
  CHECK_THROWS_AS(write_image("/tmp/attrgen_bad.pgm", img), std::invalid_argument);
}

TEST_CASE("quantize_raw clamps and rounds") {
  Image img(1, 4, PixelSpace::Raw);
  img.pix = {-3.0f, 12.4f, 12.5f, 400.0f};
  const Image q = quantize_raw(img);
  CHECK(q.pix[0] == 0.0f);
  CHECK(q.pix[1] == 12.0f);
  CHECK(q.pix[2] == 13.0f);
  CHECK(q.pix[3] == 255.0f);
}

TEST_CASE("eye occlusion zeroes exactly the bar rows and is idempotent") {
  Image img(kImageSize, kImageSize, PixelSpace::Raw);
  for (float& v : img.pix) v = 200.0f;
  const Image occ = apply_eye_occlusion(img);
  int zeroed = 0;
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      const bool in_bar = y >= kEyeBarTop && y < kEyeBarTop + kEyeBarHeight;
      CHECK(occ.at(y, x) == (in_bar ? 0.0f : 200.0f));
      zeroed += occ.at(y, x) == 0.0f;
    }
  CHECK(zeroed == kEyeBarHeight * kImageSize);  // 6 rows x 32 = 192 pixels

  const Image twice = apply_eye_occlusion(occ);
  for (std::size_t i = 0; i < occ.pix.size(); ++i) CHECK(twice.pix[i] == occ.pix[i]);

  CHECK_THROWS_AS(apply_eye_occlusion(img, 30, 6), std::invalid_argument);  // bar overflows
}

TEST_CASE("montage layout places tiles with separators") {
  Image a(4, 4, PixelSpace::Raw), b(4, 4, PixelSpace::Raw);
  for (float& v : a.pix) v = 0.0f;
  for (float& v : b.pix) v = 255.0f;
  const std::string path = "/tmp/attrgen_montage.pgm";
  write_montage(path, {a, b, a, b}, 2);
  const Image m = read_pgm(path);
  CHECK(m.width == 4 + 1 + 4);
  CHECK(m.height == 4 + 1 + 4);
  CHECK(m.at(0, 0) == 0.0f);
  CHECK(m.at(0, 5) == 255.0f);   // second column tile
  CHECK(m.at(0, 4) == 255.0f);   // separator is white
  CHECK(m.at(4, 0) == 255.0f);
  std::remove(path.c_str());
}

TEST_CASE("attribute vocabularies") {
  CHECK(parse_vocab("poses-7").size == 7);
  CHECK(parse_vocab("accessories-7").size == 7);
  CHECK_THROWS_AS(parse_vocab("poses-9"), std::invalid_argument);
}

TEST_CASE("synthetic dataset has the promised size and splits") {
  const fs::path dir = "/tmp/attrgen_synth_test";
  fs::remove_all(dir);
  SynthSpec spec;
  spec.identities = 4;
  spec.test_identities = 2;
  spec.illuminations = 2;
  spec.out_dir = dir.string();
  const SynthResult r = synth_generate(spec);

  CHECK(r.entries.size() == (4 + 2) * 2 * 7);
  int train = 0, test = 0;
  std::set<int> train_ids, test_ids;
  for (const auto& e : r.entries) {
    if (e.split == Split::Train) {
      ++train;
      train_ids.insert(e.identity);
    } else {
      ++test;
      test_ids.insert(e.identity);
    }
  }
  CHECK(train == 4 * 2 * 7);
  CHECK(test == 2 * 2 * 7);
  // identity-disjoint splits
  for (int id : test_ids) CHECK(train_ids.count(id) == 0);

  // manifest on disk agrees and trains into pairs: groups x 7*6
  const auto entries = load_manifest(r.manifest_path);
  CHECK(entries.size() == r.entries.size());
  CHECK(build_pairs(entries).size() == (4 + 2) * 2 * 7 * 6);

  // every referenced image exists, is 32x32, and decodes
  const auto images = load_images(entries, parent_dir(r.manifest_path));
  CHECK(images.size() == entries.size());
  fs::remove_all(dir);
}

TEST_CASE("synthesis is byte-deterministic per seed and varies across knobs") {
  SynthSpec spec;
  spec.identities = 1;
  spec.illuminations = 2;
  const AttributeVocab vocab = spec.vocab;

  const Image a = render_face(7, 0, 3, 0, 2, vocab);
  const Image b = render_face(7, 0, 3, 0, 2, vocab);
  REQUIRE(a.pix.size() == b.pix.size());
  for (std::size_t i = 0; i < a.pix.size(); ++i) CHECK(a.pix[i] == b.pix[i]);

  auto differs = [](const Image& x, const Image& y) {
    for (std::size_t i = 0; i < x.pix.size(); ++i)
      if (x.pix[i] != y.pix[i]) return true;
    return false;
  };
  CHECK(differs(a, render_face(8, 0, 3, 0, 2, vocab)));    // seed
  CHECK(differs(a, render_face(7, 1, 3, 0, 2, vocab)));    // identity
  CHECK(differs(a, render_face(7, 0, 4, 0, 2, vocab)));    // pose
  CHECK(differs(a, render_face(7, 0, 3, 1, 2, vocab)));    // illumination
  CHECK(differs(a, render_face(7, 0, 3, 0, 2, parse_vocab("accessories-7"))));

  // output is quantized raw gray
  for (float v : a.pix) {
    CHECK(v >= 0.0f);
    CHECK(v <= 255.0f);
    CHECK(v == std::floor(v));
  }
}

TEST_CASE("pose attributes shift the face horizontally") {
  // profile-left vs profile-right should move mass in opposite directions
  const AttributeVocab vocab = parse_vocab("poses-7");
  const Image left = render_face(7, 0, 0, 0, 1, vocab);
  const Image right = render_face(7, 0, 6, 0, 1, vocab);
  auto centroid_x = [](const Image& img) {
    double wsum = 0.0, total = 0.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double v = img.at(y, x);  // the face is the bright mass
        wsum += v * x;
        total += v;
      }
    return wsum / total;
  };
  CHECK(centroid_x(left) < centroid_x(right) - 0.5);
}
