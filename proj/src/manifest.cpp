#include "attrgen/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace attrgen {

AttributeVocab parse_vocab(const std::string& name) {
  if (name == "poses-7") return {name, 7};
  if (name == "accessories-7") return {name, 7};
  throw std::invalid_argument("unknown vocabulary '" + name +
                              "' (expected poses-7 or accessories-7)");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

int parse_int(const std::string& s, const std::string& path, int line_no, const char* what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad " + what + " '" + s +
                             "'");
  return std::stoi(s);
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen_paths;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kManifestHeader)
        throw std::runtime_error(path + ":1: bad header '" + line + "' (expected '" +
                                 kManifestHeader + "')");
      continue;
    }
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 5 fields, got " +
                               std::to_string(f.size()));
    ManifestEntry e;
    e.path = f[0];
    if (e.path.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty image path");
    if (!seen_paths.insert(e.path).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate path '" +
                               e.path + "'");
    e.identity = parse_int(f[1], path, line_no, "identity");
    e.attribute_id = parse_int(f[2], path, line_no, "attribute_id");
    if (e.attribute_id >= vocab_size)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": attribute_id " +
                               std::to_string(e.attribute_id) + " outside vocabulary of size " +
                               std::to_string(vocab_size));
    e.illumination_id = f[3].empty() ? -1 : parse_int(f[3], path, line_no, "illumination_id");
    if (f[4] == "train")
      e.split = Split::Train;
    else if (f[4] == "test")
      e.split = Split::Test;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad split '" + f[4] +
                               "' (expected train or test)");
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << kManifestHeader << "\n";
  for (const ManifestEntry& e : entries) {
    out << e.path << ',' << e.identity << ',' << e.attribute_id << ',';
    if (e.illumination_id >= 0) out << e.illumination_id;
    out << ',' << (e.split == Split::Train ? "train" : "test") << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<SamplePair> build_pairs(const std::vector<ManifestEntry>& entries) {
  // (identity, illumination) -> attribute -> earliest entry index
  std::map<std::pair<int, int>, std::map<int, int>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = entries[i];
    auto& group = groups[{e.identity, e.illumination_id}];
    group.emplace(e.attribute_id, static_cast<int>(i));  // keeps first occurrence
  }
  std::vector<SamplePair> pairs;
  for (const auto& [key, attrs] : groups) {
    for (const auto& [sa, si] : attrs)
      for (const auto& [ta, ti] : attrs)
        if (sa != ta) pairs.push_back({si, ti});
  }
  return pairs;
}

std::string parent_dir(const std::string& path) {
  const std::filesystem::path p(path);
  const std::filesystem::path dir = p.parent_path();
  return dir.empty() ? std::string(".") : dir.string();
}

std::vector<Image> load_images(const std::vector<ManifestEntry>& entries,
                               const std::string& root) {
  std::vector<Image> images;
  images.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = std::filesystem::path(root) / p;
    images.push_back(read_image(p.string()));
  }
  return images;
}

}  // namespace attrgen
