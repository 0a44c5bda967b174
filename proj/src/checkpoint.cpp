#include "attrgen/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace attrgen {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}

void put_f32_array(std::string& buf, const Tensor<float>& t) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits;
    const float v = t[i];
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
  }
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error(path + ": truncated checkpoint (need " + std::to_string(n) +
                               " bytes at offset " + std::to_string(pos) + ")");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32(), hi = u32();
    return lo | (hi << 32);
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f32_array(Tensor<float>& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits = u32();
      float v;
      std::memcpy(&v, &bits, 4);
      t[i] = v;
    }
  }
};

void put_tensor(std::string& buf, const Tensor<float>& t) {
  put_u8(buf, static_cast<std::uint8_t>(t.shape().rank()));
  for (int i = 0; i < t.shape().rank(); ++i)
    put_u32(buf, static_cast<std::uint32_t>(t.shape().extent(i)));
  put_f32_array(buf, t);
}

Tensor<float> read_tensor(Reader& r) {
  const int rank = r.u8();
  if (rank < 1 || rank > 4)
    throw std::runtime_error(r.path + ": checkpoint tensor rank " + std::to_string(rank));
  std::vector<int> ext(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t e = r.u32();
    if (e == 0 || e > (1u << 24))
      throw std::runtime_error(r.path + ": checkpoint tensor extent " + std::to_string(e));
    ext[static_cast<std::size_t>(i)] = static_cast<int>(e);
  }
  Shape shape(ext);
  Tensor<float> t(shape);
  r.f32_array(t);
  return t;
}

NetworkSpec rebuild_spec(NetworkId id, int attribute_count, int maps, int input_size,
                         const std::string& path) {
  switch (id) {
    case NetworkId::Stage1: return build_stage1(attribute_count, maps, input_size);
    case NetworkId::Stage2: return build_stage2(input_size);
    case NetworkId::AttrClassifier: return build_attribute_classifier(attribute_count, input_size);
  }
  throw std::runtime_error(path + ": unknown network id " +
                           std::to_string(static_cast<int>(id)));
}

}  // namespace

Checkpoint make_checkpoint(const Network<float>& net, const std::vector<LayerParams<float>>& vel,
                           const NormStats& stats, std::uint64_t seed, std::uint64_t iterations) {
  if (vel.size() != net.params.size())
    throw std::invalid_argument("make_checkpoint: velocity buffer count mismatch");
  Checkpoint c;
  c.spec = net.spec;
  c.params = net.params;
  c.velocity = vel;
  c.stats = stats;
  c.seed = seed;
  c.iterations = iterations;
  return c;
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt) {
  Network<float> net;
  net.spec = ckpt.spec;
  net.params = ckpt.params;
  return net;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string payload;
  put_u32(payload, kVersion);
  put_u8(payload, static_cast<std::uint8_t>(ckpt.spec.id));
  put_u32(payload, static_cast<std::uint32_t>(ckpt.spec.attribute_count));
  put_u32(payload, static_cast<std::uint32_t>(ckpt.spec.attribute_map_channels));
  put_u32(payload, static_cast<std::uint32_t>(ckpt.spec.input_size));
  put_u64(payload, ckpt.seed);
  put_u64(payload, ckpt.iterations);
  put_u32(payload, static_cast<std::uint32_t>(ckpt.params.size()));
  if (ckpt.velocity.size() != ckpt.params.size())
    throw std::invalid_argument("save_checkpoint: velocity buffer count mismatch");
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    put_u8(payload, static_cast<std::uint8_t>(ckpt.params[i].kind));
    put_tensor(payload, ckpt.params[i].weights);
    put_tensor(payload, ckpt.params[i].bias);
    put_tensor(payload, ckpt.velocity[i].weights);
    put_tensor(payload, ckpt.velocity[i].bias);
  }
  put_f64(payload, ckpt.stats.mean);
  put_f64(payload, ckpt.stats.std);

  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, 4);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::string tail;
  put_u32(tail, crc);
  out.write(tail.data(), 4);
  if (!out) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 8 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint (bad magic)");

  const std::string payload = blob.substr(4, blob.size() - 8);
  Reader tail{blob, blob.size() - 4, path};
  const std::uint32_t stored_crc = tail.u32();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));
  if (crc != stored_crc)
    throw std::runtime_error(path + ": checksum mismatch (corrupt checkpoint)");

  Reader r{payload, 0, path};
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  const auto id = static_cast<NetworkId>(r.u8());
  const int attribute_count = static_cast<int>(r.u32());
  const int maps = static_cast<int>(r.u32());
  const int input_size = static_cast<int>(r.u32());

  Checkpoint c;
  c.seed = r.u64();
  c.iterations = r.u64();
  c.spec = rebuild_spec(id, attribute_count, maps, input_size, path);

  const std::uint32_t layers = r.u32();
  if (static_cast<int>(layers) != c.spec.param_layer_count())
    throw std::runtime_error(path + ": layer count " + std::to_string(layers) +
                             " does not match architecture (" +
                             std::to_string(c.spec.param_layer_count()) + ")");
  Network<float> ref = init_network<float>(c.spec, 0);
  for (std::uint32_t i = 0; i < layers; ++i) {
    LayerParams<float> p, v;
    p.kind = v.kind = static_cast<ParamKind>(r.u8());
    p.weights = read_tensor(r);
    p.bias = read_tensor(r);
    v.weights = read_tensor(r);
    v.bias = read_tensor(r);
    const LayerParams<float>& want = ref.params[i];
    if (p.kind != want.kind || p.weights.shape() != want.weights.shape() ||
        p.bias.shape() != want.bias.shape() || v.weights.shape() != want.weights.shape() ||
        v.bias.shape() != want.bias.shape())
      throw std::runtime_error(path + ": layer " + std::to_string(i) +
                               " tensor shapes do not match architecture (got " +
                               p.weights.shape().str() + ", expected " +
                               want.weights.shape().str() + ")");
    c.params.push_back(std::move(p));
    c.velocity.push_back(std::move(v));
  }
  c.stats.mean = r.f64();
  c.stats.std = r.f64();
  if (r.pos != payload.size())
    throw std::runtime_error(path + ": trailing bytes after checkpoint payload");
  return c;
}

}  // namespace attrgen
