#include "spgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace spgan {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'G', 'N'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a64(const uint8_t* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& buf, double d) {
  put_u64(buf, std::bit_cast<uint64_t>(d));
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint '" + path + "': truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, ckpt.version);
  put_u64(buf, ckpt.config_text.size());
  buf.insert(buf.end(), ckpt.config_text.begin(), ckpt.config_text.end());
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<uint32_t>(t.rank()));
    for (int e : t.shape()) put_u64(buf, static_cast<uint64_t>(e));
    for (int64_t i = 0; i < t.size(); ++i) put_f64(buf, t.data()[i]);
  }
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint '" + path + "': cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint '" + path + "': write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint '" + path + "': cannot open");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 4 + 8 + 8)
    throw std::runtime_error("checkpoint '" + path + "': truncated file");

  const size_t body = buf.size() - 8;
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<uint64_t>(buf[body + static_cast<size_t>(i)]) << (8 * i);
  if (fnv1a64(buf.data(), body) != stored)
    throw std::runtime_error("checkpoint '" + path + "': checksum failure");

  Reader r{buf, 0, path};
  if (std::memcmp(r.str(4).data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint '" + path + "': bad magic");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kVersion)
    throw std::runtime_error("checkpoint '" + path + "': version " +
                             std::to_string(ckpt.version) + " not supported (expected " +
                             std::to_string(kVersion) + ")");
  const uint64_t cfg_len = r.u64();
  ckpt.config_text = r.str(cfg_len);
  while (r.pos < body) {
    const uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const uint32_t rank = r.u32();
    Shape shape;
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint64_t e = r.u64();
      shape.push_back(static_cast<int>(e));
      n *= static_cast<int64_t>(e);
    }
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = r.f64();
    ckpt.tensors.emplace(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace spgan
