#include "semnav/ad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace semnav::ad {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& os, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  const uint32_t bits = read_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(kCheckpointMagic, 4);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<uint32_t>(params.all().size()));
  for (const auto& [name, t] : params.all()) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) write_u64(os, static_cast<uint64_t>(d));
    for (double v : t.values()) write_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::map<std::string, Tensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = read_u32(is);
  std::map<std::string, Tensor> table;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = read_u32(is);
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(read_u64(is));
    std::vector<double> vals(static_cast<size_t>(numel(shape)));
    for (double& v : vals) v = static_cast<double>(read_f32(is));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
    table.emplace(name, Tensor::from(shape, std::move(vals)));
  }
  return table;
}

void load_checkpoint(const std::string& path, ParamSet& params) {
  auto table = read_checkpoint(path);
  if (table.size() != params.all().size())
    throw std::runtime_error("checkpoint: " + path + " holds " +
                             std::to_string(table.size()) + " tensors, model has " +
                             std::to_string(params.all().size()));
  for (auto& [name, t] : params.all()) {
    auto it = table.find(name);
    if (it == table.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    if (it->second.shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file " +
                               shape_str(it->second.shape()) + " vs model " +
                               shape_str(t.shape()));
    t.mutable_values() = it->second.values();
  }
}

}  // namespace semnav::ad
