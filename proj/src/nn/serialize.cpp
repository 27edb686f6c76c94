#include "tfg/nn/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tfg::nn {

namespace {

constexpr char kMagic[8] = {'T', 'F', 'G', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ostream& f, const std::string& s) {
  write_u64(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& f) {
  const uint64_t n = read_u64(f);
  std::string s(n, '\0');
  f.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  write_string(f, ckpt.module);
  nlohmann::json meta = ckpt.meta;
  // Architecture-config fingerprint, surfaced in provenance records.
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : meta.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  meta["config_hash"] = hex;
  write_string(f, meta.dump());
  write_u64(f, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    write_string(f, name);
    write_u64(f, static_cast<uint64_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_u64(f, static_cast<uint64_t>(t.dim(i)));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  ckpt.module = read_string(f);
  ckpt.meta = nlohmann::json::parse(read_string(f));
  const uint64_t count = read_u64(f);
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(f);
    const uint64_t ndim = read_u64(f);
    std::vector<long> shape(ndim);
    for (uint64_t d = 0; d < ndim; ++d) shape[d] = static_cast<long>(read_u64(f));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw std::runtime_error("load_checkpoint: truncated " + path);
    ckpt.tensors[name] = std::move(t);
  }
  return ckpt;
}

}  // namespace tfg::nn
