#include "cc2d/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cc2d {
namespace {

constexpr char kMagic[8] = {'C', 'C', '2', 'D', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    const std::string meta = ckpt.meta.dump();
    write_pod<uint64_t>(out, meta.size());
    out.write(meta.data(), meta.size());
    write_pod<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), name.size());
      write_pod<int32_t>(out, t.c);
      write_pod<int32_t>(out, t.h);
      write_pod<int32_t>(out, t.w);
      out.write(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  const auto meta_len = read_pod<uint64_t>(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  if (!in) throw std::runtime_error("checkpoint: truncated metadata in " + path);
  ckpt.meta = nlohmann::json::parse(meta);
  const auto n = read_pod<uint32_t>(in);
  for (uint32_t i = 0; i < n; ++i) {
    const auto name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto c = read_pod<int32_t>(in);
    const auto h = read_pod<int32_t>(in);
    const auto w = read_pod<int32_t>(in);
    if (c <= 0 || h <= 0 || w <= 0) throw std::runtime_error("checkpoint: bad tensor shape");
    Tensor t(c, h, w);
    in.read(reinterpret_cast<char*>(t.data()), t.size() * sizeof(float));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace cc2d
