#include "marl/checkpoint.hpp"

#include <cstdio>
#include <cstring>

#include "marl/errors.hpp"

namespace marl {
namespace {

constexpr char kMagic[4] = {'M', 'R', 'L', 'C'};
constexpr uint32_t kVersion = 1;

struct Writer {
  FILE* f;
  void u32(uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    if (std::fwrite(b, 1, 4, f) != 4) throw ContractError("checkpoint: write failed");
  }
  void bytes(const void* p, size_t n) {
    if (n && std::fwrite(p, 1, n, f) != n) throw ContractError("checkpoint: write failed");
  }
};

struct Reader {
  FILE* f;
  std::string path;
  [[noreturn]] void bad(const char* what) const {
    throw SchemaError("checkpoint " + path + ": " + what);
  }
  uint32_t u32() {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) bad("truncated");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
  }
  void bytes(void* p, size_t n) {
    if (n && std::fread(p, 1, n, f) != n) bad("truncated");
  }
};

}  // namespace

const CheckpointTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw NotFoundError("checkpoint has no tensor named " + name);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  for (const auto& t : ckpt.tensors) {
    size_t n = 1;
    for (uint32_t d : t.shape) n *= d;
    if (n != t.data.size())
      throw ContractError("checkpoint: tensor " + t.name + " data does not match its shape");
  }
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ContractError("checkpoint: cannot open " + path + " for writing");
  Writer w{f};
  std::string meta = ckpt.meta.dump();
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(uint32_t(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.u32(uint32_t(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.u32(uint32_t(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(uint32_t(t.shape.size()));
    for (uint32_t d : t.shape) w.u32(d);
    static_assert(sizeof(float) == 4);
    w.bytes(t.data.data(), t.data.size() * 4);  // IEEE-754 floats, little-endian hosts
  }
  std::fclose(f);
}

Checkpoint load_checkpoint(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw NotFoundError("checkpoint not found: " + path);
  Reader r{f, path};
  Checkpoint out;
  try {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) r.bad("bad magic, not a parameter checkpoint");
    if (r.u32() != kVersion) r.bad("unsupported format version");
    std::string meta(r.u32(), '\0');
    r.bytes(meta.data(), meta.size());
    out.meta = Config::parse(meta, nullptr, false);
    if (out.meta.is_discarded()) r.bad("metadata is not valid JSON");
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
      CheckpointTensor t;
      t.name.resize(r.u32());
      r.bytes(t.name.data(), t.name.size());
      t.shape.resize(r.u32());
      size_t n = 1;
      for (auto& d : t.shape) {
        d = r.u32();
        n *= d;
      }
      if (n > (1u << 30)) r.bad("tensor implausibly large");
      t.data.resize(n);
      r.bytes(t.data.data(), n * 4);
      out.tensors.push_back(std::move(t));
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return out;
}

}  // namespace marl
