#pragma once
// Flat binary parameter checkpoints, all little-endian:
//
//   bytes 0-3  magic "MRLC"
//   u32        format version (1)
//   u32        metadata length, then that many bytes of UTF-8 JSON
//   u32        tensor count
//   per tensor:
//     u32      name length, then the name bytes
//     u32      rank, then rank u32 dimensions
//     f32[]    row-major data, product(dims) entries
//
// The JSON metadata block carries run provenance (env id, algorithm, config,
// training step); tensors carry the parameters in a stable documented order.

#include <cstdint>
#include <string>
#include <vector>

#include "marl/config.hpp"

namespace marl {

struct CheckpointTensor {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<float> data;  // size == product(shape)
};

struct Checkpoint {
  Config meta = Config::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor& tensor(const std::string& name) const;
};

// Overwrites `path`. Throws ContractError on shape/data disagreements.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws NotFoundError when the file is missing, SchemaError when the bytes
// are not a valid checkpoint (bad magic, version, or truncation).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace marl
