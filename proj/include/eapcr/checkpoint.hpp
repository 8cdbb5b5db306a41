#pragma once

// Binary checkpoint container, all integers little-endian:
//
//   magic      8 bytes  "EAPCRCKP"
//   version    u32
//   header     u64 length + UTF-8 JSON (model config, schema, vocabulary,
//              discretizers, target scaler, tensor manifest)
//   count      u32 number of tensors
//   per tensor u32 name length + name, u32 rank, u64 dims[rank],
//              u64 byte length + IEEE-754 float64 values,
//              u64 FNV-1a checksum of the value bytes
//
// Nothing may follow the last tensor.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eapcr/features.hpp"
#include "eapcr/model.hpp"
#include "eapcr/trainer.hpp"

namespace eapcr::io {

inline constexpr char kCheckpointMagic[8] = {'E', 'A', 'P', 'C', 'R', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string target;
  features::FittedPipeline pipeline;
  train::TargetScaler scaler;
  model::EapcrParams params;  // carries the model config
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on wrong magic/version, IntegrityError on truncation,
// checksum mismatch, or trailing bytes.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct VerifyResult {
  bool ok = false;
  std::uint32_t version = 0;
  std::size_t tensors = 0;
  std::size_t parameters = 0;
  std::vector<std::string> problems;
};

// Full load plus semantic checks (finite values, pipeline consistent with the
// model's embedding layout). Never throws for a bad file.
VerifyResult verify_checkpoint(const std::filesystem::path& path);

}  // namespace eapcr::io
