#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segadv/model/seg_model.hpp"

namespace segadv {

struct TrainingMetadata {
  std::uint32_t epochs = 0;
  float final_loss = 0.0f;
  std::uint64_t seed = 0;
  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  SegModel model;
  TrainingMetadata meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian layout:
//   "SEGADVCK" u32 version
//   u32 in_channels, u32 num_layers, num_layers x (u32 out_channels, u32 kernel)
//   f32 mean[3], f32 std[3]
//   u32 epochs, f32 final_loss, u64 seed
//   u32 tensor_count, per tensor: u32 name_len, name, u32 rank, u32 dims[rank], f32 data[]
std::vector<std::uint8_t> encode_checkpoint(const SegModel& model, const TrainingMetadata& meta);
// Throws ParseError on bad magic, version, truncation or shape/name mismatch.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const SegModel& model, const TrainingMetadata& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string checkpoint_hash(const std::filesystem::path& path);
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

}  // namespace segadv
