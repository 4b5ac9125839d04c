#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sparsecd/model.hpp"

namespace sparsecd {

// File layout (little-endian): "SFCK", u32 version, u32 entry count, then per
// entry u16 name length, name bytes, u8 rank, u32 dims[rank], f32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// All parameters plus "input_norm.mean" and "input_norm.std".
void save_model(const std::filesystem::path& path, const ChangeDetector& model);

/// Checks that the file holds exactly the model's entries with matching
/// shapes before touching any parameter; on mismatch nothing is modified.
void load_model(const std::filesystem::path& path, ChangeDetector& model);

}  // namespace sparsecd
