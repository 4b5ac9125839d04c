#pragma once

#include <array>
#include <filesystem>

#include "sparsecd/image.hpp"

namespace sparsecd {

/// Reads `root/A`, `root/B`, `root/label` triples matched by file name,
/// sorted by name. A missing or empty root yields an empty dataset.
Dataset load_dataset(const std::filesystem::path& root);

/// Writes one triple under `root` using `sample.name` as the file name.
void write_sample(const std::filesystem::path& root, const Sample& sample);

/// Per-channel statistics used to standardize inputs.
struct InputNorm {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};

  bool operator==(const InputNorm&) const = default;
};

/// Mean/std over every pixel of both images of every sample.
InputNorm compute_input_norm(const Dataset& data);

struct Split {
  Dataset train;
  Dataset val;
};

/// Uses `root/train` and `root/val` when both exist, otherwise holds out the
/// trailing `val_fraction` of `root` (at least one sample when possible).
Split load_split(const std::filesystem::path& root, double val_fraction = 0.2);

}  // namespace sparsecd
