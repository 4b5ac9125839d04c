#pragma once

#include <cstdint>

#include "sparsecd/image.hpp"

namespace sparsecd {

/// Recipe for a synthetic co-registered pair. Semantic changes are
/// rectangles ("buildings") present in only one of the two images; nuisance
/// (global brightness shift, sensor noise, cast shadows) alters appearance
/// without ever entering the ground-truth mask.
struct SyntheticSpec {
  std::size_t size = 64;
  std::size_t background_shapes = 6;  // present in both images
  std::size_t min_changes = 1;
  std::size_t max_changes = 3;
  std::size_t min_change_size = 8;
  std::size_t max_change_size = 20;
  double brightness_shift = 0.0;  // max |shift| applied to the post image
  double noise_sigma = 0.0;       // independent per image
  std::size_t shadows = 0;        // darkened quads on the post image
  double shadow_strength = 0.35;  // multiplicative darkening
  std::size_t max_retries = 200;

  /// Nuisance scaled by `level` (0 = none, 1 = default strength).
  static SyntheticSpec with_nuisance(std::size_t size, double level);
  void validate() const;
};

/// Deterministic under `seed`. Pixel values are quantized to 8-bit levels so
/// a pair survives a PNG round trip unchanged.
Sample generate_pair(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace sparsecd
