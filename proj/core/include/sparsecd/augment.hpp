#pragma once

#include "sparsecd/image.hpp"
#include "sparsecd/init.hpp"

namespace sparsecd {

struct AugmentConfig {
  bool flip = true;
  bool scale_crop = true;
  bool blur = true;
  bool color_jitter = true;

  double flip_prob = 0.5;        // per axis
  double scale_crop_prob = 0.5;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double blur_prob = 0.3;        // per image
  double blur_sigma_max = 1.5;
  double jitter_prob = 0.5;      // per image
  double jitter = 0.1;           // brightness and contrast factors in [1 - j, 1 + j]

  static AugmentConfig none();
  void validate() const;
};

/// A geometric transform shared by pre, post and mask. Output pixel (y, x)
/// reads the rescaled image at (y + offset_y, x + offset_x) after the flips;
/// out-of-range reads clamp to the border.
struct GeometricTransform {
  bool flip_h = false;  // mirror columns
  bool flip_v = false;  // mirror rows
  double scale = 1.0;
  double offset_y = 0.0;
  double offset_x = 0.0;

  bool is_identity() const { return !flip_h && !flip_v && scale == 1.0 && offset_y == 0.0 && offset_x == 0.0; }
  /// Bilinear.
  Image apply(const Image& img) const;
  /// Nearest neighbour, keeps values binary.
  ChangeMask apply(const ChangeMask& mask) const;
};

GeometricTransform draw_geometric(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng);

/// Separable Gaussian blur with border clamping.
Image gaussian_blur(const Image& img, double sigma);
/// v -> clamp((v * brightness - mean) * contrast + mean), mean taken per channel after the brightness factor.
Image color_jitter(const Image& img, double brightness, double contrast);

/// One shared geometric draw for pre, post and mask; independent
/// photometric draws per image. The mask is never photometrically altered.
Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng);

}  // namespace sparsecd
