#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sparsecd {

/// Planar [channels, height, width] image with values in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  bool operator==(const Image&) const = default;
};

/// Binary change map: 0 = no change, 1 = change.
struct ChangeMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  ChangeMask() = default;
  ChangeMask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), values(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t count() const;
  bool operator==(const ChangeMask&) const = default;
};

/// Co-registered pre/post images of identical shape.
struct ImagePair {
  Image pre;
  Image post;
};

struct Sample {
  std::string name;
  ImagePair pair;
  ChangeMask mask;
};

using Dataset = std::vector<Sample>;

/// Rounds to 8-bit levels (v -> round(clamp(v) * 255) / 255).
void quantize_8bit(Image& image);

/// 8-bit RGB PNG; grayscale and palette inputs are expanded, alpha dropped.
Image read_png_rgb(const std::filesystem::path& path);
/// 8-bit single-channel PNG, binarized as value >= 128.
ChangeMask read_png_label(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& image);
/// Writes 0/255.
void write_png_mask(const std::filesystem::path& path, const ChangeMask& mask);
void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& values);

}  // namespace sparsecd
