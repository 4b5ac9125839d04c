#include "sparsecd/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "sparsecd/errors.hpp"

namespace sparsecd {

std::size_t ChangeMask::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

struct Raster {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;  // interleaved
};

Raster decode(const std::filesystem::path& path, bool want_rgb) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + image.message);
  }
  image.format = want_rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster r;
  r.width = image.width;
  r.height = image.height;
  r.channels = want_rgb ? 3 : 1;
  r.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode " + path.string() + ": " + msg);
  }
  return r;
}

void encode(const std::filesystem::path& path, std::size_t height, std::size_t width, bool rgb,
            const std::vector<std::uint8_t>& interleaved) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, interleaved.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + image.message);
  }
}

}  // namespace

void quantize_8bit(Image& image) {
  for (auto& v : image.data) v = static_cast<float>(to_byte(v)) / 255.0f;
}

Image read_png_rgb(const std::filesystem::path& path) {
  const auto r = decode(path, true);
  Image img(3, r.height, r.width);
  for (std::size_t y = 0; y < r.height; ++y) {
    for (std::size_t x = 0; x < r.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(r.pixels[(y * r.width + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return img;
}

ChangeMask read_png_label(const std::filesystem::path& path) {
  const auto r = decode(path, false);
  ChangeMask m(r.height, r.width);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = r.pixels[i] >= 128 ? 1 : 0;
  return m;
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw IoError("write_png_rgb: expected 3 channels");
  std::vector<std::uint8_t> px(image.height * image.width * 3);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) px[(y * image.width + x) * 3 + c] = to_byte(image.at(c, y, x));
    }
  }
  encode(path, image.height, image.width, true, px);
}

void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& values) {
  if (values.size() != height * width) throw IoError("write_png_gray: size mismatch");
  encode(path, height, width, false, values);
}

void write_png_mask(const std::filesystem::path& path, const ChangeMask& mask) {
  std::vector<std::uint8_t> px(mask.values.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.values[i] ? 255 : 0;
  write_png_gray(path, mask.height, mask.width, px);
}

}  // namespace sparsecd
