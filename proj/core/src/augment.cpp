#include "sparsecd/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sparsecd/errors.hpp"

namespace sparsecd {

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.flip = c.scale_crop = c.blur = c.color_jitter = false;
  return c;
}

void AugmentConfig::validate() const {
  for (double p : {flip_prob, scale_crop_prob, blur_prob, jitter_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
  }
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("invalid scale range");
  if (!(blur_sigma_max >= 0.0)) throw ConfigError("blur sigma must be non-negative");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ConfigError("jitter must lie in [0, 1)");
}

namespace {

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Source coordinate (continuous, pixel-centre convention) for output index i.
double source_coord(std::size_t i, std::size_t n, bool flip, double scale, double offset) {
  const double scaled = (static_cast<double>(i) + 0.5 + offset) / scale - 0.5;
  return flip ? static_cast<double>(n) - 1.0 - scaled : scaled;
}

}  // namespace

Image GeometricTransform::apply(const Image& img) const {
  if (is_identity()) return img;
  Image out(img.channels, img.height, img.width);
  const double hmax = static_cast<double>(img.height) - 1.0, wmax = static_cast<double>(img.width) - 1.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    const double sy = std::clamp(source_coord(y, img.height, flip_v, scale, offset_y), 0.0, hmax);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < img.width; ++x) {
      const double sx = std::clamp(source_coord(x, img.width, flip_h, scale, offset_x), 0.0, wmax);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1 - fx) + img.at(c, y0, x1) * fx;
        const double bot = img.at(c, y1, x0) * (1 - fx) + img.at(c, y1, x1) * fx;
        out.at(c, y, x) = static_cast<float>(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

ChangeMask GeometricTransform::apply(const ChangeMask& mask) const {
  if (is_identity()) return mask;
  ChangeMask out(mask.height, mask.width);
  auto nearest = [](double s, std::size_t n) {
    const double r = std::floor(s + 0.5);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n) - 1.0));
  };
  for (std::size_t y = 0; y < mask.height; ++y) {
    const std::size_t sy = nearest(source_coord(y, mask.height, flip_v, scale, offset_y), mask.height);
    for (std::size_t x = 0; x < mask.width; ++x) {
      out.at(y, x) = mask.at(sy, nearest(source_coord(x, mask.width, flip_h, scale, offset_x), mask.width));
    }
  }
  return out;
}

GeometricTransform draw_geometric(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng) {
  GeometricTransform t;
  if (cfg.flip) {
    t.flip_h = coin(rng, cfg.flip_prob);
    t.flip_v = coin(rng, cfg.flip_prob);
  }
  if (cfg.scale_crop && coin(rng, cfg.scale_crop_prob)) {
    t.scale = uniform(rng, cfg.scale_min, cfg.scale_max);
    // Window position inside the rescaled image; negative slack pads by clamping.
    const double slack_y = (t.scale - 1.0) * static_cast<double>(height);
    const double slack_x = (t.scale - 1.0) * static_cast<double>(width);
    t.offset_y = std::round(uniform(rng, std::min(0.0, slack_y), std::max(0.0, slack_y)));
    t.offset_x = std::round(uniform(rng, std::min(0.0, slack_x), std::max(0.0, slack_x)));
  }
  return t;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;

  const auto h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  Image tmp(img.channels, img.height, img.width), out(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at(c, y, std::clamp(x + i, 0L, w - 1));
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(c, std::clamp(y + i, 0L, h - 1), x);
        out.at(c, y, x) = static_cast<float>(acc);
      }
  }
  return out;
}

Image color_jitter(const Image& img, double brightness, double contrast) {
  Image out = img;
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    float* p = out.data.data() + c * plane;
    double mean = 0;
    for (std::size_t i = 0; i < plane; ++i) mean += p[i] * brightness;
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = static_cast<float>(std::clamp((p[i] * brightness - mean) * contrast + mean, 0.0, 1.0));
    }
  }
  return out;
}

Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
  const auto& pre = sample.pair.pre;
  if (pre.height != sample.pair.post.height || pre.width != sample.pair.post.width ||
      pre.height != sample.mask.height || pre.width != sample.mask.width) {
    throw DimensionError("augment: pair and mask shapes differ");
  }
  const GeometricTransform t = draw_geometric(cfg, pre.height, pre.width, rng);
  Sample out;
  out.name = sample.name;
  out.pair.pre = t.apply(sample.pair.pre);
  out.pair.post = t.apply(sample.pair.post);
  out.mask = t.apply(sample.mask);
  for (Image* img : {&out.pair.pre, &out.pair.post}) {
    if (cfg.blur && coin(rng, cfg.blur_prob)) *img = gaussian_blur(*img, uniform(rng, 0.1, cfg.blur_sigma_max));
    if (cfg.color_jitter && coin(rng, cfg.jitter_prob)) {
      const double b = uniform(rng, 1.0 - cfg.jitter, 1.0 + cfg.jitter);
      const double c = uniform(rng, 1.0 - cfg.jitter, 1.0 + cfg.jitter);
      *img = color_jitter(*img, b, c);
    }
  }
  return out;
}

}  // namespace sparsecd
