#include "sparsecd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "sparsecd/errors.hpp"
#include "sparsecd/init.hpp"

namespace sparsecd {

SyntheticSpec SyntheticSpec::with_nuisance(std::size_t size, double level) {
  if (!(level >= 0.0)) throw ConfigError("nuisance level must be non-negative");
  SyntheticSpec s;
  s.size = size;
  s.min_change_size = std::max<std::size_t>(2, size / 8);
  s.max_change_size = std::max(s.min_change_size, size * 5 / 16);
  s.brightness_shift = 0.12 * level;
  s.noise_sigma = 0.02 * level;
  s.shadows = static_cast<std::size_t>(std::lround(2.0 * level));
  return s;
}

void SyntheticSpec::validate() const {
  if (size < 4) throw ConfigError("synthetic image size must be at least 4");
  if (min_changes > max_changes) throw ConfigError("min_changes exceeds max_changes");
  if (min_change_size == 0 || min_change_size > max_change_size) {
    throw ConfigError("change size range is empty");
  }
  if (brightness_shift < 0 || noise_sigma < 0 || shadow_strength < 0 || shadow_strength > 1) {
    throw ConfigError("nuisance parameters out of range");
  }
}

namespace {

struct Rect {
  std::size_t y0, x0, h, w;
  bool overlaps(const Rect& o, std::size_t gap) const {
    return y0 < o.y0 + o.h + gap && o.y0 < y0 + h + gap && x0 < o.x0 + o.w + gap && o.x0 < x0 + w + gap;
  }
};

using Color = std::array<float, 3>;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void fill_rect(Image& img, const Rect& r, const Color& c) {
  for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
    for (std::size_t x = r.x0; x < r.x0 + r.w; ++x)
      for (std::size_t k = 0; k < 3; ++k) img.at(k, y, x) = c[k];
}

// Muted vegetation/soil/pavement tones.
Color ground_color(Rng& rng) {
  const double base = uniform(rng, 0.2, 0.5);
  return {static_cast<float>(base + uniform(rng, -0.08, 0.08)), static_cast<float>(base + uniform(rng, -0.05, 0.1)),
          static_cast<float>(base + uniform(rng, -0.1, 0.05))};
}

// Bright roofs stand apart from the ground palette.
Color roof_color(Rng& rng) {
  const double base = uniform(rng, 0.72, 0.95);
  return {static_cast<float>(std::min(1.0, base + uniform(rng, -0.05, 0.05))),
          static_cast<float>(std::min(1.0, base + uniform(rng, -0.12, 0.02))),
          static_cast<float>(std::min(1.0, base + uniform(rng, -0.2, 0.0)))};
}

bool inside_convex(const std::array<std::array<double, 2>, 4>& quad, double y, double x) {
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = quad[i];
    const auto& b = quad[(i + 1) % 4];
    const double cross = (b[1] - a[1]) * (y - a[0]) - (b[0] - a[0]) * (x - a[1]);
    const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

}  // namespace

Sample generate_pair(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.max_changes > 0 && spec.min_change_size > spec.size) {
    throw GeometryError("change rectangles of side " + std::to_string(spec.min_change_size) +
                        " cannot fit a " + std::to_string(spec.size) + " image");
  }
  Rng rng(mix_seed(seed, 0x5eed));
  const std::size_t n = spec.size;

  // Shared scene: tinted gradient, fixed texture, persistent shapes.
  Image scene(3, n, n);
  const Color base = ground_color(rng);
  std::array<double, 3> gy{}, gx{};
  for (std::size_t k = 0; k < 3; ++k) {
    gy[k] = uniform(rng, -0.1, 0.1);
    gx[k] = uniform(rng, -0.1, 0.1);
  }
  std::normal_distribution<double> texture(0.0, 0.015);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double fy = static_cast<double>(y) / static_cast<double>(n) - 0.5;
      const double fx = static_cast<double>(x) / static_cast<double>(n) - 0.5;
      for (std::size_t k = 0; k < 3; ++k) {
        scene.at(k, y, x) = static_cast<float>(base[k] + gy[k] * fy + gx[k] * fx + texture(rng));
      }
    }
  }
  for (std::size_t s = 0; s < spec.background_shapes; ++s) {
    const std::size_t h = uniform_int(rng, std::max<std::size_t>(1, n / 16), std::max<std::size_t>(1, n / 3));
    const std::size_t w = uniform_int(rng, std::max<std::size_t>(1, n / 16), std::max<std::size_t>(1, n / 3));
    const Rect r{uniform_int(rng, 0, n - h), uniform_int(rng, 0, n - w), h, w};
    const Color c = ground_color(rng);
    if (uniform_int(rng, 0, 1) == 0) {
      fill_rect(scene, r, c);
    } else {
      const double cy = r.y0 + r.h / 2.0, cx = r.x0 + r.w / 2.0;
      for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
        for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) {
          const double dy = (y + 0.5 - cy) / (r.h / 2.0), dx = (x + 0.5 - cx) / (r.w / 2.0);
          if (dy * dy + dx * dx <= 1.0)
            for (std::size_t k = 0; k < 3; ++k) scene.at(k, y, x) = c[k];
        }
    }
  }

  Sample out;
  out.pair.pre = scene;
  out.pair.post = scene;
  out.mask = ChangeMask(n, n);

  // Semantic changes: non-overlapping rectangles present in exactly one image.
  const std::size_t changes = uniform_int(rng, spec.min_changes, spec.max_changes);
  std::vector<Rect> placed;
  const std::size_t max_side = std::min(spec.max_change_size, n);
  for (std::size_t i = 0; i < changes; ++i) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      const std::size_t h = uniform_int(rng, spec.min_change_size, max_side);
      const std::size_t w = uniform_int(rng, spec.min_change_size, max_side);
      const Rect r{uniform_int(rng, 0, n - h), uniform_int(rng, 0, n - w), h, w};
      if (std::any_of(placed.begin(), placed.end(), [&](const Rect& o) { return r.overlaps(o, 1); })) continue;
      placed.push_back(r);
      ok = true;
    }
    if (!ok) {
      throw GeometryError("could not place " + std::to_string(changes) + " change rectangles in a " +
                          std::to_string(n) + "x" + std::to_string(n) + " image after " +
                          std::to_string(spec.max_retries) + " attempts");
    }
    const Rect& r = placed.back();
    const Color roof = roof_color(rng);
    Image& target = uniform_int(rng, 0, 1) == 0 ? out.pair.post : out.pair.pre;
    fill_rect(target, r, roof);
    for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
      for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) out.mask.at(y, x) = 1;
  }

  // Nuisance: never written to the mask.
  if (spec.brightness_shift > 0) {
    const float shift = static_cast<float>(uniform(rng, -spec.brightness_shift, spec.brightness_shift));
    for (auto& v : out.pair.post.data) v += shift;
  }
  for (std::size_t s = 0; s < spec.shadows; ++s) {
    const double cy = uniform(rng, 0, n), cx = uniform(rng, 0, n);
    const double radius = uniform(rng, n / 10.0, n / 4.0);
    std::array<std::array<double, 2>, 4> quad{};
    for (std::size_t v = 0; v < 4; ++v) {
      const double angle = (static_cast<double>(v) + uniform(rng, 0.0, 0.8)) * (std::numbers::pi / 2.0);
      const double rr = radius * uniform(rng, 0.6, 1.0);
      quad[v] = {cy + rr * std::sin(angle), cx + rr * std::cos(angle)};
    }
    const float keep = static_cast<float>(1.0 - spec.shadow_strength);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        if (inside_convex(quad, y + 0.5, x + 0.5))
          for (std::size_t k = 0; k < 3; ++k) out.pair.post.at(k, y, x) *= keep;
  }
  if (spec.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : out.pair.pre.data) v += static_cast<float>(noise(rng));
    for (auto& v : out.pair.post.data) v += static_cast<float>(noise(rng));
  }

  quantize_8bit(out.pair.pre);
  quantize_8bit(out.pair.post);
  return out;
}

}  // namespace sparsecd
