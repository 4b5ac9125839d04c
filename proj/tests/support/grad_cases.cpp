#include "grad_cases.hpp"

#include <cmath>

#include "sparsecd/attention.hpp"
#include "sparsecd/fusion.hpp"

namespace sparsecd::testing {

namespace {

TensorD leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return init::uniform<double>(std::move(shape), lo, hi, rng, true);
}

// Magnitudes in [0.1, 1] with random sign: keeps ReLU inputs off the kink.
TensorD off_zero(Shape shape, Rng& rng) {
  auto t = leaf(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data()) v = sign(rng) ? v : -v;
  return t;
}

double frac(double v) { return v - std::floor(v); }

// True when every sample point is at least `margin` from an integer and from
// the clamping borders, so bilinear sampling is smooth in a neighbourhood.
bool smooth_points(const TensorD& coords, std::size_t height, std::size_t width, double margin) {
  const auto c = coords.data();
  for (std::size_t i = 0; i < c.size(); i += 2) {
    for (std::size_t a = 0; a < 2; ++a) {
      const double v = c[i + a];
      const double hi = static_cast<double>(a == 0 ? height : width) - 1.0;
      // Clamped points are smooth too; only the clamp edges and cell edges kink.
      if (std::abs(v) < margin || std::abs(v - hi) < margin) return false;
      if (v < 0.0 || v > hi) continue;
      const double f = frac(v);
      if (f < margin || f > 1.0 - margin) return false;
    }
  }
  return true;
}

// Per-pixel standard deviation across channels of a [B, C, H, W] map stays above `min_std`.
bool channels_spread(const TensorD& x, double min_std) {
  const std::size_t b = x.size(0), c = x.size(1), hw = x.size(2) * x.size(3);
  const auto v = x.data();
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t i = 0; i < hw; ++i) {
      double mean = 0, sq = 0;
      for (std::size_t k = 0; k < c; ++k) mean += v[(n * c + k) * hw + i];
      mean /= static_cast<double>(c);
      for (std::size_t k = 0; k < c; ++k) sq += std::pow(v[(n * c + k) * hw + i] - mean, 2);
      if (std::sqrt(sq / static_cast<double>(c)) < min_std) return false;
    }
  return true;
}

bool all_off_zero(const TensorD& t, double margin) {
  for (double v : t.data()) {
    if (std::abs(v) < margin) return false;
  }
  return true;
}

void add_attention(std::vector<std::pair<std::string, TensorD>>& leaves, const AttentionParams<double>& p) {
  NamedTensors<double> named;
  p.collect("attn.", named);
  for (auto& n : named) leaves.push_back(n);
}

OffsetParams<double> random_offsets(std::size_t dim, double scale, Rng& rng) {
  return {leaf(Shape{2, dim, 3, 3}, rng, -scale, scale), leaf(Shape{2}, rng, -scale, scale)};
}

// Offsets from predict_offsets on `f` land on smooth sample points.
bool offsets_smooth(const TensorD& f, const OffsetParams<double>& off, double clip, std::size_t gamma) {
  NoGradGuard ng;
  const auto field = predict_offsets(f, off, clip);
  const auto s = sparse_shuffle(f, field, gamma);
  return smooth_points(s.coords, f.size(2), f.size(3), 0.02);
}

SSAConfig small_ssa(std::size_t gamma) {
  SSAConfig c;
  c.gamma = gamma;
  c.offset_clip = 1.5;
  c.heads = 2;
  c.dim = 4;
  c.mlp_ratio = 2;
  return c;
}

GradCase binary(std::string name, TensorD (*op)(const TensorD&, const TensorD&)) {
  return {name, [op](Rng& rng) {
            auto a = leaf({2, 3, 4}, rng), b = leaf({2, 3, 4}, rng);
            return GradInstance{{{"a", a}, {"b", b}}, [=] { return op(a, b); }};
          }};
}

GradCase unary(std::string name, std::function<TensorD(const TensorD&)> op, bool avoid_zero = false) {
  return {name, [op, avoid_zero](Rng& rng) {
            auto x = avoid_zero ? off_zero({2, 3, 4}, rng) : leaf({2, 3, 4}, rng, -2.0, 2.0);
            return GradInstance{{{"x", x}}, [=] { return op(x); }};
          }};
}

GradCase bmm_case(bool ta, bool tb) {
  return {std::string("bmm") + (ta ? "_ta" : "") + (tb ? "_tb" : ""), [ta, tb](Rng& rng) {
            auto a = ta ? leaf({2, 4, 3}, rng) : leaf({2, 3, 4}, rng);
            auto b = tb ? leaf({2, 5, 4}, rng) : leaf({2, 4, 5}, rng);
            return GradInstance{{{"a", a}, {"b", b}}, [=] { return ops::bmm(a, b, ta, tb); }};
          }};
}

GradCase diff_case(FusionMode mode) {
  return {"diff_fuse_" + std::string(to_string(mode)), [mode](Rng& rng) {
            for (;;) {
              auto pre = leaf({1, 3, 4, 4}, rng), post = leaf({1, 3, 4, 4}, rng);
              auto p = DiffParams<double>::init(3, mode, rng);
              p.conv1_weight = leaf(p.conv1_weight.shape(), rng, -0.5, 0.5);
              p.norm_weight = leaf({3}, rng, 0.5, 1.5);
              p.norm_bias = leaf({3}, rng, -0.2, 0.2);
              {
                NoGradGuard ng;
                auto x = ops::conv2d(combine_streams(pre, post, mode), p.conv1_weight, p.conv1_bias, 1, 1);
                // A small spread across channels makes the norm sharply curved.
                if (!channels_spread(x, 0.3)) continue;
                if (!all_off_zero(ops::layer_norm(x, 1, p.norm_weight, p.norm_bias), 0.05)) continue;
              }
              NamedTensors<double> named;
              p.collect("", named);
              GradInstance inst{{{"pre", pre}, {"post", post}}, [=] { return diff_fuse(pre, post, mode, p); }};
              for (auto& n : named) inst.leaves.push_back(n);
              return inst;
            }
          }};
}

std::vector<GradCase> build() {
  std::vector<GradCase> cases;
  cases.push_back(binary("add", [](const TensorD& a, const TensorD& b) { return ops::add(a, b); }));
  cases.push_back(binary("sub", [](const TensorD& a, const TensorD& b) { return ops::sub(a, b); }));
  cases.push_back(binary("mul", [](const TensorD& a, const TensorD& b) { return ops::mul(a, b); }));
  cases.push_back(unary("add_scalar", [](const TensorD& x) { return ops::add_scalar(x, 0.7); }));
  cases.push_back(unary("mul_scalar", [](const TensorD& x) { return ops::mul_scalar(x, -1.3); }));
  cases.push_back(unary("relu", [](const TensorD& x) { return ops::relu(x); }, true));
  cases.push_back(unary("gelu", [](const TensorD& x) { return ops::gelu(x); }));
  cases.push_back(unary("tanh", [](const TensorD& x) { return ops::tanh(x); }));
  cases.push_back({"clamp", [](Rng& rng) {
                     // Values kept 0.05 away from the bounds +-0.5.
                     auto x = off_zero({2, 3, 4}, rng);
                     for (auto& v : x.data()) {
                       if (std::abs(std::abs(v) - 0.5) < 0.05) v *= 1.25;
                     }
                     return GradInstance{{{"x", x}}, [=] { return ops::clamp(x, -0.5, 0.5); }};
                   }});
  cases.push_back(unary("sum", [](const TensorD& x) { return ops::sum(x); }));
  cases.push_back(unary("mean", [](const TensorD& x) { return ops::mean(x); }));
  cases.push_back({"scale_channels", [](Rng& rng) {
                     auto x = leaf({2, 3, 4, 4}, rng), w = leaf({2, 3}, rng);
                     return GradInstance{{{"x", x}, {"w", w}}, [=] { return ops::scale_channels(x, w); }};
                   }});
  cases.push_back(unary("reshape", [](const TensorD& x) { return ops::reshape(x, Shape{4, 6}); }));
  cases.push_back(unary("permute", [](const TensorD& x) { return ops::permute(x, {2, 0, 1}); }));
  cases.push_back(unary("narrow", [](const TensorD& x) { return ops::narrow(x, 2, 1, 2); }));
  cases.push_back({"concat", [](Rng& rng) {
                     auto a = leaf({2, 2, 3}, rng), b = leaf({2, 1, 3}, rng);
                     return GradInstance{{{"a", a}, {"b", b}}, [=] { return ops::concat<double>({a, b, a}, 1); }};
                   }});
  cases.push_back({"matmul", [](Rng& rng) {
                     auto a = leaf({3, 4}, rng), b = leaf({4, 5}, rng);
                     return GradInstance{{{"a", a}, {"b", b}}, [=] { return ops::matmul(a, b); }};
                   }});
  for (bool ta : {false, true})
    for (bool tb : {false, true}) cases.push_back(bmm_case(ta, tb));
  cases.push_back({"conv1x1", [](Rng& rng) {
                     auto x = leaf({2, 3, 3, 4}, rng), w = leaf({5, 3}, rng), b = leaf({5}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}}, [=] { return ops::conv1x1(x, w, b); }};
                   }});
  cases.push_back({"conv1x1_fc", [](Rng& rng) {
                     auto x = leaf({2, 3}, rng), w = leaf({4, 3}, rng), b = leaf({4}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}}, [=] { return ops::conv1x1(x, w, b); }};
                   }});
  cases.push_back({"conv2d_3x3_s2", [](Rng& rng) {
                     auto x = leaf({2, 3, 7, 7}, rng), w = leaf({4, 3, 3, 3}, rng), b = leaf({4}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}}, [=] { return ops::conv2d(x, w, b, 2, 1); }};
                   }});
  cases.push_back({"conv2d_7x7_s4", [](Rng& rng) {
                     auto x = leaf({1, 2, 12, 12}, rng), w = leaf({3, 2, 7, 7}, rng), b = leaf({3}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}}, [=] { return ops::conv2d(x, w, b, 4, 3); }};
                   }});
  cases.push_back({"conv_transpose2d", [](Rng& rng) {
                     auto x = leaf({1, 3, 4, 4}, rng), w = leaf({3, 2, 4, 4}, rng), b = leaf({2}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}},
                                         [=] { return ops::conv_transpose2d(x, w, b, 2, 1); }};
                   }});
  cases.push_back({"global_avg_pool", [](Rng& rng) {
                     auto x = leaf({2, 3, 4, 5}, rng);
                     return GradInstance{{{"x", x}}, [=] { return ops::global_avg_pool(x); }};
                   }});
  cases.push_back({"softmax", [](Rng& rng) {
                     auto x = leaf({2, 4, 3}, rng, -3.0, 3.0);
                     return GradInstance{{{"x", x}}, [=] { return ops::add(ops::softmax(x, 1), ops::softmax(x, 2)); }};
                   }});
  cases.push_back({"layer_norm", [](Rng& rng) {
                     auto x = leaf({2, 5, 3, 3}, rng), w = leaf({5}, rng), b = leaf({5}, rng);
                     return GradInstance{{{"x", x}, {"w", w}, {"b", b}}, [=] { return ops::layer_norm(x, 1, w, b); }};
                   }});
  cases.push_back({"bilinear_sample", [](Rng& rng) {
                     auto x = leaf({1, 2, 5, 6}, rng);
                     auto coords = leaf({1, 3, 4, 2}, rng);
                     std::uniform_real_distribution<double> cell(0.1, 0.9);
                     std::uniform_int_distribution<int> row(0, 3), col(0, 4);
                     auto c = coords.data();
                     for (std::size_t i = 0; i < c.size(); i += 2) {
                       c[i] = row(rng) + cell(rng);
                       c[i + 1] = col(rng) + cell(rng);
                     }
                     return GradInstance{{{"x", x}, {"coords", coords}}, [=] { return ops::bilinear_sample(x, coords); }};
                   }});
  cases.push_back({"resize_bilinear", [](Rng& rng) {
                     auto x = leaf({1, 2, 4, 6}, rng), y = leaf({1, 2, 8, 8}, rng);
                     return GradInstance{{{"x", x}, {"y", y}}, [=] {
                                           return ops::add(ops::resize_bilinear(x, 5, 5), ops::resize_bilinear(y, 5, 5));
                                         }};
                   }});
  cases.push_back({"cross_entropy", [](Rng& rng) {
                     auto logits = leaf({2, 3, 3, 3}, rng, -3.0, 3.0);
                     std::vector<std::uint8_t> targets(2 * 9);
                     std::uniform_int_distribution<int> cls(0, 2);
                     for (auto& t : targets) t = static_cast<std::uint8_t>(cls(rng));
                     return GradInstance{{{"logits", logits}}, [=] { return ops::cross_entropy(logits, targets); }};
                   }});
  for (ClipMode mode : {ClipMode::smooth, ClipMode::hard}) {
    cases.push_back({mode == ClipMode::smooth ? "predict_offsets_smooth" : "predict_offsets_hard", [mode](Rng& rng) {
                       for (;;) {
                         auto f = leaf({1, 3, 4, 4}, rng);
                         auto p = random_offsets(3, 0.5, rng);
                         {
                           NoGradGuard ng;
                           auto raw = ops::conv2d(f, p.weight, p.bias, 1, 1);
                           bool near_bound = false;
                           for (double v : raw.data()) near_bound |= std::abs(std::abs(v) - 1.0) < 0.02;
                           if (near_bound) continue;
                         }
                         return GradInstance{{{"f", f}, {"w", p.weight}, {"b", p.bias}},
                                             [=] { return predict_offsets(f, p, 1.0, mode).values; }};
                       }
                     }});
  }
  cases.push_back({"sparse_shuffle", [](Rng& rng) {
                     // Offsets chosen so every sample point is interior and non-integer.
                     const std::size_t n = 4;
                     auto f = leaf({1, 2, n, n}, rng);
                     auto off = leaf({1, 2, n, n}, rng);
                     std::uniform_real_distribution<double> target(0.1, n - 1.1);
                     auto o = off.data();
                     for (std::size_t a = 0; a < 2; ++a)
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < n; ++c) {
                           double t;
                           do t = target(rng);
                           while (frac(t) < 0.1 || frac(t) > 0.9);
                           o[(a * n + r) * n + c] = t - static_cast<double>(a == 0 ? r : c);
                         }
                     return GradInstance{{{"f", f}, {"offsets", off}}, [=] {
                                           return sparse_shuffle(f, OffsetField<double>{off, 2.0}, 2).values;
                                         }};
                   }});
  cases.push_back({"unshuffle", [](Rng& rng) {
                     auto v = leaf({1, 4, 2, 2, 3}, rng);
                     return GradInstance{{{"subsets", v}}, [=] {
                                           return unshuffle(SparseSubsets<double>{v, TensorD{}, 2});
                                         }};
                   }});
  cases.push_back({"dense_attention", [](Rng& rng) {
                     auto x = leaf({1, 4, 3, 3}, rng);
                     auto p = AttentionParams<double>::init(4, rng);
                     GradInstance inst{{{"x", x}}, [=] { return dense_attention(x, p, 2); }};
                     add_attention(inst.leaves, p);
                     return inst;
                   }});
  for (std::size_t gamma : {1, 2}) {
    cases.push_back({"ssa_forward_gamma" + std::to_string(gamma), [gamma](Rng& rng) {
                       const auto cfg = small_ssa(gamma);
                       for (;;) {
                         auto f = leaf({1, 4, 4, 4}, rng);
                         SSAParams<double> p{random_offsets(4, 0.3, rng), AttentionParams<double>::init(4, rng)};
                         if (!offsets_smooth(f, p.offset, cfg.offset_clip, gamma)) continue;
                         GradInstance inst{{{"f", f}, {"offset.w", p.offset.weight}, {"offset.b", p.offset.bias}},
                                           [=] { return ssa_forward(f, cfg, p); }};
                         add_attention(inst.leaves, p.attention);
                         return inst;
                       }
                     }});
  }
  cases.push_back({"ssa_layer", [](Rng& rng) {
                     const auto cfg = small_ssa(2);
                     for (;;) {
                       auto f = leaf({1, 4, 4, 4}, rng);
                       auto p = SSALayerParams<double>::init(cfg, rng);
                       p.ssa.offset = random_offsets(4, 0.3, rng);
                       p.norm1_weight = leaf({4}, rng, 0.5, 1.5);
                       p.norm1_bias = leaf({4}, rng, -0.2, 0.2);
                       {
                         NoGradGuard ng;
                         auto normed = ops::layer_norm(f, 1, p.norm1_weight, p.norm1_bias);
                         if (!offsets_smooth(normed, p.ssa.offset, cfg.offset_clip, 2)) continue;
                       }
                       NamedTensors<double> named;
                       p.collect("", named);
                       GradInstance inst{{{"f", f}}, [=] { return ssa_layer(f, cfg, p); }};
                       for (auto& n : named) inst.leaves.push_back(n);
                       return inst;
                     }
                   }});
  cases.push_back({"ceff", [](Rng& rng) {
                     for (;;) {
                       auto pre = leaf({2, 6, 3, 3}, rng), post = leaf({2, 6, 3, 3}, rng);
                       auto p = CEFFParams<double>::init(6, 2, rng);
                       p.reduce_bias = leaf({3}, rng, -0.3, 0.3);
                       p.pre_bias = leaf({6}, rng, -0.3, 0.3);
                       p.post_bias = leaf({6}, rng, -0.3, 0.3);
                       {
                         NoGradGuard ng;
                         auto z = ops::conv1x1(ops::global_avg_pool(ops::add(pre, post)), p.reduce_weight, p.reduce_bias);
                         if (!all_off_zero(z, 0.01)) continue;
                       }
                       NamedTensors<double> named;
                       p.collect("", named);
                       GradInstance inst{{{"pre", pre}, {"post", post}}, [=] { return ceff(pre, post, p).enhanced; }};
                       for (auto& n : named) inst.leaves.push_back(n);
                       return inst;
                     }
                   }});
  for (FusionMode m : {FusionMode::subtract, FusionMode::add, FusionMode::concat}) cases.push_back(diff_case(m));
  return cases;
}

}  // namespace

const std::vector<GradCase>& grad_cases() {
  static const std::vector<GradCase> cases = build();
  return cases;
}

}  // namespace sparsecd::testing
