#include "sparsecd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "sparsecd/attention.hpp"
#include "sparsecd/errors.hpp"
#include "sparsecd/init.hpp"

namespace sparsecd {

void BenchConfig::validate() const {
  if (gammas.empty() || sizes.empty()) throw ConfigError("bench needs at least one gamma and one size");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (repeats == 0) throw ConfigError("repeats must be positive");
  for (auto g : gammas) {
    if (!is_power_of_two(g)) throw ConfigError("gamma must be a power of two, got " + std::to_string(g));
    for (auto s : sizes) {
      if (s == 0 || s % g != 0) {
        throw GeometryError("size " + std::to_string(s) + " is not divisible by gamma " + std::to_string(g));
      }
    }
  }
}

std::vector<BenchRow> run_attention_bench(const BenchConfig& cfg) {
  cfg.validate();
  NoGradGuard no_grad;
  std::vector<BenchRow> rows;
  for (auto size : cfg.sizes) {
    Rng rng(mix_seed(cfg.seed, size));
    const auto x = init::normal<float>(Shape{1, cfg.channels, size, size}, 0.0f, 1.0f, rng);
    for (auto gamma : cfg.gammas) {
      SSAConfig sc;
      sc.gamma = gamma;
      sc.offset_clip = static_cast<double>(gamma);
      sc.dim = cfg.channels;
      sc.heads = std::max<std::size_t>(1, cfg.channels / 64);
      Rng prng(mix_seed(cfg.seed, size, gamma));
      const auto params = SSAParams<float>::init(sc, prng);

      BenchRow row;
      row.gamma = gamma;
      row.size = size;
      std::vector<double> times;
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        AttentionMacs macs;
        const auto base = memory_stats().current_bytes;
        reset_peak_memory();
        const auto t0 = std::chrono::steady_clock::now();
        {
          ScopedMacCounter counter(macs);
          auto y = ssa_forward(x, sc, params);
        }
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        row.flops = macs.total();
        row.bytes = std::max(row.bytes, memory_stats().peak_bytes - base);
      }
      std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
      row.ms = times[times.size() / 2];
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv_header() { return "gamma,size,flops,ms,bytes"; }

std::string to_csv(const BenchRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%llu,%.3f,%lld", row.gamma, row.size,
                static_cast<unsigned long long>(row.flops), row.ms, static_cast<long long>(row.bytes));
  return buf;
}

}  // namespace sparsecd
