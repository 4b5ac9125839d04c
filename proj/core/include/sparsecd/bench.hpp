#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sparsecd {

struct BenchConfig {
  std::vector<std::size_t> gammas{1, 2, 4, 8};
  std::vector<std::size_t> sizes{64, 128};
  std::size_t channels = 64;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;

  /// Every size must be divisible by every gamma.
  void validate() const;
};

struct BenchRow {
  std::size_t gamma = 0;
  std::size_t size = 0;
  std::uint64_t flops = 0;  // attention multiply-accumulates (scores + weighted values)
  double ms = 0;            // median wall time of one ssa_forward
  std::int64_t bytes = 0;   // peak tensor bytes allocated during one call
};

/// Times inference-mode ssa_forward on a [1, channels, size, size] map for
/// every (gamma, size) pair, sizes outermost.
std::vector<BenchRow> run_attention_bench(const BenchConfig& cfg);

std::string bench_csv_header();
std::string to_csv(const BenchRow& row);

}  // namespace sparsecd
