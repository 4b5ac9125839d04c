#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sparsecd::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kRuntimeError = 2 };

struct SynthOptions {
  std::filesystem::path out;
  std::size_t n = 10;
  std::size_t size = 64;
  std::optional<std::uint64_t> seed;
  double nuisance = 1.0;
  std::optional<std::size_t> changes;  // max semantic changes per pair
};

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;
  // Flag overrides, applied on top of the config file.
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> gamma;
  std::optional<std::string> fusion;
  std::optional<std::string> preset;
};

struct EvalOptions {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;  // default: run_config.json beside the checkpoint
  std::optional<std::filesystem::path> dump_masks;
  std::size_t batch_size = 8;
};

struct BenchOptions {
  std::vector<std::size_t> gammas{1, 2, 4, 8};
  std::vector<std::size_t> sizes{64, 128};
  std::size_t channels = 64;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
};

// Each command reports results on `out` and progress on `log`; errors
// propagate as exceptions.
void cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& log);
void cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& log);
void cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& log);
void cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& log);

/// Full command-line entry point; maps exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace sparsecd::cli
