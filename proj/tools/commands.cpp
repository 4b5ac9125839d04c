#include "commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <random>

#include "run_config.hpp"
#include "sparsecd/bench.hpp"
#include "sparsecd/checkpoint.hpp"
#include "sparsecd/dataset.hpp"
#include "sparsecd/errors.hpp"
#include "sparsecd/synthetic.hpp"
#include "sparsecd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sparsecd::cli {

namespace {

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.png", i);
  return buf;
}

}  // namespace

void cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& log) {
  if (o.n == 0) throw ConfigError("--n must be positive");
  SyntheticSpec spec = SyntheticSpec::with_nuisance(o.size, o.nuisance);
  if (o.changes) {
    spec.max_changes = *o.changes;
    spec.min_changes = std::min<std::size_t>(1, *o.changes);
  }
  spec.validate();
  const std::uint64_t seed = o.seed ? *o.seed : fresh_seed();
  if (!o.seed) log << "seed: " << seed << '\n';

  ensure_dir(o.out);
  json files = json::array();
  for (std::size_t i = 0; i < o.n; ++i) {
    Sample s = generate_pair(spec, mix_seed(seed, i));
    s.name = sample_name(i);
    write_sample(o.out, s);
    files.push_back(s.name);
  }
  json manifest = {
      {"seed", seed},
      {"n", o.n},
      {"nuisance", o.nuisance},
      {"spec",
       {{"size", spec.size},
        {"background_shapes", spec.background_shapes},
        {"min_changes", spec.min_changes},
        {"max_changes", spec.max_changes},
        {"min_change_size", spec.min_change_size},
        {"max_change_size", spec.max_change_size},
        {"brightness_shift", spec.brightness_shift},
        {"noise_sigma", spec.noise_sigma},
        {"shadows", spec.shadows},
        {"shadow_strength", spec.shadow_strength}}},
      {"files", files},
  };
  write_text(o.out / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << o.n << " pairs to " << o.out.string() << '\n';
}

void cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& log) {
  json j = o.config ? read_json_file(*o.config) : json::object();
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  if (o.preset) j["preset"] = *o.preset;
  if (o.seed) j["seed"] = *o.seed;
  if (o.epochs) j["epochs"] = *o.epochs;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.lr) j["lr"] = *o.lr;
  if (o.gamma) j["gamma"] = *o.gamma;
  if (o.fusion) j["fusion"] = *o.fusion;
  if (o.data) j["data"] = o.data->string();
  if (o.out) j["out"] = o.out->string();
  RunConfig rc = parse_run_config(j);
  if (!rc.data) throw ConfigError("no data directory (use --data or the 'data' key)");
  if (!rc.out) throw ConfigError("no output directory (use --out or the 'out' key)");
  if (!rc.seed_given) {
    rc.train.seed = fresh_seed();
    rc.seed_given = true;
    log << "seed: " << rc.train.seed << '\n';
  }

  Split split = load_split(*rc.data, rc.val_fraction);
  if (split.train.empty()) throw ConfigError("no training samples under " + rc.data->string());
  for (const Dataset* d : {&split.train, &split.val}) {
    for (const auto& s : *d) {
      if (s.pair.pre.height != s.pair.pre.width) throw GeometryError("non-square sample " + s.name);
    }
  }
  ensure_dir(*rc.out);
  write_text(*rc.out / "run_config.json", to_json(rc).dump(2) + "\n");
  log << "train " << split.train.size() << " / val " << split.val.size() << " samples\n";

  ChangeDetector model(rc.model, rc.train.seed);
  FitOptions fo;
  fo.out_dir = *rc.out;
  fo.on_epoch = [&](const EpochLog& e) { log << format_log_line(e) << '\n'; };
  const auto history = fit(model, split.train, split.val, rc.train, fo);
  out << format_log_line(history.back()) << '\n';
}

void cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& log) {
  const fs::path cfg_path = o.config ? *o.config : o.ckpt.parent_path() / "run_config.json";
  if (!fs::exists(cfg_path)) {
    throw ConfigError("no model config: " + cfg_path.string() + " does not exist (use --config)");
  }
  if (o.batch_size == 0) throw ConfigError("--batch-size must be positive");
  RunConfig rc = parse_run_config(read_json_file(cfg_path));
  ChangeDetector model(rc.model, 0);
  load_model(o.ckpt, model);

  // A root holding a train/val split is scored on its validation part.
  fs::path root = o.data;
  if (!fs::is_directory(root / "A") && fs::is_directory(root / "val")) root /= "val";
  if (!fs::is_directory(root)) throw IoError("data directory does not exist: " + o.data.string());
  const Dataset data = load_dataset(root);
  if (data.empty()) throw ConfigError("no samples under " + root.string());
  for (const auto& s : data) {
    if (s.pair.pre.height != s.pair.pre.width) throw GeometryError("non-square sample " + s.name);
  }

  const auto masks = predict_masks(model, data, o.batch_size);
  ConfusionCounts counts;
  for (std::size_t i = 0; i < data.size(); ++i) counts += confusion(masks[i], data[i].mask);
  if (o.dump_masks) {
    ensure_dir(*o.dump_masks);
    for (std::size_t i = 0; i < data.size(); ++i) write_png_mask(*o.dump_masks / data[i].name, masks[i]);
  }
  const auto r = metrics(counts);
  json report = {{"f1", r.f1}, {"iou", r.iou}, {"oa", r.oa},   {"tp", counts.tp},
                 {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}, {"samples", data.size()}};
  out << report.dump() << '\n';
  log << "evaluated " << data.size() << " samples\n";
}

void cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& log) {
  BenchConfig cfg;
  cfg.gammas = o.gammas;
  cfg.sizes = o.sizes;
  cfg.channels = o.channels;
  cfg.repeats = o.repeats;
  cfg.seed = o.seed;
  cfg.validate();
  out << bench_csv_header() << '\n';
  for (auto size : cfg.sizes) {
    BenchConfig one = cfg;
    one.sizes = {size};
    for (const auto& row : run_attention_bench(one)) {
      out << to_csv(row) << '\n' << std::flush;
    }
    log << "size " << size << " done\n";
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
  CLI::App app{"Sparse-attention change detection: synthesize data, train, evaluate, benchmark"};
  app.require_subcommand(1);

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Write synthetic A/ B/ label/ triples and manifest.json");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--n", so.n, "Number of pairs");
  synth->add_option("--size", so.size, "Image side in pixels");
  synth->add_option("--seed", so.seed, "Seed (random and printed when omitted)");
  synth->add_option("--nuisance", so.nuisance, "Nuisance level (0 = none, 1 = default)");
  synth->add_option("--changes", so.changes, "Maximum semantic changes per pair");

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and metrics.log");
  train->add_option("--config", to.config, "Flat JSON run config")->check(CLI::ExistingFile);
  train->add_option("--data", to.data, "Dataset root (A/ B/ label/, or train/ and val/)");
  train->add_option("--out", to.out, "Output directory");
  train->add_option("--seed", to.seed, "Seed (random and printed when omitted)");
  train->add_option("--epochs", to.epochs, "Override epochs");
  train->add_option("--batch-size", to.batch_size, "Override batch_size");
  train->add_option("--lr", to.lr, "Override lr");
  train->add_option("--gamma", to.gamma, "Override gamma");
  train->add_option("--fusion", to.fusion, "Override fusion (ceff, subtract, add, concat)");
  train->add_option("--preset", to.preset, "Override preset (toy, full)");
  train->footer("Config keys:\n" + schema_help());

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint; prints JSON metrics");
  eval->add_option("--ckpt", eo.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eo.data, "Dataset root")->required();
  eval->add_option("--config", eo.config, "Run config (default: run_config.json beside the checkpoint)");
  eval->add_option("--dump-masks", eo.dump_masks, "Write predicted masks (0/255 PNG) here");
  eval->add_option("--batch-size", eo.batch_size, "Inference batch size");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Time dense vs sparse attention; prints CSV");
  bench->add_option("--gammas", bo.gammas, "Sparsity factors")->delimiter(',');
  bench->add_option("--size", bo.sizes, "Feature map sides")->delimiter(',');
  bench->add_option("--channels", bo.channels, "Channels");
  bench->add_option("--repeats", bo.repeats, "Timed repeats per cell (median reported)");
  bench->add_option("--seed", bo.seed, "Input seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = e.get_exit_code();
    (code == 0 ? out : log) << (code == 0 ? app.help() : std::string(e.what()) + "\n");
    if (code == 0) return kOk;
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) log << sub->help();
    return kValidationError;
  }

  try {
    if (*synth) cmd_synth(so, out, log);
    else if (*train) cmd_train(to, out, log);
    else if (*eval) cmd_eval(eo, out, log);
    else if (*bench) cmd_bench(bo, out, log);
    return kOk;
  } catch (const std::invalid_argument& e) {  // config, dimension, geometry, label errors
    log << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace sparsecd::cli
