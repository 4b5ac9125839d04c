#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "grad_cases.hpp"
#include "sparsecd/attention.hpp"
#include "sparsecd/bench.hpp"
#include "sparsecd/fusion.hpp"
#include "sparsecd/metrics.hpp"
#include "sparsecd/synthetic.hpp"
#include "sparsecd/trainer.hpp"
#include "temp_dir.hpp"

using namespace sparsecd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

// 1. Every differentiable op agrees with central differences in double.
Verdict gradient_suite() {
  constexpr std::size_t kInstances = 20;
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_at;
  std::size_t failed = 0;
  for (const auto& c : testing::grad_cases()) {
    for (std::size_t i = 0; i < kInstances; ++i) {
      Rng rng(mix_seed(0xacce, i));
      auto inst = c.make(rng);
      const auto r = testing::gradcheck(inst, i);
      if (r.max_rel_error >= 1e-4) ++failed;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_at = c.name + " " + r.worst;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 120,
          std::to_string(testing::grad_cases().size()) + " ops x " + std::to_string(kInstances) +
              " instances, worst rel error " + fmt(worst) + " (" + worst_at + "), " + std::to_string(failed) +
              " over 1e-4, " + fmt(secs, 3) + " s (limit 120 s)"};
}

// 2. gamma = 1 with zero offsets reduces to dense attention.
Verdict dense_equivalence() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(0xde5e, seed));
    SSAConfig cfg;
    cfg.gamma = 1;
    cfg.offset_clip = 1.0;
    cfg.dim = 32;
    cfg.heads = 1;
    const auto p = SSAParams<float>::init(cfg, rng);
    const auto f = init::normal<float>(Shape{1, 32, 16, 16}, 0.0f, 1.0f, rng);
    NoGradGuard ng;
    const auto a = ssa_forward(f, cfg, p), b = dense_attention(f, p.attention, cfg.heads);
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, double(std::abs(a.data()[i] - b.data()[i])));
  }
  return {worst <= 1e-5, "50 seeds at 1x32x16x16, max abs diff " + fmt(worst) + " (limit 1e-5)"};
}

// 3. unshuffle inverts sparse_shuffle bit for bit under zero offsets.
Verdict shuffle_bijection() {
  std::size_t mismatches = 0, maps = 0;
  for (std::size_t gamma : {2, 4, 8}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed, ++maps) {
      Rng rng(mix_seed(0xb17e, gamma, seed));
      const auto f = init::normal<float>(Shape{2, 3, 16, 24}, 0.0f, 1.0f, rng);
      const OffsetField<float> zero{TensorF(Shape{2, 2, 16, 24}), 1.0};
      const auto back = unshuffle(sparse_shuffle(f, zero, gamma));
      if (back.shape() != f.shape() ||
          std::memcmp(back.data().data(), f.data().data(), f.numel() * sizeof(float)) != 0) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(maps) + " maps over gamma 2/4/8, " + std::to_string(mismatches) +
                               " not bit-exact"};
}

// 4. Channel weights form a two-way softmax, tied parameters give the mean,
// and the output is a pixelwise convex combination.
Verdict ceff_contract() {
  double sum_err = 0, mean_err = 0, convex_excess = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(mix_seed(0xcef, seed));
    const std::size_t c = 4 + 4 * (seed % 8);
    const float scale = seed % 10 == 0 ? 1e3f : (seed % 10 == 1 ? 1e-3f : 1.0f);
    auto p = CEFFParams<float>::init(c, 4, rng);
    const auto a = init::normal<float>(Shape{2, c, 5, 7}, 0.0f, scale, rng);
    const auto b = init::normal<float>(Shape{2, c, 5, 7}, 0.0f, scale, rng);
    NoGradGuard ng;
    const auto r = ceff(a, b, p);
    for (std::size_t i = 0; i < r.weights.pre.numel(); ++i) {
      sum_err = std::max(sum_err, std::abs(double(r.weights.pre.data()[i]) + r.weights.post.data()[i] - 1.0));
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const float lo = std::min(a.data()[i], b.data()[i]), hi = std::max(a.data()[i], b.data()[i]);
      const float v = r.enhanced.data()[i];
      // Tolerance of one float rounding relative to the operands.
      const float slack = 4 * std::numeric_limits<float>::epsilon() * std::max(std::abs(lo), std::abs(hi));
      convex_excess = std::max(convex_excess, double(std::max(lo - v, v - hi)) - slack);
    }
    p.post_weight = p.pre_weight.clone();
    p.post_bias = p.pre_bias.clone();
    const auto tied = ceff(a, b, p).enhanced;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      mean_err = std::max(mean_err, double(std::abs(tied.data()[i] - (a.data()[i] + b.data()[i]) / 2)));
    }
  }
  const bool pass = sum_err <= 1e-6 && mean_err == 0.0 && convex_excess <= 0.0;
  return {pass, "100 cases, max |w_pre + w_post - 1| " + fmt(sum_err) + ", tied-parameter deviation from mean " +
                    fmt(mean_err) + ", convexity violation " + fmt(std::max(0.0, convex_excess))};
}

// 5. Attention MACs drop 4x per gamma doubling; wall clock gamma 1 vs 4.
Verdict complexity() {
  const auto t0 = Clock::now();
  BenchConfig cfg;
  cfg.gammas = {1, 2, 4, 8};
  cfg.sizes = {128};
  cfg.channels = 64;
  cfg.repeats = 3;
  const auto rows = run_attention_bench(cfg);
  bool exact = true;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) exact &= rows[i].flops == 4 * rows[i + 1].flops;
  const double speedup = rows[0].ms / rows[2].ms;
  const double secs = seconds_since(t0);
  std::string counts;
  for (const auto& r : rows) counts += " g" + std::to_string(r.gamma) + "=" + std::to_string(r.flops);
  return {exact && speedup >= 4.0 && secs < 60,
          "MACs" + counts + (exact ? " (exact 4x steps)" : " (NOT 4x)") + ", time g1/g4 = " + fmt(rows[0].ms, 5) +
              "/" + fmt(rows[2].ms, 5) + " ms = " + fmt(speedup, 3) + "x (floor 4x), " + fmt(secs, 3) + " s"};
}

// 6. F1/IoU identity on the published pairs and confusion vs a loop oracle.
Verdict metric_fidelity() {
  const std::pair<double, double> published[] = {{95.15, 90.75}, {91.78, 84.81}, {92.16, 85.46}, {98.14, 96.34}};
  double worst_pp = 0;
  for (const auto& [f1, iou] : published) {
    const auto tp = static_cast<std::uint64_t>(std::llround(iou * 100));
    const auto r = metrics(ConfusionCounts{tp, 10000 - tp, 0, 0});
    worst_pp = std::max(worst_pp, std::abs(r.f1 * 100 - f1));
  }
  std::size_t mismatches = 0;
  Rng rng(0x6e7);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + rng() % 32, w = 1 + rng() % 32;
    ChangeMask pred(h, w), gt(h, w);
    for (auto& v : pred.values) v = coin(rng);
    for (auto& v : gt.values) v = coin(rng);
    ConfusionCounts oracle;
    for (std::size_t i = 0; i < h * w; ++i) {
      const bool p = pred.values[i], g = gt.values[i];
      (p ? (g ? oracle.tp : oracle.fp) : (g ? oracle.fn : oracle.tn)) += 1;
    }
    if (!(confusion(pred, gt) == oracle)) ++mismatches;
  }
  return {worst_pp <= 0.01 && mismatches == 0, "4 published pairs, worst F1 deviation " + fmt(worst_pp, 3) +
                                                   " pp (limit 0.01); 1000 random mask pairs, " +
                                                   std::to_string(mismatches) + " confusion mismatches"};
}

struct ToyRun {
  std::vector<EpochLog> log;
  double seconds = 0;
};

struct ToyData {
  Dataset train, val;
};

ToyData toy_data(std::uint64_t seed) {
  const auto spec = SyntheticSpec::with_nuisance(64, 1.0);
  ToyData d;
  for (std::size_t i = 0; i < 250; ++i) {
    auto s = generate_pair(spec, mix_seed(seed, i));
    s.name = std::to_string(i);
    (i < 200 ? d.train : d.val).push_back(std::move(s));
  }
  return d;
}

TrainConfig toy_train_config(std::uint64_t seed) {
  TrainConfig t;
  t.lr = 2e-3;
  t.batch_size = 8;
  t.epochs = 30;
  t.seed = seed;
  return t;
}

ToyRun train_toy(const ModelConfig& mc, const ToyData& data, std::uint64_t seed, const std::string& tag) {
  const auto t0 = Clock::now();
  ChangeDetector model(mc, seed);
  FitOptions opts;
  opts.on_epoch = [&](const EpochLog& e) {
    std::cerr << "[" << tag << "] " << format_log_line(e) << " (" << fmt(seconds_since(t0), 4) << " s)\n";
  };
  ToyRun r;
  r.log = fit(model, data.train, data.val, toy_train_config(seed), opts);
  r.seconds = seconds_since(t0);
  return r;
}

// 7. Toy model reaches IoU 0.80 with a strictly decreasing smoothed loss.
Verdict toy_training() {
  const std::uint64_t seed = 1;
  const auto data = toy_data(seed);
  const auto run = train_toy(ModelConfig::toy(), data, seed, "toy");
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 5 <= run.log.size(); ++i) {
    double s = 0;
    for (std::size_t j = i; j < i + 5; ++j) s += run.log[j].loss;
    smooth.push_back(s / 5);
  }
  std::size_t rises = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i) rises += smooth[i] >= smooth[i - 1];
  const double iou = run.log.back().val.iou;
  return {iou >= 0.80 && rises == 0 && run.seconds < 1200,
          "200/50 pairs at 64x64, nuisance 1, 30 epochs: val IoU " + fmt(iou) + " (floor 0.80), smoothed loss " +
              fmt(smooth.front()) + " -> " + fmt(smooth.back()) + " with " + std::to_string(rises) +
              " non-decreasing steps, " + fmt(run.seconds, 4) + " s (limit 1200 s)"};
}

// 8. Fusion and sparsity ablations averaged over three seeds.
Verdict toy_ablations() {
  std::map<std::string, double> iou;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (auto seed : seeds) {
    const auto data = toy_data(seed);
    auto ceff = ModelConfig::toy();
    auto concat = ceff;
    concat.fusion = FusionMode::concat;
    auto g4 = ceff;
    g4.gamma = 4;
    g4.input_size = 128;  // smallest size whose every stage divides by 4
    for (const auto& [name, mc] : {std::pair{"ceff_g2", ceff}, std::pair{"concat_g2", concat}, std::pair{"ceff_g4", g4}}) {
      const auto run = train_toy(mc, data, seed, std::string(name) + " seed " + std::to_string(seed));
      iou[name] += run.log.back().val.iou / static_cast<double>(seeds.size());
    }
  }
  const bool a = iou["ceff_g2"] >= iou["concat_g2"] - 0.02;
  const bool b = iou["ceff_g2"] >= 0.75 && iou["ceff_g4"] >= 0.75;
  return {a && b, "mean IoU over 3 seeds: ceff " + fmt(iou["ceff_g2"]) + " vs concat " + fmt(iou["concat_g2"]) +
                      " (need ceff >= concat - 0.02), gamma 2 " + fmt(iou["ceff_g2"]) + ", gamma 4 " +
                      fmt(iou["ceff_g4"]) + " (floor 0.75)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 9. Same seed and config: byte-identical checkpoints and eval output.
Verdict reproducibility() {
  testing::TempDir dir("sparsecd_accept");
  std::ostringstream sink;
  auto cli = [&](std::vector<std::string> args, std::ostream& out) {
    const int code = cli::run(args, out, sink);
    if (code != 0) throw std::runtime_error("command failed: " + args.front() + "\n" + sink.str());
  };
  cli({"synth", "--out", (dir / "data").string(), "--n", "24", "--seed", "7"}, sink);
  for (const char* run : {"a", "b"}) {
    cli({"train", "--data", (dir / "data").string(), "--out", (dir / run).string(), "--epochs", "3", "--seed",
         "11"},
        sink);
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().filename() == "run_config.json") continue;
    ++compared;
    differing += slurp(e.path()) != slurp(dir / "b" / e.path().filename());
  }
  // The recorded config differs only by its output directory.
  auto config_of = [&](const char* run) {
    auto j = nlohmann::json::parse(slurp(dir / run / "run_config.json"));
    j.erase("out");
    return j.dump();
  };
  ++compared;
  differing += config_of("a") != config_of("b");
  std::ostringstream ja, jb;
  cli({"eval", "--ckpt", (dir / "a" / "ckpt_epoch_3.sfck").string(), "--data", (dir / "data").string()}, ja);
  cli({"eval", "--ckpt", (dir / "b" / "ckpt_epoch_3.sfck").string(), "--data", (dir / "data").string()}, jb);
  const bool same_json = ja.str() == jb.str() && !ja.str().empty();
  return {differing == 0 && compared >= 5 && same_json,
          std::to_string(compared) + " run artifacts compared, " + std::to_string(differing) +
              " differ; eval JSON " + (same_json ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; one PASS/FAIL line per criterion"};
  std::vector<int> selected{1, 2, 3, 4, 5, 6, 7, 8, 9};
  app.add_option("--criteria", selected, "Criteria to run (comma separated)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::function<Verdict()>> criteria = {
      {1, gradient_suite}, {2, dense_equivalence}, {3, shuffle_bijection},
      {4, ceff_contract},  {5, complexity},        {6, metric_fidelity},
      {7, toy_training},   {8, toy_ablations},     {9, reproducibility}};

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
