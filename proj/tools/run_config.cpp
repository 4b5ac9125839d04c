#include "run_config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sparsecd/errors.hpp"

namespace sparsecd::cli {

using nlohmann::json;

namespace {

enum class Kind { uint, number, boolean, string, uint4 };

struct Key {
  Kind kind;
  const char* doc;
  std::function<void(RunConfig&, const json&)> apply;
  std::function<json(const RunConfig&)> read;
};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::uint: return "unsigned integer";
    case Kind::number: return "number";
    case Kind::boolean: return "boolean";
    case Kind::string: return "string";
    case Kind::uint4: return "array of 4 unsigned integers";
  }
  return "?";
}

bool matches(Kind k, const json& v) {
  switch (k) {
    case Kind::uint: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::number: return v.is_number();
    case Kind::boolean: return v.is_boolean();
    case Kind::string: return v.is_string();
    case Kind::uint4:
      if (!v.is_array() || v.size() != 4) return false;
      for (const auto& e : v) {
        if (!matches(Kind::uint, e)) return false;
      }
      return true;
  }
  return false;
}

std::array<std::size_t, 4> to_uint4(const json& v) {
  std::array<std::size_t, 4> a{};
  for (std::size_t i = 0; i < 4; ++i) a[i] = v[i].get<std::size_t>();
  return a;
}

const std::map<std::string, Key>& schema() {
  static const std::map<std::string, Key> keys = {
      {"preset", {Kind::string, "model preset applied before other keys: toy | full",
                  [](RunConfig&, const json&) {}, [](const RunConfig& c) { return json(c.preset); }}},
      {"stage_depths", {Kind::uint4, "SSA layers per encoder stage",
                        [](RunConfig& c, const json& v) { c.model.stage_depths = to_uint4(v); },
                        [](const RunConfig& c) { return json(c.model.stage_depths); }}},
      {"stage_channels", {Kind::uint4, "channels per encoder stage",
                          [](RunConfig& c, const json& v) { c.model.stage_channels = to_uint4(v); },
                          [](const RunConfig& c) { return json(c.model.stage_channels); }}},
      {"stage_heads", {Kind::uint4, "attention heads per stage",
                       [](RunConfig& c, const json& v) { c.model.stage_heads = to_uint4(v); },
                       [](const RunConfig& c) { return json(c.model.stage_heads); }}},
      {"gamma", {Kind::uint, "sparsity factor (power of two)",
                 [](RunConfig& c, const json& v) { c.model.gamma = v.get<std::size_t>(); },
                 [](const RunConfig& c) { return json(c.model.gamma); }}},
      {"input_size", {Kind::uint, "model input side; data of another size is resized to it",
                      [](RunConfig& c, const json& v) { c.model.input_size = v.get<std::size_t>(); },
                      [](const RunConfig& c) { return json(c.model.input_size); }}},
      {"decoder_dim", {Kind::uint, "decoder width",
                       [](RunConfig& c, const json& v) { c.model.decoder_dim = v.get<std::size_t>(); },
                       [](const RunConfig& c) { return json(c.model.decoder_dim); }}},
      {"mlp_ratio", {Kind::uint, "hidden width multiplier of the SSA block MLP",
                     [](RunConfig& c, const json& v) { c.model.mlp_ratio = v.get<std::size_t>(); },
                     [](const RunConfig& c) { return json(c.model.mlp_ratio); }}},
      {"offset_clip", {Kind::number, "max offset magnitude in stage pixels (default: gamma)",
                       [](RunConfig& c, const json& v) { c.model.offset_clip = v.get<double>(); },
                       [](const RunConfig& c) { return json(c.model.effective_offset_clip()); }}},
      {"clip_mode", {Kind::string, "offset clipping: smooth | hard",
                     [](RunConfig& c, const json& v) {
                       const auto s = v.get<std::string>();
                       if (s == "smooth") c.model.clip_mode = ClipMode::smooth;
                       else if (s == "hard") c.model.clip_mode = ClipMode::hard;
                       else throw ConfigError("clip_mode must be smooth or hard, got '" + s + "'");
                     },
                     [](const RunConfig& c) { return json(c.model.clip_mode == ClipMode::smooth ? "smooth" : "hard"); }}},
      {"fusion", {Kind::string, "stage fusion: ceff | subtract | add | concat",
                  [](RunConfig& c, const json& v) { c.model.fusion = parse_fusion_mode(v.get<std::string>()); },
                  [](const RunConfig& c) { return json(std::string(to_string(c.model.fusion))); }}},
      {"ceff_reduction", {Kind::uint, "channel reduction ratio inside CEFF",
                          [](RunConfig& c, const json& v) { c.model.ceff_reduction = v.get<std::size_t>(); },
                          [](const RunConfig& c) { return json(c.model.ceff_reduction); }}},
      {"lr", {Kind::number, "initial learning rate",
              [](RunConfig& c, const json& v) { c.train.lr = v.get<double>(); },
              [](const RunConfig& c) { return json(c.train.lr); }}},
      {"weight_decay", {Kind::number, "decoupled weight decay",
                        [](RunConfig& c, const json& v) { c.train.weight_decay = v.get<double>(); },
                        [](const RunConfig& c) { return json(c.train.weight_decay); }}},
      {"beta1", {Kind::number, "AdamW first-moment decay",
                 [](RunConfig& c, const json& v) { c.train.beta1 = v.get<double>(); },
                 [](const RunConfig& c) { return json(c.train.beta1); }}},
      {"beta2", {Kind::number, "AdamW second-moment decay",
                 [](RunConfig& c, const json& v) { c.train.beta2 = v.get<double>(); },
                 [](const RunConfig& c) { return json(c.train.beta2); }}},
      {"batch_size", {Kind::uint, "samples per optimizer step",
                      [](RunConfig& c, const json& v) { c.train.batch_size = v.get<std::size_t>(); },
                      [](const RunConfig& c) { return json(c.train.batch_size); }}},
      {"epochs", {Kind::uint, "training epochs",
                  [](RunConfig& c, const json& v) { c.train.epochs = v.get<std::size_t>(); },
                  [](const RunConfig& c) { return json(c.train.epochs); }}},
      {"seed", {Kind::uint, "seed for initialization, shuffling and augmentation",
                [](RunConfig& c, const json& v) {
                  c.train.seed = v.get<std::uint64_t>();
                  c.seed_given = true;
                },
                [](const RunConfig& c) { return json(c.train.seed); }}},
      {"augment_flip", {Kind::boolean, "random horizontal/vertical flips",
                        [](RunConfig& c, const json& v) { c.train.augment.flip = v.get<bool>(); },
                        [](const RunConfig& c) { return json(c.train.augment.flip); }}},
      {"augment_scale_crop", {Kind::boolean, "random rescale (0.8-1.2) with crop/pad",
                              [](RunConfig& c, const json& v) { c.train.augment.scale_crop = v.get<bool>(); },
                              [](const RunConfig& c) { return json(c.train.augment.scale_crop); }}},
      {"augment_blur", {Kind::boolean, "random Gaussian blur (sigma <= 1.5)",
                        [](RunConfig& c, const json& v) { c.train.augment.blur = v.get<bool>(); },
                        [](const RunConfig& c) { return json(c.train.augment.blur); }}},
      {"augment_color_jitter", {Kind::boolean, "random brightness/contrast (+-10%)",
                                [](RunConfig& c, const json& v) { c.train.augment.color_jitter = v.get<bool>(); },
                                [](const RunConfig& c) { return json(c.train.augment.color_jitter); }}},
      {"data", {Kind::string, "dataset root",
                [](RunConfig& c, const json& v) { c.data = v.get<std::string>(); },
                [](const RunConfig& c) { return c.data ? json(c.data->string()) : json(nullptr); }}},
      {"out", {Kind::string, "output directory",
               [](RunConfig& c, const json& v) { c.out = v.get<std::string>(); },
               [](const RunConfig& c) { return c.out ? json(c.out->string()) : json(nullptr); }}},
      {"val_fraction", {Kind::number, "held-out fraction when the data root has no train/val split",
                        [](RunConfig& c, const json& v) { c.val_fraction = v.get<double>(); },
                        [](const RunConfig& c) { return json(c.val_fraction); }}},
  };
  return keys;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  const auto& keys = schema();
  for (const auto& [name, value] : j.items()) {
    auto it = keys.find(name);
    if (it == keys.end()) throw ConfigError("unknown config key '" + name + "'");
    // Paths written back by to_json may be null.
    if (value.is_null() && (name == "data" || name == "out")) continue;
    if (!matches(it->second.kind, value)) {
      throw ConfigError("config key '" + name + "' must be a " + kind_name(it->second.kind));
    }
  }

  RunConfig c;
  if (j.contains("preset")) {
    c.preset = j["preset"].get<std::string>();
    if (c.preset == "toy") c.model = ModelConfig::toy();
    else if (c.preset == "full") c.model = ModelConfig::full();
    else throw ConfigError("preset must be toy or full, got '" + c.preset + "'");
  }
  const bool heads_given = j.contains("stage_heads");
  for (const auto& [name, value] : j.items()) {
    if (value.is_null()) continue;
    keys.at(name).apply(c, value);
  }
  if (!heads_given) c.model.stage_heads = ModelConfig::default_heads(c.model.stage_channels);
  if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  c.model.validate();
  c.train.validate();
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [name, key] : schema()) j[name] = key.read(c);
  return j;
}

std::string schema_help() {
  std::ostringstream os;
  for (const auto& [name, key] : schema()) os << "  " << name << " (" << kind_name(key.kind) << "): " << key.doc << '\n';
  return os.str();
}

}  // namespace sparsecd::cli
