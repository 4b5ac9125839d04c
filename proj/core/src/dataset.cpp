#include "sparsecd/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "sparsecd/errors.hpp"

namespace fs = std::filesystem;

namespace sparsecd {

namespace {

bool is_png(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<std::string> list_pngs(const fs::path& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) return names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_png(e.path())) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  const fs::path a = root / "A", b = root / "B", label = root / "label";
  const auto names_a = list_pngs(a);
  const auto names_b = list_pngs(b);
  const auto names_l = list_pngs(label);

  // Every name seen in any folder must exist in all three.
  std::vector<std::string> all = names_a;
  all.insert(all.end(), names_b.begin(), names_b.end());
  all.insert(all.end(), names_l.begin(), names_l.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (const auto& name : all) {
    for (const auto* dir : {&a, &b, &label}) {
      if (!fs::exists(*dir / name)) throw IoError("missing counterpart file: " + (*dir / name).string());
    }
  }

  Dataset out;
  out.reserve(all.size());
  for (const auto& name : all) {
    Sample s;
    s.name = name;
    s.pair.pre = read_png_rgb(a / name);
    s.pair.post = read_png_rgb(b / name);
    s.mask = read_png_label(label / name);
    const auto& p = s.pair.pre;
    const auto& q = s.pair.post;
    if (p.height != q.height || p.width != q.width || p.height != s.mask.height || p.width != s.mask.width) {
      throw DimensionError("size mismatch within triple " + name + ": A " + std::to_string(p.height) + "x" +
                           std::to_string(p.width) + ", B " + std::to_string(q.height) + "x" +
                           std::to_string(q.width) + ", label " + std::to_string(s.mask.height) + "x" +
                           std::to_string(s.mask.width));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_sample(const fs::path& root, const Sample& sample) {
  if (sample.name.empty()) throw IoError("write_sample: sample has no name");
  for (const char* sub : {"A", "B", "label"}) {
    std::error_code ec;
    fs::create_directories(root / sub, ec);
    if (ec) throw IoError("cannot create " + (root / sub).string() + ": " + ec.message());
  }
  write_png_rgb(root / "A" / sample.name, sample.pair.pre);
  write_png_rgb(root / "B" / sample.name, sample.pair.post);
  write_png_mask(root / "label" / sample.name, sample.mask);
}

InputNorm compute_input_norm(const Dataset& data) {
  std::array<double, 3> sum{}, sq{};
  double count = 0;
  for (const auto& s : data) {
    for (const Image* img : {&s.pair.pre, &s.pair.post}) {
      const std::size_t plane = img->height * img->width;
      for (std::size_t c = 0; c < 3 && c < img->channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double v = img->data[c * plane + i];
          sum[c] += v;
          sq[c] += v * v;
        }
      }
      count += static_cast<double>(plane);
    }
  }
  InputNorm norm;
  if (count == 0) return norm;
  for (std::size_t c = 0; c < 3; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mean * mean);
    norm.mean[c] = static_cast<float>(mean);
    norm.std[c] = static_cast<float>(std::max(std::sqrt(var), 1e-3));
  }
  return norm;
}

Split load_split(const fs::path& root, double val_fraction) {
  if (!fs::is_directory(root)) throw IoError("data directory does not exist: " + root.string());
  Split split;
  if (fs::is_directory(root / "train") && fs::is_directory(root / "val")) {
    split.train = load_dataset(root / "train");
    split.val = load_dataset(root / "val");
    return split;
  }
  Dataset all = load_dataset(root);
  std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(all.size()) * val_fraction));
  if (n_val == 0 && all.size() > 1 && val_fraction > 0) n_val = 1;
  const auto cut = all.size() - n_val;
  split.val.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(cut)),
                   std::make_move_iterator(all.end()));
  all.resize(cut);
  split.train = std::move(all);
  return split;
}

}  // namespace sparsecd
