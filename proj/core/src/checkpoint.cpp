#include "sparsecd/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "sparsecd/errors.hpp"

namespace sparsecd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'F', 'C', 'K'};

template <typename U>
void put(std::ofstream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::ifstream& is, const std::filesystem::path& path) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw IoError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw IoError("entry name too long: " + e.name);
    if (e.shape.size() > 255) throw IoError("entry rank too large: " + e.name);
    if (shape_numel(e.shape) != e.data.size()) throw DimensionError("entry data does not match shape: " + e.name);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto count = get<std::uint32_t>(is, path);
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(get<std::uint16_t>(is, path));
    if (!is.read(e.name.data(), static_cast<std::streamsize>(e.name.size()))) {
      throw IoError("truncated checkpoint " + path.string());
    }
    const auto rank = get<std::uint8_t>(is, path);
    for (std::uint8_t r = 0; r < rank; ++r) e.shape.push_back(get<std::uint32_t>(is, path));
    e.data.resize(shape_numel(e.shape));
    if (!is.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * sizeof(float)))) {
      throw IoError("truncated checkpoint " + path.string());
    }
    entries.push_back(std::move(e));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint " + path.string());
  return entries;
}

void save_model(const std::filesystem::path& path, const ChangeDetector& model) {
  std::vector<CheckpointEntry> entries;
  for (const auto& [name, t] : model.parameters()) {
    const auto d = t.data();
    entries.push_back({name, t.shape(), std::vector<float>(d.begin(), d.end())});
  }
  const auto& norm = model.input_norm();
  entries.push_back({"input_norm.mean", Shape{3}, std::vector<float>(norm.mean.begin(), norm.mean.end())});
  entries.push_back({"input_norm.std", Shape{3}, std::vector<float>(norm.std.begin(), norm.std.end())});
  write_checkpoint(path, entries);
}

void load_model(const std::filesystem::path& path, ChangeDetector& model) {
  const auto entries = read_checkpoint(path);
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) {
    if (!by_name.emplace(e.name, &e).second) throw IoError("duplicate checkpoint entry " + e.name);
  }
  auto params = model.parameters();
  auto expect = [&](const std::string& name, const Shape& shape) -> const CheckpointEntry& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DimensionError("checkpoint " + path.string() + " lacks entry " + name);
    if (it->second->shape != shape) {
      throw DimensionError("checkpoint entry " + name + " has shape " + shape_str(it->second->shape) +
                           ", model expects " + shape_str(shape));
    }
    return *it->second;
  };
  // Validate everything first.
  for (const auto& [name, t] : params) expect(name, t.shape());
  const auto& mean = expect("input_norm.mean", Shape{3});
  const auto& stdv = expect("input_norm.std", Shape{3});
  if (entries.size() != params.size() + 2) {
    for (const auto& e : entries) {
      const bool known = e.name == "input_norm.mean" || e.name == "input_norm.std" ||
                         std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.first == e.name; });
      if (!known) throw DimensionError("checkpoint entry " + e.name + " does not belong to this model");
    }
  }
  for (float s : stdv.data) {
    if (!(s > 0.0f)) throw NumericError("checkpoint input_norm.std must be positive");
  }

  for (auto& [name, t] : params) {
    const auto& src = by_name.at(name)->data;
    std::copy(src.begin(), src.end(), t.data().begin());
  }
  InputNorm norm;
  std::copy(mean.data.begin(), mean.data.end(), norm.mean.begin());
  std::copy(stdv.data.begin(), stdv.data.end(), norm.std.begin());
  model.set_input_norm(norm);
}

}  // namespace sparsecd
