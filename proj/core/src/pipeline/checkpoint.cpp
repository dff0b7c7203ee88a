#include "kdrank/pipeline/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "kdrank/error.hpp"
#include "kdrank/pipeline/config.hpp"

namespace kdrank {
namespace {

constexpr std::array<char, 8> kMagic = {'K', 'D', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  KDRANK_CHECK(in.good(), FormatError, path.string() + ": truncated checkpoint");
  return v;
}

std::string take_string(std::ifstream& in, const std::filesystem::path& path) {
  const auto n = take<std::uint64_t>(in, path);
  KDRANK_CHECK(n < (1ULL << 32), FormatError, path.string() + ": implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  KDRANK_CHECK(in.good(), FormatError, path.string() + ": truncated checkpoint");
  return s;
}

}  // namespace

Checkpoint snapshot(const Scorer& scorer, std::size_t step, double val_ndcg10) {
  Checkpoint c{scorer.config(), step, val_ndcg10, {}};
  for (const auto& p : scorer.parameters()) c.params.add(p.name, p.value);
  return c;
}

void load_parameters(Scorer& scorer, const ParameterSet& params) {
  ParameterSet& target = scorer.parameters();
  KDRANK_CHECK(target.size() == params.size(), Error,
               "parameter count mismatch: scorer has " + std::to_string(target.size()) + ", snapshot has " +
                   std::to_string(params.size()));
  for (std::size_t i = 0; i < target.size(); ++i) {
    KDRANK_CHECK(target[i].name == params[i].name, Error,
                 "parameter name mismatch: '" + target[i].name + "' vs '" + params[i].name + "'");
    KDRANK_CHECK(target[i].value.shape() == params[i].value.shape(), ShapeError,
                 "parameter '" + target[i].name + "' has shape " + shape_to_string(target[i].value.shape()) +
                     ", snapshot has " + shape_to_string(params[i].value.shape()));
    target[i].value = params[i].value;
  }
}

std::unique_ptr<Scorer> restore_scorer(const Checkpoint& checkpoint) {
  auto scorer = make_scorer(checkpoint.config);
  load_parameters(*scorer, checkpoint.params);
  return scorer;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write " + path.string());
  const std::string config = to_json(c.config).dump();
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  put(out, fnv1a(config));
  put(out, static_cast<std::uint64_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  put(out, static_cast<std::uint64_t>(c.step));
  put(out, c.val_ndcg10);
  put(out, static_cast<std::uint64_t>(c.params.size()));
  for (const auto& p : c.params) {
    put(out, static_cast<std::uint64_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put(out, static_cast<std::uint64_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.data().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  KDRANK_CHECK(out.good(), Error, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  KDRANK_CHECK(in.good(), Error, "cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  KDRANK_CHECK(in.good() && magic == kMagic, FormatError, path.string() + ": not a checkpoint file");
  const auto version = take<std::uint32_t>(in, path);
  KDRANK_CHECK(version == kVersion, FormatError,
               path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto hash = take<std::uint64_t>(in, path);
  const std::string config = take_string(in, path);
  KDRANK_CHECK(fnv1a(config) == hash, FormatError, path.string() + ": config hash mismatch");
  Checkpoint c;
  c.config = scorer_config_from_json(Json::parse(config));
  c.step = take<std::uint64_t>(in, path);
  c.val_ndcg10 = take<double>(in, path);
  const auto count = take<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = take_string(in, path);
    const auto rank = take<std::uint64_t>(in, path);
    KDRANK_CHECK(rank <= 4, FormatError, path.string() + ": implausible tensor rank");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(take<std::uint64_t>(in, path));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    KDRANK_CHECK(in.good(), FormatError, path.string() + ": truncated checkpoint");
    c.params.add(std::move(name), std::move(t));
  }
  return c;
}

}  // namespace kdrank
