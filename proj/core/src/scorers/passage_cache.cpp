#include "kdrank/scorers/passage_cache.hpp"

#include <cstdint>
#include <fstream>

#include "kdrank/error.hpp"

namespace kdrank {
namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  KDRANK_CHECK(in.good(), FormatError, "truncated passage cache file " + path.string());
  return v;
}

}  // namespace

std::size_t PassageCache::total_rows() const {
  std::size_t rows = 0;
  for (const auto& e : entries) rows += e.representation.rows();
  return rows;
}

void write_passage_cache(const std::filesystem::path& path, const PassageCache& cache) {
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write passage cache " + path.string());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cache.kind));
  put<std::uint64_t>(out, cache.dim);
  put<std::uint64_t>(out, cache.entries.size());
  for (const auto& e : cache.entries) {
    const Tensor& r = e.representation;
    KDRANK_CHECK(r.rank() == 2 && r.cols() == cache.dim, ShapeError, "cache entry width differs from header dim");
    put<std::int64_t>(out, e.passage_id);
    put<std::uint64_t>(out, r.rows());
    out.write(reinterpret_cast<const char*>(r.ptr()), static_cast<std::streamsize>(r.size() * sizeof(double)));
  }
  KDRANK_CHECK(out.good(), Error, "failed writing passage cache " + path.string());
}

PassageCache read_passage_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  KDRANK_CHECK(in.good(), Error, "cannot open passage cache " + path.string());
  PassageCache cache;
  const auto kind = get<std::uint32_t>(in, path);
  KDRANK_CHECK(kind <= static_cast<std::uint32_t>(ScorerKind::kTk), FormatError,
               "unknown scorer kind in passage cache " + path.string());
  cache.kind = static_cast<ScorerKind>(kind);
  cache.dim = get<std::uint64_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  cache.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    PassageCacheEntry e;
    e.passage_id = get<std::int64_t>(in, path);
    const auto rows = get<std::uint64_t>(in, path);
    e.representation = Tensor(Shape{rows, cache.dim});
    in.read(reinterpret_cast<char*>(e.representation.ptr()),
            static_cast<std::streamsize>(e.representation.size() * sizeof(double)));
    KDRANK_CHECK(in.good() || e.representation.size() == 0, FormatError,
                 "truncated passage cache file " + path.string());
    cache.entries.push_back(std::move(e));
  }
  return cache;
}

std::vector<double> score_against_cache(const Scorer& scorer, const TokenSequence& query,
                                        std::span<const PassageCacheEntry> entries) {
  Tape query_tape(Tape::Mode::kInference);
  const Tensor& query_rep = scorer.encode_query(query_tape, query).value();
  std::vector<double> scores;
  scores.reserve(entries.size());
  for (const auto& e : entries) {
    Tape tape(Tape::Mode::kInference);
    scores.push_back(scorer.interact(tape, tape.borrow(query_rep), tape.borrow(e.representation)).value().item());
  }
  return scores;
}

std::vector<double> score_fresh(const Scorer& scorer, const TokenSequence& query,
                                std::span<const TokenSequence* const> passages) {
  std::vector<double> scores;
  scores.reserve(passages.size());
  for (const TokenSequence* p : passages) {
    Tape tape(Tape::Mode::kInference);
    scores.push_back(scorer.score(tape, query, *p).value().item());
  }
  return scores;
}

}  // namespace kdrank
