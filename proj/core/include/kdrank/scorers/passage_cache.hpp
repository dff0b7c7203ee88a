#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

struct PassageCache {
  ScorerKind kind = ScorerKind::kDot;
  std::size_t dim = 0;
  std::vector<PassageCacheEntry> entries;

  /// Sum of representation rows over all entries.
  std::size_t total_rows() const;
};

/// Binary layout (little-endian host order):
///   u32 kind, u64 dim, u64 count, then per entry: i64 passage_id, u64 rows,
///   rows*dim f64 values in row-major order.
void write_passage_cache(const std::filesystem::path& path, const PassageCache& cache);
PassageCache read_passage_cache(const std::filesystem::path& path);

/// Scores one query against precomputed entries. The query is encoded once;
/// each candidate runs on its own inference tape. Output order follows `entries`.
std::vector<double> score_against_cache(const Scorer& scorer, const TokenSequence& query,
                                        std::span<const PassageCacheEntry> entries);

/// Scores one query against raw passages through the full path of any scorer.
std::vector<double> score_fresh(const Scorer& scorer, const TokenSequence& query,
                                std::span<const TokenSequence* const> passages);

}  // namespace kdrank
