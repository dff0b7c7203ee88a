#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdrank/scorers/passage_cache.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

/// How cache storage grows: one vector per passage, or one per passage term.
enum class StorageClass { kPerPassage, kPerTerm };

/// "|P|" or "|T|".
std::string_view to_string(StorageClass storage);

struct CacheStats {
  std::size_t entries = 0;
  /// Stored vectors across all entries.
  std::size_t rows = 0;
  std::size_t vector_size = 0;
  StorageClass storage = StorageClass::kPerPassage;
};

struct BuiltCache {
  PassageCache cache;
  CacheStats stats;
};

StorageClass storage_class(ScorerKind kind);

/// Precomputes one entry per passage; entry ids are positions in `passages`.
/// Throws Error for scorers that cannot be cached.
BuiltCache build_cache(const Scorer& scorer, std::span<const TokenSequence* const> passages, std::size_t threads = 1);

struct LatencyConfig {
  std::size_t warmup = 5;
  std::size_t trials = 30;
};

struct LatencyReport {
  ScorerKind kind = ScorerKind::kDot;
  std::size_t candidates = 0;
  std::size_t trials = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  /// Zero for scorers without a cache.
  CacheStats cache;
};

/// Times one query against all candidates, single-threaded. A trial covers
/// query encoding plus interaction with every cached entry (or full scoring
/// of every raw passage when `cache` is null); token ids are prepared before
/// the timer starts. Throws Error for fewer than 30 trials.
LatencyReport measure_latency(const Scorer& scorer, const BuiltCache* cache, const TokenSequence& query,
                              std::span<const TokenSequence* const> raw_passages, const LatencyConfig& config = {});

/// Fixes the glibc mmap and trim thresholds for the rest of the process. By
/// default glibc moves them as large blocks are freed, so small-allocation
/// timings depend on what ran before. No-op on other C libraries.
void pin_allocator_thresholds();

/// Median (mean of the middle pair for even counts) and nearest-rank percentile.
double median(std::vector<double> values);
double percentile(std::vector<double> values, double p);

std::string latency_csv_header();
std::string format_latency_csv(std::span<const LatencyReport> reports);

struct EffectivenessEntry {
  ScorerKind kind = ScorerKind::kDot;
  std::string variant;
  double ndcg10 = 0.0;
  double mrr10 = 0.0;
  double map = 0.0;
};

struct TradeoffRow {
  ScorerKind kind = ScorerKind::kDot;
  std::string variant;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double ndcg10 = 0.0;
  double mrr10 = 0.0;
  double map = 0.0;

  bool operator==(const TradeoffRow&) const = default;
};

/// One row per effectiveness entry, joined to the latency report of its
/// scorer kind. Throws Error when a kind has no latency report.
std::vector<TradeoffRow> tradeoff_table(std::span<const LatencyReport> latency,
                                        std::span<const EffectivenessEntry> effectiveness);

/// Header "scorer,variant,median_ms,p95_ms,ndcg10,mrr10,map"; values round-trip exactly.
std::string format_tradeoff_csv(std::span<const TradeoffRow> rows);
std::vector<TradeoffRow> parse_tradeoff_csv(std::string_view text);
std::vector<LatencyReport> parse_latency_csv(std::string_view text);

}  // namespace kdrank
