#include "kdrank/benchmark/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "kdrank/error.hpp"
#include "kdrank/util/format.hpp"
#include "kdrank/util/parallel.hpp"

namespace kdrank {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cols;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  if (!line.empty() && line.back() == ',') cols.emplace_back();
  return cols;
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("csv", line, "bad number '" + s + "'");
}

std::size_t to_size(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw FormatError("csv", line, "bad count '" + s + "'");
}

// Calls fn(columns, line_no) for each data line, skipping comments and the header.
template <typename Fn>
void for_each_row(std::string_view text, const std::string& header, Fn&& fn) {
  std::stringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      KDRANK_CHECK(line == header, FormatError, "csv header mismatch at line " + std::to_string(line_no));
      seen_header = true;
      continue;
    }
    fn(split_csv(line), line_no);
  }
  KDRANK_CHECK(seen_header, FormatError, "csv header missing");
}

}  // namespace

std::string_view to_string(StorageClass storage) { return storage == StorageClass::kPerPassage ? "|P|" : "|T|"; }

StorageClass storage_class(ScorerKind kind) {
  return kind == ScorerKind::kDot ? StorageClass::kPerPassage : StorageClass::kPerTerm;
}

BuiltCache build_cache(const Scorer& scorer, std::span<const TokenSequence* const> passages, std::size_t threads) {
  KDRANK_CHECK(scorer.cacheable(), Error,
               "scorer kind '" + std::string(to_string(scorer.kind())) + "' is not cacheable");
  BuiltCache out;
  out.cache.kind = scorer.kind();
  out.cache.dim = scorer.representation_dim();
  out.cache.entries.resize(passages.size());
  parallel_for(passages.size(), threads, [&](std::size_t i) {
    out.cache.entries[i] = scorer.precompute(*passages[i], static_cast<std::int64_t>(i));
  });
  out.stats.entries = passages.size();
  out.stats.rows = out.cache.total_rows();
  out.stats.vector_size = out.cache.dim;
  out.stats.storage = storage_class(scorer.kind());
  return out;
}

double median(std::vector<double> values) {
  KDRANK_CHECK(!values.empty(), Error, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void pin_allocator_thresholds() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 4 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
}

double percentile(std::vector<double> values, double p) {
  KDRANK_CHECK(!values.empty(), Error, "percentile of an empty set");
  KDRANK_CHECK(p > 0.0 && p <= 100.0, Error, "percentile outside (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

LatencyReport measure_latency(const Scorer& scorer, const BuiltCache* cache, const TokenSequence& query,
                              std::span<const TokenSequence* const> raw_passages, const LatencyConfig& config) {
  KDRANK_CHECK(config.trials >= 30, Error, "latency needs at least 30 trials, got " + std::to_string(config.trials));
  KDRANK_CHECK(config.warmup >= 5, Error, "latency needs at least 5 warm-up trials");
  if (cache == nullptr) {
    KDRANK_CHECK(!scorer.cacheable() || !raw_passages.empty(), Error, "no candidates to score");
  } else {
    KDRANK_CHECK(cache->cache.kind == scorer.kind(), Error, "cache was built by a different scorer kind");
  }
  double sink = 0.0;
  auto trial = [&] {
    const std::vector<double> scores =
        cache ? score_against_cache(scorer, query, cache->cache.entries) : score_fresh(scorer, query, raw_passages);
    sink += scores.empty() ? 0.0 : scores.front();
  };
  for (std::size_t i = 0; i < config.warmup; ++i) trial();
  std::vector<double> ms;
  ms.reserve(config.trials);
  for (std::size_t i = 0; i < config.trials; ++i) {
    const auto start = std::chrono::steady_clock::now();
    trial();
    const auto stop = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  KDRANK_CHECK(std::isfinite(sink), NonFiniteError, "non-finite score during latency measurement");
  LatencyReport r;
  r.kind = scorer.kind();
  r.candidates = cache ? cache->cache.entries.size() : raw_passages.size();
  r.trials = config.trials;
  r.median_ms = median(ms);
  r.p95_ms = percentile(ms, 95.0);
  r.min_ms = *std::min_element(ms.begin(), ms.end());
  r.max_ms = *std::max_element(ms.begin(), ms.end());
  if (cache) r.cache = cache->stats;
  return r;
}

std::string latency_csv_header() {
  return "scorer,candidates,trials,median_ms,p95_ms,min_ms,max_ms,cache_entries,cache_rows,vector_size,storage";
}

std::string format_latency_csv(std::span<const LatencyReport> reports) {
  std::ostringstream out;
  out << "# one query per trial; timer covers query encoding and interaction, token ids prepared beforehand\n";
  out << latency_csv_header() << '\n';
  for (const auto& r : reports) {
    out << to_string(r.kind) << ',' << r.candidates << ',' << r.trials << ',' << format_shortest(r.median_ms) << ','
        << format_shortest(r.p95_ms) << ',' << format_shortest(r.min_ms) << ',' << format_shortest(r.max_ms) << ','
        << r.cache.entries << ',' << r.cache.rows << ',' << r.cache.vector_size << ','
        << (r.cache.entries == 0 ? "-" : to_string(r.cache.storage)) << '\n';
  }
  return out.str();
}

std::vector<LatencyReport> parse_latency_csv(std::string_view text) {
  std::vector<LatencyReport> out;
  for_each_row(text, latency_csv_header(), [&](const std::vector<std::string>& c, std::size_t line) {
    KDRANK_CHECK(c.size() == 11, FormatError, "latency csv line " + std::to_string(line) + ": expected 11 columns");
    LatencyReport r;
    r.kind = parse_scorer_kind(c[0]);
    r.candidates = to_size(c[1], line);
    r.trials = to_size(c[2], line);
    r.median_ms = to_double(c[3], line);
    r.p95_ms = to_double(c[4], line);
    r.min_ms = to_double(c[5], line);
    r.max_ms = to_double(c[6], line);
    r.cache.entries = to_size(c[7], line);
    r.cache.rows = to_size(c[8], line);
    r.cache.vector_size = to_size(c[9], line);
    r.cache.storage = c[10] == "|P|" ? StorageClass::kPerPassage : StorageClass::kPerTerm;
    out.push_back(r);
  });
  return out;
}

std::vector<TradeoffRow> tradeoff_table(std::span<const LatencyReport> latency,
                                        std::span<const EffectivenessEntry> effectiveness) {
  std::vector<TradeoffRow> rows;
  for (const auto& e : effectiveness) {
    const auto it = std::find_if(latency.begin(), latency.end(), [&](const auto& l) { return l.kind == e.kind; });
    KDRANK_CHECK(it != latency.end(), Error,
                 "no latency report for scorer '" + std::string(to_string(e.kind)) + "' (variant '" + e.variant + "')");
    rows.push_back({e.kind, e.variant, it->median_ms, it->p95_ms, e.ndcg10, e.mrr10, e.map});
  }
  return rows;
}

std::string format_tradeoff_csv(std::span<const TradeoffRow> rows) {
  std::ostringstream out;
  out << "scorer,variant,median_ms,p95_ms,ndcg10,mrr10,map\n";
  for (const auto& r : rows) {
    KDRANK_CHECK(r.variant.find_first_of(",\n") == std::string::npos, Error,
                 "variant names may not contain commas or newlines");
    out << to_string(r.kind) << ',' << r.variant << ',' << format_shortest(r.median_ms) << ','
        << format_shortest(r.p95_ms) << ',' << format_shortest(r.ndcg10) << ',' << format_shortest(r.mrr10) << ','
        << format_shortest(r.map) << '\n';
  }
  return out.str();
}

std::vector<TradeoffRow> parse_tradeoff_csv(std::string_view text) {
  std::vector<TradeoffRow> rows;
  for_each_row(text, "scorer,variant,median_ms,p95_ms,ndcg10,mrr10,map",
               [&](const std::vector<std::string>& c, std::size_t line) {
                 KDRANK_CHECK(c.size() == 7, FormatError,
                              "tradeoff csv line " + std::to_string(line) + ": expected 7 columns");
                 rows.push_back({parse_scorer_kind(c[0]), c[1], to_double(c[2], line), to_double(c[3], line),
                                 to_double(c[4], line), to_double(c[5], line), to_double(c[6], line)});
               });
  return rows;
}

}  // namespace kdrank
