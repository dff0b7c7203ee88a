#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kdrank/data/formats.hpp"

namespace kdrank {

using Judgments = std::map<std::string, int, std::less<>>;

/// Grade >= threshold becomes 1, anything else 0. Throws for threshold < 1.
Qrels binarize(const Qrels& qrels, int threshold);

// Per-query metrics over a ranking already sorted by sort_ranking.
// `judged` may be null (no judgments).

/// Gain 2^grade - 1, discount 1 / log2(rank + 1), normalized by the ideal DCG
/// of the judged grades. 0 when the ideal DCG is 0.
double ndcg_at_k(std::span<const RunEntry> ranking, const Judgments* judged, std::size_t k);
/// Reciprocal rank of the first binary-relevant passage within k, else 0.
double reciprocal_rank_at_k(std::span<const RunEntry> ranking, const Judgments* binary, std::size_t k);
/// Sum of precision at each relevant hit within k, divided by min(R, k). 0 when R = 0.
double average_precision_at_k(std::span<const RunEntry> ranking, const Judgments* binary, std::size_t k);

struct MetricConfig {
  std::size_t ndcg_k = 10;
  std::size_t mrr_k = 10;
  std::size_t map_k = 1000;
  int binarization_threshold = 2;
};

struct QueryMetrics {
  std::string query_id;
  double ndcg = 0.0;
  /// Empty when the query has no relevant passage after binarization.
  std::optional<double> mrr;
  std::optional<double> map;
};

struct MetricReport {
  MetricConfig config;
  std::vector<QueryMetrics> per_query;
  double mean_ndcg = 0.0;
  double mean_mrr = 0.0;
  double mean_map = 0.0;
  /// Queries contributing to the nDCG mean and to the MRR/MAP means.
  std::size_t ndcg_queries = 0;
  std::size_t binary_queries = 0;
  /// Run queries without any judgment; they are left out of every mean.
  std::size_t skipped_queries = 0;
};

/// Rankings are re-sorted with the global tie rule before scoring.
MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config = {});

/// Header line, one line per query, then a line for the means ("all").
std::string format_report_tsv(const MetricReport& report);
std::string format_report_json(const MetricReport& report);
void write_report(const std::filesystem::path& tsv_path, const std::filesystem::path& json_path,
                  const MetricReport& report);

/// Fraction of pairs with pos > neg; ties count as incorrect.
double pairwise_accuracy(std::span<const double> pos, std::span<const double> neg);

struct MarginHistogram {
  std::string label;
  /// bins + 1 increasing edges. Bin b holds edges[b] <= m < edges[b + 1];
  /// the last bin also holds m == edges.back().
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t sample_size = 0;
  double mean = 0.0;
  /// Population standard deviation.
  double stddev = 0.0;
  double fraction_negative = 0.0;
  double pos_mean = 0.0;
  double neg_mean = 0.0;
};

/// Histogram of pos - neg over `bins` equal-width bins spanning [min, max].
/// Constant margins give a single bin. Throws on empty or misaligned input.
MarginHistogram margin_histogram(std::span<const double> pos, std::span<const double> neg, std::size_t bins,
                                 std::string label = {});
/// Same, with caller-supplied strictly increasing edges; values outside them are an error.
MarginHistogram margin_histogram(std::span<const double> pos, std::span<const double> neg,
                                 std::vector<double> edges, std::string label = {});

/// "bin_low,bin_high,count" header and one row per bin.
std::string format_histogram_csv(const MarginHistogram& histogram);
std::string format_histogram_json(const MarginHistogram& histogram);

}  // namespace kdrank
