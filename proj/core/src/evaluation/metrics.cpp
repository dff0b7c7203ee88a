#include "kdrank/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kdrank/error.hpp"
#include "kdrank/util/format.hpp"

namespace kdrank {
namespace {

int grade_of(const Judgments* judged, const std::string& pid) {
  if (judged == nullptr) return 0;
  const auto it = judged->find(pid);
  return it == judged->end() ? 0 : it->second;
}

double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }
double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

std::size_t relevant_count(const Judgments* binary) {
  if (binary == nullptr) return 0;
  return static_cast<std::size_t>(
      std::count_if(binary->begin(), binary->end(), [](const auto& kv) { return kv.second > 0; }));
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Qrels binarize(const Qrels& qrels, int threshold) {
  KDRANK_CHECK(threshold >= 1, Error, "binarization threshold must be at least 1");
  Qrels out;
  for (const auto& [qid, judged] : qrels.queries()) {
    for (const auto& [pid, grade] : judged) out.set(qid, pid, grade >= threshold ? 1 : 0);
  }
  return out;
}

double ndcg_at_k(std::span<const RunEntry> ranking, const Judgments* judged, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    dcg += gain(grade_of(judged, ranking[i].passage_id)) * discount(i + 1);
  }
  std::vector<int> ideal;
  if (judged != nullptr) {
    for (const auto& [pid, grade] : *judged) {
      if (grade > 0) ideal.push_back(grade);
    }
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += gain(ideal[i]) * discount(i + 1);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double reciprocal_rank_at_k(std::span<const RunEntry> ranking, const Judgments* binary, std::size_t k) {
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    if (grade_of(binary, ranking[i].passage_id) > 0) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double average_precision_at_k(std::span<const RunEntry> ranking, const Judgments* binary, std::size_t k) {
  const std::size_t total = relevant_count(binary);
  if (total == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    if (grade_of(binary, ranking[i].passage_id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(std::min(total, k));
}

MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config) {
  KDRANK_CHECK(config.ndcg_k >= 1 && config.mrr_k >= 1 && config.map_k >= 1, ConfigError,
               "metric cutoffs must be at least 1");
  const Qrels binary = binarize(qrels, config.binarization_threshold);
  MetricReport report;
  report.config = config;
  std::vector<double> ndcgs, mrrs, maps;
  for (const auto& [qid, entries] : run) {
    const Judgments* judged = qrels.judgments(qid);
    if (judged == nullptr) {
      ++report.skipped_queries;
      continue;
    }
    std::vector<RunEntry> ranking = entries;
    sort_ranking(ranking);
    QueryMetrics m;
    m.query_id = qid;
    m.ndcg = ndcg_at_k(ranking, judged, config.ndcg_k);
    ndcgs.push_back(m.ndcg);
    const Judgments* bin = binary.judgments(qid);
    if (relevant_count(bin) > 0) {
      m.mrr = reciprocal_rank_at_k(ranking, bin, config.mrr_k);
      m.map = average_precision_at_k(ranking, bin, config.map_k);
      mrrs.push_back(*m.mrr);
      maps.push_back(*m.map);
    }
    report.per_query.push_back(std::move(m));
  }
  report.ndcg_queries = ndcgs.size();
  report.binary_queries = mrrs.size();
  if (!ndcgs.empty()) report.mean_ndcg = mean_of(ndcgs);
  if (!mrrs.empty()) {
    report.mean_mrr = mean_of(mrrs);
    report.mean_map = mean_of(maps);
  }
  return report;
}

std::string format_report_tsv(const MetricReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? format_shortest(*v) : std::string("-"); };
  std::ostringstream out;
  out << "query_id\tndcg@" << r.config.ndcg_k << "\tmrr@" << r.config.mrr_k << "\tmap@" << r.config.map_k << '\n';
  for (const auto& q : r.per_query) {
    out << q.query_id << '\t' << format_shortest(q.ndcg) << '\t' << opt(q.mrr) << '\t' << opt(q.map) << '\n';
  }
  out << "all\t" << format_shortest(r.mean_ndcg) << '\t' << format_shortest(r.mean_mrr) << '\t'
      << format_shortest(r.mean_map) << '\n';
  return out.str();
}

std::string format_report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["ndcg_k"] = r.config.ndcg_k;
  j["mrr_k"] = r.config.mrr_k;
  j["map_k"] = r.config.map_k;
  j["binarization_threshold"] = r.config.binarization_threshold;
  j["ndcg"] = r.mean_ndcg;
  j["mrr"] = r.mean_mrr;
  j["map"] = r.mean_map;
  j["ndcg_queries"] = r.ndcg_queries;
  j["binary_queries"] = r.binary_queries;
  j["skipped_queries"] = r.skipped_queries;
  return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& tsv_path, const std::filesystem::path& json_path,
                  const MetricReport& report) {
  std::ofstream tsv(tsv_path, std::ios::binary);
  KDRANK_CHECK(tsv.good(), Error, "cannot write " + tsv_path.string());
  tsv << format_report_tsv(report);
  std::ofstream json(json_path, std::ios::binary);
  KDRANK_CHECK(json.good(), Error, "cannot write " + json_path.string());
  json << format_report_json(report);
}

double pairwise_accuracy(std::span<const double> pos, std::span<const double> neg) {
  KDRANK_CHECK(!pos.empty(), Error, "pairwise accuracy of an empty set");
  KDRANK_CHECK(pos.size() == neg.size(), Error, "pos and neg score counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) correct += pos[i] > neg[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pos.size());
}

MarginHistogram margin_histogram(std::span<const double> pos, std::span<const double> neg, std::size_t bins,
                                 std::string label) {
  KDRANK_CHECK(!pos.empty(), Error, "margin statistics of an empty set");
  KDRANK_CHECK(pos.size() == neg.size(), Error, "pos and neg score counts differ");
  KDRANK_CHECK(bins >= 1, Error, "histogram needs at least one bin");
  double lo = pos[0] - neg[0];
  double hi = lo;
  for (std::size_t i = 1; i < pos.size(); ++i) {
    lo = std::min(lo, pos[i] - neg[i]);
    hi = std::max(hi, pos[i] - neg[i]);
  }
  std::vector<double> edges;
  if (lo == hi) {
    edges = {lo, hi};
  } else {
    edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
      edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    }
    edges.back() = hi;
  }
  return margin_histogram(pos, neg, std::move(edges), std::move(label));
}

MarginHistogram margin_histogram(std::span<const double> pos, std::span<const double> neg,
                                 std::vector<double> edges, std::string label) {
  KDRANK_CHECK(!pos.empty(), Error, "margin statistics of an empty set");
  KDRANK_CHECK(pos.size() == neg.size(), Error, "pos and neg score counts differ");
  KDRANK_CHECK(edges.size() >= 2, Error, "histogram needs at least two edges");
  const bool single = edges.size() == 2 && edges[0] == edges[1];
  for (std::size_t b = 1; b < edges.size() && !single; ++b) {
    KDRANK_CHECK(edges[b] > edges[b - 1], Error, "histogram edges must be strictly increasing");
  }
  MarginHistogram h;
  h.label = std::move(label);
  h.counts.assign(edges.size() - 1, 0);
  h.sample_size = pos.size();
  const auto n = static_cast<double>(pos.size());
  std::size_t negatives = 0;
  double sum = 0.0, pos_sum = 0.0, neg_sum = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double m = pos[i] - neg[i];
    KDRANK_CHECK(m >= edges.front() && m <= edges.back(), Error, "margin outside the histogram edges");
    // Interior edges decide the bin; a value on an edge belongs to the bin above it.
    const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, m);
    ++h.counts[static_cast<std::size_t>(it - (edges.begin() + 1))];
    negatives += m < 0.0 ? 1 : 0;
    sum += m;
    pos_sum += pos[i];
    neg_sum += neg[i];
  }
  h.edges = std::move(edges);
  h.mean = sum / n;
  double sq = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double d = (pos[i] - neg[i]) - h.mean;
    sq += d * d;
  }
  h.stddev = std::sqrt(sq / n);
  h.fraction_negative = static_cast<double>(negatives) / n;
  h.pos_mean = pos_sum / n;
  h.neg_mean = neg_sum / n;
  return h;
}

std::string format_histogram_csv(const MarginHistogram& h) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << format_shortest(h.edges[b]) << ',' << format_shortest(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
  }
  return out.str();
}

std::string format_histogram_json(const MarginHistogram& h) {
  nlohmann::ordered_json j;
  j["label"] = h.label;
  j["sample_size"] = h.sample_size;
  j["mean"] = h.mean;
  j["std"] = h.stddev;
  j["fraction_negative"] = h.fraction_negative;
  j["pos_mean"] = h.pos_mean;
  j["neg_mean"] = h.neg_mean;
  j["bins"] = h.counts.size();
  return j.dump(2) + "\n";
}

}  // namespace kdrank
