#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/data/formats.hpp"
#include "kdrank/evaluation/metrics.hpp"
#include "kdrank/pipeline/checkpoint.hpp"
#include "kdrank/pipeline/config.hpp"
#include "kdrank/pipeline/dataset.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

/// Adam without weight decay or schedule.
class Adam {
 public:
  Adam(const ParameterSet& params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  /// Empty gradient entries count as zero gradients.
  void step(ParameterSet& params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TrainingData {
  std::span<const TrainingTriple> triples;
  const TokenStore* queries = nullptr;
  const TokenStore* passages = nullptr;
  /// Aligned with `triples`; only read by the distillation losses.
  std::span<const TeacherScoreRecord> teacher;
};

struct ValidationData {
  const TokenStore* queries = nullptr;
  const TokenStore* passages = nullptr;
  const CandidateLists* candidates = nullptr;
  const Qrels* qrels = nullptr;
  MetricConfig metrics;
};

/// One training-log line. Training statistics cover the steps since the
/// previous line and are empty on the step-0 line.
struct TrainLogRow {
  std::size_t step = 0;
  std::optional<double> loss;
  std::optional<double> pairwise_acc;
  /// Mean student score of the relevant and of the non-relevant passages.
  std::optional<double> margin_mean_pos;
  std::optional<double> margin_mean_neg;
  std::optional<double> val_ndcg10;
};

std::string training_log_header();
std::string format_training_log_row(const TrainLogRow& row);
std::vector<TrainLogRow> read_training_log(const std::filesystem::path& path);

struct TrainResult {
  /// Highest validation nDCG@10, earliest step on ties. Without validation
  /// data this is the final state.
  Checkpoint best;
  std::vector<TrainLogRow> log;
  std::size_t steps_run = 0;
  bool stopped_early = false;
  /// Pairs whose training signal came from the binary triple label.
  std::size_t label_reads = 0;
  /// Pairs whose training signal came from teacher scores.
  std::size_t teacher_reads = 0;
};

/// Mini-batch training with Adam. Each sample runs forward and backward on
/// its own tape; sample gradients are summed in batch order, so results do
/// not depend on the thread count. The scorer ends holding the best
/// checkpoint's parameters. Log rows are appended to `log_out` as they are
/// produced when it is non-null.
TrainResult train(Scorer& scorer, const TrainingData& data, const ValidationData* validation,
                  const TrainConfig& config, std::ostream* log_out = nullptr);

/// Mean nDCG@10 of the scorer re-ranking the validation candidates.
double validate(const Scorer& scorer, const ValidationData& validation, std::size_t threads);

}  // namespace kdrank
