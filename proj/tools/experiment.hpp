#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kdrank/data/synthetic.hpp"
#include "kdrank/evaluation/metrics.hpp"
#include "kdrank/pipeline/config.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank::cli {

struct ModelSection {
  ScorerConfig scorer;
  TrainConfig train;
};

struct BenchSection {
  /// Shared by every benchmarked kind; `kind` is overwritten per run.
  ScorerConfig scorer;
  std::vector<ScorerKind> kinds{std::begin(kAllScorerKinds), std::end(kAllScorerKinds)};
  std::size_t candidates = 1000;
  std::size_t warmup = 5;
  std::size_t trials = 30;
};

/// Declarative experiment file. Every section is optional; a subcommand
/// fails when the section it needs is missing.
struct ExperimentConfig {
  SyntheticCorpusConfig corpus;
  std::optional<ModelSection> teacher;
  /// Named student definitions, selected with train-student --name.
  std::map<std::string, ModelSection, std::less<>> students;
  MetricConfig metrics;
  std::optional<BenchSection> bench;
};

ExperimentConfig experiment_from_json(const Json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
Json to_json(const ModelSection& m);
Json to_json(const BenchSection& b);

/// Writes `j` pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace kdrank::cli
