#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kdrank::cli {

using Path = std::filesystem::path;

struct GenCorpusArgs {
  Path config;
  std::optional<std::uint64_t> seed;
  Path out;
};

/// Shared by train-teacher and train-student. An empty `student` selects the
/// teacher section; otherwise the named entry of the students map.
struct TrainArgs {
  std::optional<std::string> student;
  Path config;
  Path corpus;
  Path teacher_scores;
  Path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

struct ScoreTriplesArgs {
  Path checkpoint;
  Path corpus;
  Path out;
  std::size_t threads = 1;
};

struct EnsembleArgs {
  std::vector<Path> inputs;
  Path out;
};

struct RerankArgs {
  Path checkpoint;
  Path corpus;
  std::string split = "eval";
  std::string tag = "kdrank";
  Path out;
  std::size_t threads = 1;
};

struct EvaluateArgs {
  Path run;
  Path qrels;
  Path config;
  Path out;
};

struct MarginStatsArgs {
  /// "label=path" pairs.
  std::vector<std::string> scores;
  std::vector<std::string> checkpoints;
  std::vector<std::string> logs;
  Path corpus;
  std::size_t bins = 30;
  Path out;
  std::size_t threads = 1;
};

struct BenchArgs {
  Path config;
  Path corpus;
  std::vector<std::string> checkpoints;
  Path out;
};

struct TradeoffArgs {
  Path latency;
  /// "kind:variant=metrics.json" entries.
  std::vector<std::string> reports;
  Path out;
};

void gen_corpus(const GenCorpusArgs& args);
void train_model(const TrainArgs& args);
void score_triples(const ScoreTriplesArgs& args);
void ensemble(const EnsembleArgs& args);
void rerank_candidates(const RerankArgs& args);
void evaluate(const EvaluateArgs& args);
void margin_stats(const MarginStatsArgs& args);
void bench(const BenchArgs& args);
void tradeoff(const TradeoffArgs& args);

}  // namespace kdrank::cli
