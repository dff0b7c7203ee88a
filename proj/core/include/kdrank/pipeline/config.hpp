#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>

#include "kdrank/data/synthetic.hpp"
#include "kdrank/evaluation/metrics.hpp"
#include "kdrank/losses/losses.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

using Json = nlohmann::ordered_json;

struct TrainConfig {
  /// 0 picks the per-architecture default (see default_learning_rate).
  double learning_rate = 0.0;
  std::size_t batch_size = 32;
  std::size_t max_steps = 1000;
  std::size_t validation_interval = 500;
  /// Validations without improvement before training stops.
  std::size_t early_stop_patience = 10;
  /// Training log rows are written every this many steps; 0 means validation_interval.
  std::size_t log_interval = 0;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kRankNet;
  /// Worker threads for per-sample forward/backward; 0 means all cores.
  std::size_t threads = 1;

  void validate() const;
  double resolved_learning_rate(ScorerKind kind) const;
  std::size_t resolved_log_interval() const { return log_interval == 0 ? validation_interval : log_interval; }
};

/// 7e-6 for the encoder-based scorers, 1e-5 for TK.
double default_learning_rate(ScorerKind kind);

// JSON conversion. Readers start from defaults, override present keys, and
// reject unknown keys with ConfigError naming the offending key.
Json to_json(const EncoderConfig& c);
Json to_json(const ScorerConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SyntheticCorpusConfig& c);
Json to_json(const MetricConfig& c);

EncoderConfig encoder_config_from_json(const Json& j);
ScorerConfig scorer_config_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);
SyntheticCorpusConfig corpus_config_from_json(const Json& j);
MetricConfig metric_config_from_json(const Json& j);

/// Throws ConfigError if `j` is not an object or holds a key outside `allowed`.
void require_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view section);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace kdrank
