#include "kdrank/pipeline/config.hpp"

#include "kdrank/error.hpp"

namespace kdrank {
namespace {

template <typename T>
void read(const Json& j, const char* key, T& field, std::string_view section) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace

void require_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view section) {
  KDRANK_CHECK(j.is_object(), ConfigError, "'" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || a == key;
    KDRANK_CHECK(known, ConfigError, "unknown key '" + key + "' in '" + std::string(section) + "'");
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double default_learning_rate(ScorerKind kind) { return kind == ScorerKind::kTk ? 1e-5 : 7e-6; }

void TrainConfig::validate() const {
  KDRANK_CHECK(learning_rate >= 0.0, ConfigError, "learning_rate must be positive (0 selects the default)");
  KDRANK_CHECK(batch_size >= 1, ConfigError, "batch_size must be at least 1");
  KDRANK_CHECK(validation_interval >= 1, ConfigError, "validation_interval must be at least 1");
  KDRANK_CHECK(early_stop_patience >= 1, ConfigError, "early_stop_patience must be at least 1");
}

double TrainConfig::resolved_learning_rate(ScorerKind kind) const {
  return learning_rate > 0.0 ? learning_rate : default_learning_rate(kind);
}

Json to_json(const EncoderConfig& c) {
  return Json{{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},         {"num_layers", c.num_layers},
              {"num_heads", c.num_heads},   {"ffn_dim", c.ffn_dim},             {"max_positions", c.max_positions},
              {"gate_alpha", c.gate_alpha}};
}

Json to_json(const ScorerConfig& c) {
  return Json{{"kind", std::string(to_string(c.kind))},
              {"encoder", to_json(c.encoder)},
              {"output_dim", c.output_dim},
              {"mask_repeat", c.mask_repeat},
              {"prett_split", c.prett_split},
              {"kernel_centers", c.kernels.centers},
              {"kernel_sigma", c.kernels.sigma},
              {"init_seed", c.init_seed}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_steps", c.max_steps},
              {"validation_interval", c.validation_interval},
              {"early_stop_patience", c.early_stop_patience},
              {"log_interval", c.log_interval},
              {"seed", c.seed},
              {"loss", std::string(to_string(c.loss_kind))},
              {"threads", c.threads}};
}

Json to_json(const SyntheticCorpusConfig& c) {
  return Json{{"seed", c.seed},
              {"n_passages", c.n_passages},
              {"n_train_queries", c.n_train_queries},
              {"n_val_queries", c.n_val_queries},
              {"n_eval_queries", c.n_eval_queries},
              {"vocab_size", c.vocab_size},
              {"n_topics", c.n_topics},
              {"topic_words", c.topic_words},
              {"passage_min_tokens", c.passage_min_tokens},
              {"passage_max_tokens", c.passage_max_tokens},
              {"query_min_tokens", c.query_min_tokens},
              {"query_max_tokens", c.query_max_tokens},
              {"topic_density", {c.topic_density[0], c.topic_density[1], c.topic_density[2]}},
              {"triples_per_query", c.triples_per_query},
              {"candidates_per_query", c.candidates_per_query},
              {"relevant_candidate_share", c.relevant_candidate_share}};
}

Json to_json(const MetricConfig& c) {
  return Json{{"ndcg_k", c.ndcg_k},
              {"mrr_k", c.mrr_k},
              {"map_k", c.map_k},
              {"binarization_threshold", c.binarization_threshold}};
}

EncoderConfig encoder_config_from_json(const Json& j) {
  constexpr std::string_view s = "encoder";
  require_keys(j, {"vocab_size", "embed_dim", "num_layers", "num_heads", "ffn_dim", "max_positions", "gate_alpha"}, s);
  EncoderConfig c;
  read(j, "vocab_size", c.vocab_size, s);
  read(j, "embed_dim", c.embed_dim, s);
  read(j, "num_layers", c.num_layers, s);
  read(j, "num_heads", c.num_heads, s);
  read(j, "ffn_dim", c.ffn_dim, s);
  read(j, "max_positions", c.max_positions, s);
  read(j, "gate_alpha", c.gate_alpha, s);
  return c;
}

ScorerConfig scorer_config_from_json(const Json& j) {
  constexpr std::string_view s = "scorer";
  require_keys(j,
               {"kind", "encoder", "output_dim", "mask_repeat", "prett_split", "kernel_centers", "kernel_sigma",
                "init_seed"},
               s);
  ScorerConfig c;
  std::string kind = std::string(to_string(c.kind));
  read(j, "kind", kind, s);
  c.kind = parse_scorer_kind(kind);
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  read(j, "output_dim", c.output_dim, s);
  read(j, "mask_repeat", c.mask_repeat, s);
  read(j, "prett_split", c.prett_split, s);
  read(j, "kernel_centers", c.kernels.centers, s);
  read(j, "kernel_sigma", c.kernels.sigma, s);
  read(j, "init_seed", c.init_seed, s);
  return c;
}

TrainConfig train_config_from_json(const Json& j) {
  constexpr std::string_view s = "train";
  require_keys(j,
               {"learning_rate", "batch_size", "max_steps", "validation_interval", "early_stop_patience",
                "log_interval", "seed", "loss", "threads"},
               s);
  TrainConfig c;
  read(j, "learning_rate", c.learning_rate, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "max_steps", c.max_steps, s);
  read(j, "validation_interval", c.validation_interval, s);
  read(j, "early_stop_patience", c.early_stop_patience, s);
  read(j, "log_interval", c.log_interval, s);
  read(j, "seed", c.seed, s);
  std::string loss = std::string(to_string(c.loss_kind));
  read(j, "loss", loss, s);
  c.loss_kind = parse_loss_kind(loss);
  read(j, "threads", c.threads, s);
  c.validate();
  return c;
}

SyntheticCorpusConfig corpus_config_from_json(const Json& j) {
  constexpr std::string_view s = "corpus";
  require_keys(j,
               {"seed", "n_passages", "n_train_queries", "n_val_queries", "n_eval_queries", "vocab_size", "n_topics",
                "topic_words", "passage_min_tokens", "passage_max_tokens", "query_min_tokens", "query_max_tokens",
                "topic_density", "triples_per_query", "candidates_per_query", "relevant_candidate_share"},
               s);
  SyntheticCorpusConfig c;
  read(j, "seed", c.seed, s);
  read(j, "n_passages", c.n_passages, s);
  read(j, "n_train_queries", c.n_train_queries, s);
  read(j, "n_val_queries", c.n_val_queries, s);
  read(j, "n_eval_queries", c.n_eval_queries, s);
  read(j, "vocab_size", c.vocab_size, s);
  read(j, "n_topics", c.n_topics, s);
  read(j, "topic_words", c.topic_words, s);
  read(j, "passage_min_tokens", c.passage_min_tokens, s);
  read(j, "passage_max_tokens", c.passage_max_tokens, s);
  read(j, "query_min_tokens", c.query_min_tokens, s);
  read(j, "query_max_tokens", c.query_max_tokens, s);
  if (j.contains("topic_density")) {
    std::vector<double> d;
    read(j, "topic_density", d, s);
    KDRANK_CHECK(d.size() == 3, ConfigError, "corpus.topic_density needs 3 values");
    for (std::size_t i = 0; i < 3; ++i) c.topic_density[i] = d[i];
  }
  read(j, "triples_per_query", c.triples_per_query, s);
  read(j, "candidates_per_query", c.candidates_per_query, s);
  read(j, "relevant_candidate_share", c.relevant_candidate_share, s);
  c.validate();
  return c;
}

MetricConfig metric_config_from_json(const Json& j) {
  constexpr std::string_view s = "metrics";
  require_keys(j, {"ndcg_k", "mrr_k", "map_k", "binarization_threshold"}, s);
  MetricConfig c;
  read(j, "ndcg_k", c.ndcg_k, s);
  read(j, "mrr_k", c.mrr_k, s);
  read(j, "map_k", c.map_k, s);
  read(j, "binarization_threshold", c.binarization_threshold, s);
  return c;
}

}  // namespace kdrank
