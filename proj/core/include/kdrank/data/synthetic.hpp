#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "kdrank/data/formats.hpp"
#include "kdrank/encoder/vocabulary.hpp"

namespace kdrank {

/// Latent-topic corpus. Every topic owns `topic_words` words of the vocabulary;
/// the remaining words are shared background. A passage picks a topic and a
/// strength in {1, 2, 3}; the strength sets how often its tokens come from
/// the topic words and is its grade for every query of the same topic.
struct SyntheticCorpusConfig {
  std::uint64_t seed = 7;
  std::size_t n_passages = 5000;
  std::size_t n_train_queries = 500;
  std::size_t n_val_queries = 50;
  std::size_t n_eval_queries = 50;
  /// Corpus words, not counting the special tokens.
  std::size_t vocab_size = 2000;
  std::size_t n_topics = 50;
  std::size_t topic_words = 20;
  std::size_t passage_min_tokens = 12;
  std::size_t passage_max_tokens = 20;
  std::size_t query_min_tokens = 2;
  std::size_t query_max_tokens = 4;
  /// Probability that a passage token is a topic word, per strength 1, 2, 3.
  double topic_density[3] = {0.25, 0.45, 0.65};
  std::size_t triples_per_query = 20;
  std::size_t candidates_per_query = 50;
  /// Share of each candidate list drawn from relevant passages (when available).
  double relevant_candidate_share = 0.3;

  void validate() const;
};

struct SyntheticCorpus {
  Vocabulary vocabulary;
  TextCollection passages;
  TextCollection train_queries;
  TextCollection val_queries;
  TextCollection eval_queries;
  std::vector<TrainingTriple> triples;
  /// Train queries: every relevant passage. Validation and evaluation queries:
  /// every candidate, including grade-0 ones.
  Qrels qrels;
  CandidateLists val_candidates;
  CandidateLists eval_candidates;
  std::vector<std::size_t> passage_topics;
  std::vector<int> passage_strengths;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config);

/// File names used by write_corpus and the command-line tools.
struct CorpusPaths {
  std::filesystem::path vocabulary;
  std::filesystem::path passages;
  std::filesystem::path train_queries;
  std::filesystem::path val_queries;
  std::filesystem::path eval_queries;
  std::filesystem::path triples;
  std::filesystem::path qrels;
  std::filesystem::path val_candidates;
  std::filesystem::path eval_candidates;

  static CorpusPaths in(const std::filesystem::path& dir);
};

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace kdrank
