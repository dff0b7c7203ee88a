#include "kdrank/data/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "kdrank/error.hpp"
#include "kdrank/util/rng.hpp"

namespace kdrank {
namespace {

// Standard-library distributions are implementation-defined; these keep the
// generated files identical across toolchains.
std::size_t uniform_index(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::string word(std::size_t w) { return "w" + std::to_string(w); }

std::string join(const std::vector<std::size_t>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += word(words[i]);
  }
  return s;
}

struct Generator {
  const SyntheticCorpusConfig& cfg;
  SyntheticCorpus& out;
  Rng rng;
  std::vector<std::vector<std::size_t>> by_topic;

  std::size_t background_words() const { return cfg.vocab_size - cfg.n_topics * cfg.topic_words; }

  void passages() {
    by_topic.assign(cfg.n_topics, {});
    for (std::size_t i = 0; i < cfg.n_passages; ++i) {
      const std::size_t topic = uniform_index(rng, cfg.n_topics);
      const int strength = 1 + static_cast<int>(uniform_index(rng, 3));
      const std::size_t len = uniform_between(rng, cfg.passage_min_tokens, cfg.passage_max_tokens);
      std::vector<std::size_t> words(len);
      for (auto& w : words) {
        if (uniform01(rng) < cfg.topic_density[strength - 1]) {
          w = topic * cfg.topic_words + uniform_index(rng, cfg.topic_words);
        } else {
          w = cfg.n_topics * cfg.topic_words + uniform_index(rng, background_words());
        }
      }
      out.passages.add("p" + std::to_string(i), join(words));
      out.passage_topics.push_back(topic);
      out.passage_strengths.push_back(strength);
      by_topic[topic].push_back(i);
    }
  }

  // Query topics follow the passage topic distribution, so every query has
  // at least one relevant passage.
  std::size_t query(TextCollection& queries, const std::string& id) {
    const std::size_t topic = out.passage_topics[uniform_index(rng, cfg.n_passages)];
    const std::size_t len = uniform_between(rng, cfg.query_min_tokens, cfg.query_max_tokens);
    std::vector<std::size_t> pool(cfg.topic_words);
    std::iota(pool.begin(), pool.end(), topic * cfg.topic_words);
    for (std::size_t i = 0; i < len; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(len);
    queries.add(id, join(pool));
    return topic;
  }

  std::size_t random_non_relevant(std::size_t topic) {
    KDRANK_CHECK(by_topic[topic].size() < cfg.n_passages, Error,
                 "every passage shares the query topic; no negatives available");
    while (true) {
      const std::size_t p = uniform_index(rng, cfg.n_passages);
      if (out.passage_topics[p] != topic) return p;
    }
  }

  void train_queries() {
    for (std::size_t q = 0; q < cfg.n_train_queries; ++q) {
      const std::string qid = "q" + std::to_string(q);
      const std::size_t topic = query(out.train_queries, qid);
      const auto& relevant = by_topic[topic];
      for (std::size_t p : relevant) out.qrels.set(qid, out.passages.id(p), out.passage_strengths[p]);
      for (std::size_t t = 0; t < cfg.triples_per_query; ++t) {
        const std::size_t pos = relevant[uniform_index(rng, relevant.size())];
        const std::size_t neg = random_non_relevant(topic);
        out.triples.push_back({qid, out.passages.id(pos), out.passages.id(neg)});
      }
    }
  }

  void held_out_queries(std::size_t n, const std::string& prefix, TextCollection& queries, CandidateLists& lists) {
    for (std::size_t q = 0; q < n; ++q) {
      const std::string qid = prefix + std::to_string(q);
      const std::size_t topic = query(queries, qid);
      std::vector<std::size_t> relevant = by_topic[topic];
      const auto wanted = static_cast<std::size_t>(cfg.relevant_candidate_share * cfg.candidates_per_query + 0.5);
      const std::size_t n_rel = std::min({relevant.size(), std::max<std::size_t>(wanted, 1), cfg.candidates_per_query});
      for (std::size_t i = 0; i < n_rel; ++i) {
        std::swap(relevant[i], relevant[i + uniform_index(rng, relevant.size() - i)]);
      }
      std::vector<std::size_t> picked(relevant.begin(), relevant.begin() + static_cast<std::ptrdiff_t>(n_rel));
      const std::size_t n_non = std::min(cfg.candidates_per_query - n_rel, cfg.n_passages - by_topic[topic].size());
      std::set<std::size_t> seen;
      while (seen.size() < n_non) {
        const std::size_t p = random_non_relevant(topic);
        if (seen.insert(p).second) picked.push_back(p);
      }
      shuffle(picked, rng);
      auto& list = lists[qid];
      for (std::size_t p : picked) {
        const int grade = out.passage_topics[p] == topic ? out.passage_strengths[p] : 0;
        out.qrels.set(qid, out.passages.id(p), grade);
        list.push_back(out.passages.id(p));
      }
    }
  }
};

}  // namespace

void SyntheticCorpusConfig::validate() const {
  KDRANK_CHECK(n_passages >= 1 && n_train_queries >= 1 && n_topics >= 1 && topic_words >= 1, ConfigError,
               "corpus sizes must be at least 1");
  KDRANK_CHECK(n_topics * topic_words < vocab_size, ConfigError,
               "vocab_size " + std::to_string(vocab_size) + " is too small for " + std::to_string(n_topics) +
                   " topics of " + std::to_string(topic_words) + " distinct words plus background words");
  KDRANK_CHECK(passage_min_tokens >= 1 && passage_min_tokens <= passage_max_tokens &&
                   passage_max_tokens <= kMaxPassageTokens,
               ConfigError, "invalid passage length range");
  KDRANK_CHECK(query_min_tokens >= 1 && query_min_tokens <= query_max_tokens && query_max_tokens <= kMaxQueryTokens,
               ConfigError, "invalid query length range");
  KDRANK_CHECK(query_max_tokens <= topic_words, ConfigError,
               "query_max_tokens exceeds the distinct words of a topic");
  for (double d : topic_density) KDRANK_CHECK(d >= 0.0 && d <= 1.0, ConfigError, "topic density outside [0, 1]");
  KDRANK_CHECK(relevant_candidate_share >= 0.0 && relevant_candidate_share <= 1.0, ConfigError,
               "relevant_candidate_share outside [0, 1]");
  KDRANK_CHECK(triples_per_query >= 1 && candidates_per_query >= 1, ConfigError,
               "triples_per_query and candidates_per_query must be at least 1");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config) {
  config.validate();
  SyntheticCorpus corpus;
  for (std::size_t w = 0; w < config.vocab_size; ++w) corpus.vocabulary.add(word(w));
  Generator gen{config, corpus, Rng(config.seed), {}};
  gen.passages();
  gen.train_queries();
  gen.held_out_queries(config.n_val_queries, "v", corpus.val_queries, corpus.val_candidates);
  gen.held_out_queries(config.n_eval_queries, "e", corpus.eval_queries, corpus.eval_candidates);
  return corpus;
}

CorpusPaths CorpusPaths::in(const std::filesystem::path& dir) {
  return CorpusPaths{dir / "vocab.txt",         dir / "collection.tsv",     dir / "queries.train.tsv",
                     dir / "queries.val.tsv",   dir / "queries.eval.tsv",   dir / "triples.train.tsv",
                     dir / "qrels.txt",         dir / "candidates.val.tsv", dir / "candidates.eval.tsv"};
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  const CorpusPaths paths = CorpusPaths::in(dir);
  corpus.vocabulary.save(paths.vocabulary);
  write_collection(paths.passages, corpus.passages);
  write_collection(paths.train_queries, corpus.train_queries);
  write_collection(paths.val_queries, corpus.val_queries);
  write_collection(paths.eval_queries, corpus.eval_queries);
  write_triples(paths.triples, corpus.triples);
  write_qrels(paths.qrels, corpus.qrels);
  write_candidates(paths.val_candidates, corpus.val_candidates);
  write_candidates(paths.eval_candidates, corpus.eval_candidates);
}

}  // namespace kdrank
