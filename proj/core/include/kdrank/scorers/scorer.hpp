#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/autodiff/tape.hpp"
#include "kdrank/encoder/encoder.hpp"
#include "kdrank/encoder/vocabulary.hpp"
#include "kdrank/scorers/kernels.hpp"

namespace kdrank {

enum class ScorerKind : std::uint32_t { kCat = 0, kDot = 1, kColbert = 2, kPrett = 3, kTk = 4 };

inline constexpr ScorerKind kAllScorerKinds[] = {ScorerKind::kCat, ScorerKind::kDot, ScorerKind::kColbert,
                                                 ScorerKind::kPrett, ScorerKind::kTk};

std::string_view to_string(ScorerKind kind);
/// Accepts "cat", "dot", "colbert", "prett", "tk" (any case).
ScorerKind parse_scorer_kind(std::string_view name);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::kCat;
  EncoderConfig encoder;
  /// Width of the token projection for DOT and COLBERT; 0 means embed_dim.
  std::size_t output_dim = 0;
  /// MASK tokens appended to COLBERT queries.
  std::size_t mask_repeat = 8;
  /// PRETT: layers run separately on query and passage before concatenation.
  std::size_t prett_split = 2;
  KernelConfig kernels = KernelConfig::defaults();
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t projection_dim() const { return output_dim == 0 ? encoder.embed_dim : output_dim; }
};

/// Precomputed passage-side representation. Rows exclude padding:
/// DOT holds one row, COLBERT/PRETT/TK one row per passage term.
struct PassageCacheEntry {
  std::int64_t passage_id = 0;
  Tensor representation;
};

/// A ranking architecture mapping (query, passage) to an unbounded score.
/// Scoring splits into query encoding, passage encoding, and interaction so
/// that passage encodings can be computed ahead of time.
class Scorer {
 public:
  explicit Scorer(const ScorerConfig& config);
  virtual ~Scorer() = default;
  Scorer(const Scorer&) = delete;
  Scorer& operator=(const Scorer&) = delete;

  ScorerKind kind() const { return config_.kind; }
  const ScorerConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  virtual bool cacheable() const { return true; }
  /// Column count of cached passage representations.
  virtual std::size_t representation_dim() const = 0;

  /// Fresh path: encodes both sides on `tape`. Returns a scalar.
  virtual Var score(Tape& tape, const TokenSequence& query, const TokenSequence& passage) const;
  virtual Var encode_query(Tape& tape, const TokenSequence& query) const = 0;
  virtual Var encode_passage(Tape& tape, const TokenSequence& passage) const = 0;
  virtual Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const = 0;

  /// Passage encoding on an inference tape, detached from any graph.
  PassageCacheEntry precompute(const TokenSequence& passage, std::int64_t passage_id) const;
  Var score_cached(Tape& tape, const TokenSequence& query, const PassageCacheEntry& entry) const;

 protected:
  Var p(Tape& tape, std::size_t index) const { return tape.param(params_, index); }

  ScorerConfig config_;
  ParameterSet params_;
};

/// BERT-CAT: CLS of the jointly encoded [CLS; q; SEP; p] projected to a scalar.
class CatScorer final : public Scorer {
 public:
  explicit CatScorer(const ScorerConfig& config);
  bool cacheable() const override { return false; }
  std::size_t representation_dim() const override { return 0; }
  Var score(Tape& tape, const TokenSequence& query, const TokenSequence& passage) const override;
  Var encode_query(Tape& tape, const TokenSequence& query) const override;
  Var encode_passage(Tape& tape, const TokenSequence& passage) const override;
  Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const override;

  const Encoder& encoder() const { return encoder_; }
  std::size_t head_index() const { return head_; }

 private:
  Rng rng_;
  Encoder encoder_;
  std::size_t head_;
};

/// BERT-DOT: dot product of independently encoded, projected CLS vectors.
class DotScorer final : public Scorer {
 public:
  explicit DotScorer(const ScorerConfig& config);
  std::size_t representation_dim() const override { return config_.projection_dim(); }
  Var encode_query(Tape& tape, const TokenSequence& query) const override;
  Var encode_passage(Tape& tape, const TokenSequence& passage) const override;
  Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const override;

 private:
  Var encode_cls(Tape& tape, const TokenSequence& seq) const;

  Rng rng_;
  Encoder encoder_;
  std::size_t head_;
};

/// ColBERT: per query position, max dot product over passage terms, summed.
/// The query is augmented with CLS and `mask_repeat` MASK tokens; every
/// augmented position takes part in the sum.
class ColbertScorer final : public Scorer {
 public:
  explicit ColbertScorer(const ScorerConfig& config);
  std::size_t representation_dim() const override { return config_.projection_dim(); }
  Var encode_query(Tape& tape, const TokenSequence& query) const override;
  Var encode_passage(Tape& tape, const TokenSequence& passage) const override;
  Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const override;

 private:
  Rng rng_;
  Encoder encoder_;
  std::size_t head_;
};

/// PreTT: the first `prett_split` layers run separately on [CLS; q] and
/// [CLS; p]; the states are concatenated as [q; SEP; p] and the remaining
/// layers run jointly before the CLS projection.
class PrettScorer final : public Scorer {
 public:
  explicit PrettScorer(const ScorerConfig& config);
  std::size_t representation_dim() const override { return config_.encoder.embed_dim; }
  /// Query states at the split layer followed by the SEP state.
  Var encode_query(Tape& tape, const TokenSequence& query) const override;
  Var encode_passage(Tape& tape, const TokenSequence& passage) const override;
  Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const override;

  const Encoder& encoder() const { return encoder_; }

 private:
  Rng rng_;
  Encoder encoder_;
  std::size_t head_;
};

/// TK: gated shallow contextualization, cosine match matrix, Gaussian kernel
/// pooling with a log-sum over passage terms, and a learned kernel weighting.
class TkScorer final : public Scorer {
 public:
  explicit TkScorer(const ScorerConfig& config);
  std::size_t representation_dim() const override { return config_.encoder.embed_dim; }
  Var encode_query(Tape& tape, const TokenSequence& query) const override;
  Var encode_passage(Tape& tape, const TokenSequence& passage) const override;
  Var interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const override;

  /// Current gate value, sigmoid of the raw gate parameter.
  Var alpha(Tape& tape) const;

 private:
  Var contextualize(Tape& tape, const TokenSequence& seq) const;

  Rng rng_;
  Encoder encoder_;
  std::size_t gate_;
  std::size_t kernel_weights_;
};

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& config);

/// Sum over query rows of the max over passage rows of q_i · p_j.
Var colbert_maxsim(const Var& query_rep, const Var& passage_rep);

/// Rows of `states` whose keep flag is set, skipping the first `skip` rows.
Var select_rows(const Var& states, std::span<const std::uint8_t> keep, std::size_t skip);

}  // namespace kdrank
