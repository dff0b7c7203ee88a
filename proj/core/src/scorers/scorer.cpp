#include "kdrank/scorers/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/error.hpp"
#include "kdrank/util/rng.hpp"

namespace kdrank {

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kCat: return "cat";
    case ScorerKind::kDot: return "dot";
    case ScorerKind::kColbert: return "colbert";
    case ScorerKind::kPrett: return "prett";
    case ScorerKind::kTk: return "tk";
  }
  return "unknown";
}

ScorerKind parse_scorer_kind(std::string_view name) {
  const std::string lower = to_lower(name);
  for (ScorerKind k : kAllScorerKinds) {
    if (lower == to_string(k)) return k;
  }
  throw ConfigError("unknown scorer kind '" + std::string(name) + "'");
}

void ScorerConfig::validate() const {
  encoder.validate();
  kernels.validate();
  KDRANK_CHECK(encoder.num_layers >= 1 || kind == ScorerKind::kTk, ConfigError,
               "encoder needs at least one layer");
  if (kind == ScorerKind::kPrett) {
    KDRANK_CHECK(prett_split >= 1 && prett_split < encoder.num_layers, ConfigError,
                 "prett_split must satisfy 1 <= split < num_layers");
  }
}

Scorer::Scorer(const ScorerConfig& config) : config_(config) { config_.validate(); }

Var Scorer::score(Tape& tape, const TokenSequence& query, const TokenSequence& passage) const {
  const Var q = encode_query(tape, query);
  const Var d = encode_passage(tape, passage);
  return interact(tape, q, d);
}

PassageCacheEntry Scorer::precompute(const TokenSequence& passage, std::int64_t passage_id) const {
  KDRANK_CHECK(cacheable(), Error,
               "scorer kind '" + std::string(to_string(kind())) + "' is not cacheable");
  Tape tape(Tape::Mode::kInference);
  return PassageCacheEntry{passage_id, encode_passage(tape, passage).value()};
}

Var Scorer::score_cached(Tape& tape, const TokenSequence& query, const PassageCacheEntry& entry) const {
  KDRANK_CHECK(entry.representation.rank() == 2 && entry.representation.cols() == representation_dim(),
               ShapeError, "cached representation does not match the scorer dimension");
  return interact(tape, encode_query(tape, query), tape.borrow(entry.representation));
}

Var select_rows(const Var& states, std::span<const std::uint8_t> keep, std::size_t skip) {
  std::vector<std::size_t> rows;
  for (std::size_t i = skip; i < keep.size(); ++i) {
    if (keep[i]) rows.push_back(i);
  }
  KDRANK_CHECK(!rows.empty(), ShapeError, "sequence has no non-padding rows");
  if (skip == 0 && rows.size() == keep.size()) return states;
  return ops::gather_rows(states, rows);
}

Var colbert_maxsim(const Var& query_rep, const Var& passage_rep) {
  KDRANK_CHECK(passage_rep.shape().size() == 2 && passage_rep.shape()[0] > 0, ShapeError,
               "empty passage representation");
  return ops::sum(ops::max_axis(ops::matmul_bt(query_rep, passage_rep), 1));
}

namespace {

std::vector<TokenId> with_prefix(TokenId first, const TokenSequence& seq) {
  std::vector<TokenId> ids;
  ids.reserve(seq.size() + 1);
  ids.push_back(first);
  ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
  return ids;
}

Tensor projection(std::size_t in, std::size_t out, Rng& rng) {
  return normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

}  // namespace

// ---------------------------------------------------------------------------

CatScorer::CatScorer(const ScorerConfig& config)
    : Scorer(config), rng_(config.init_seed), encoder_(config_.encoder, params_, "cat.encoder", rng_) {
  head_ = params_.add("cat.head", projection(config_.encoder.embed_dim, 1, rng_));
}

Var CatScorer::score(Tape& tape, const TokenSequence& query, const TokenSequence& passage) const {
  std::vector<TokenId> ids;
  ids.reserve(query.size() + passage.size() + 2);
  ids.push_back(SpecialTokens::kCls);
  ids.insert(ids.end(), query.ids.begin(), query.ids.end());
  ids.push_back(SpecialTokens::kSep);
  ids.insert(ids.end(), passage.ids.begin(), passage.ids.end());
  const SequenceState s = encoder_.encode(tape, ids, encoder_.num_layers());
  const Var cls = ops::slice_rows(s.hidden, 0, 1);
  return ops::reshape(ops::matmul(cls, p(tape, head_)), Shape{});
}

Var CatScorer::encode_query(Tape&, const TokenSequence&) const {
  throw Error("cat scorer has no separate query encoding");
}

Var CatScorer::encode_passage(Tape&, const TokenSequence&) const {
  throw Error("scorer kind 'cat' is not cacheable");
}

Var CatScorer::interact(Tape&, const Var&, const Var&) const {
  throw Error("cat scorer has no separate interaction");
}

// ---------------------------------------------------------------------------

DotScorer::DotScorer(const ScorerConfig& config)
    : Scorer(config), rng_(config.init_seed), encoder_(config_.encoder, params_, "dot.encoder", rng_) {
  head_ = params_.add("dot.head", projection(config_.encoder.embed_dim, config_.projection_dim(), rng_));
}

Var DotScorer::encode_cls(Tape& tape, const TokenSequence& seq) const {
  const SequenceState s = encoder_.encode(tape, with_prefix(SpecialTokens::kCls, seq), encoder_.num_layers());
  return ops::matmul(ops::slice_rows(s.hidden, 0, 1), p(tape, head_));
}

Var DotScorer::encode_query(Tape& tape, const TokenSequence& query) const { return encode_cls(tape, query); }

Var DotScorer::encode_passage(Tape& tape, const TokenSequence& passage) const {
  return encode_cls(tape, passage);
}

Var DotScorer::interact(Tape&, const Var& query_rep, const Var& passage_rep) const {
  KDRANK_CHECK(query_rep.shape() == passage_rep.shape(), ShapeError,
               "dot scorer: query vector " + shape_to_string(query_rep.shape()) +
                   " does not match passage vector " + shape_to_string(passage_rep.shape()));
  return ops::dot(query_rep, passage_rep);
}

// ---------------------------------------------------------------------------

ColbertScorer::ColbertScorer(const ScorerConfig& config)
    : Scorer(config), rng_(config.init_seed), encoder_(config_.encoder, params_, "colbert.encoder", rng_) {
  head_ = params_.add("colbert.head", projection(config_.encoder.embed_dim, config_.projection_dim(), rng_));
}

Var ColbertScorer::encode_query(Tape& tape, const TokenSequence& query) const {
  std::vector<TokenId> ids = with_prefix(SpecialTokens::kCls, query);
  ids.insert(ids.end(), config_.mask_repeat, SpecialTokens::kMask);
  const SequenceState s = encoder_.encode(tape, ids, encoder_.num_layers());
  return ops::matmul(select_rows(s.hidden, s.keep, 0), p(tape, head_));
}

Var ColbertScorer::encode_passage(Tape& tape, const TokenSequence& passage) const {
  const SequenceState s =
      encoder_.encode(tape, with_prefix(SpecialTokens::kCls, passage), encoder_.num_layers());
  return ops::matmul(select_rows(s.hidden, s.keep, 1), p(tape, head_));
}

Var ColbertScorer::interact(Tape&, const Var& query_rep, const Var& passage_rep) const {
  return colbert_maxsim(query_rep, passage_rep);
}

// ---------------------------------------------------------------------------

PrettScorer::PrettScorer(const ScorerConfig& config)
    : Scorer(config), rng_(config.init_seed), encoder_(config_.encoder, params_, "prett.encoder", rng_) {
  head_ = params_.add("prett.head", projection(config_.encoder.embed_dim, 1, rng_));
}

Var PrettScorer::encode_query(Tape& tape, const TokenSequence& query) const {
  const std::size_t split = config_.prett_split;
  const SequenceState q = encoder_.encode(tape, with_prefix(SpecialTokens::kCls, query), split);
  const TokenId sep_id = SpecialTokens::kSep;
  const SequenceState sep = encoder_.encode(tape, std::span<const TokenId>(&sep_id, 1), split);
  const Var parts[] = {select_rows(q.hidden, q.keep, 0), sep.hidden};
  return ops::concat_rows(parts);
}

Var PrettScorer::encode_passage(Tape& tape, const TokenSequence& passage) const {
  const SequenceState s = encoder_.encode(tape, with_prefix(SpecialTokens::kCls, passage), config_.prett_split);
  return select_rows(s.hidden, s.keep, 1);
}

Var PrettScorer::interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const {
  KDRANK_CHECK(passage_rep.shape().size() == 2 && passage_rep.shape()[0] > 0, ShapeError,
               "empty passage representation");
  const Var parts[] = {query_rep, passage_rep};
  SequenceState joint{ops::concat_rows(parts), {}};
  joint.keep.assign(joint.hidden.shape()[0], 1);
  joint = encoder_.forward(tape, std::move(joint), LayerRange{config_.prett_split, encoder_.num_layers()});
  return ops::reshape(ops::matmul(ops::slice_rows(joint.hidden, 0, 1), p(tape, head_)), Shape{});
}

// ---------------------------------------------------------------------------

TkScorer::TkScorer(const ScorerConfig& config)
    : Scorer(config), rng_(config.init_seed), encoder_(config_.encoder, params_, "tk.encoder", rng_) {
  const double a = std::clamp(config_.encoder.gate_alpha, 1e-6, 1.0 - 1e-6);
  gate_ = params_.add("tk.gate", Tensor(Shape{1}, std::log(a / (1.0 - a))));
  kernel_weights_ = params_.add("tk.kernel_weights", uniform_tensor({config_.kernels.count()}, -0.05, 0.05, rng_));
}

Var TkScorer::alpha(Tape& tape) const { return ops::sigmoid(p(tape, gate_)); }

Var TkScorer::contextualize(Tape& tape, const TokenSequence& seq) const {
  const std::vector<std::uint8_t> keep = padding_mask(seq.ids);
  const Var raw = encoder_.token_embeddings(tape, seq.ids);
  const Var ctx = encoder_.contextualize_gated(tape, raw, keep, alpha(tape));
  return select_rows(ctx, keep, 0);
}

Var TkScorer::encode_query(Tape& tape, const TokenSequence& query) const { return contextualize(tape, query); }

Var TkScorer::encode_passage(Tape& tape, const TokenSequence& passage) const {
  return contextualize(tape, passage);
}

Var TkScorer::interact(Tape& tape, const Var& query_rep, const Var& passage_rep) const {
  KDRANK_CHECK(passage_rep.shape().size() == 2 && passage_rep.shape()[0] > 0, ShapeError,
               "empty passage representation");
  return ops::dot(kernel_pooling(query_rep, passage_rep, config_.kernels), p(tape, kernel_weights_));
}

// ---------------------------------------------------------------------------

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& config) {
  switch (config.kind) {
    case ScorerKind::kCat: return std::make_unique<CatScorer>(config);
    case ScorerKind::kDot: return std::make_unique<DotScorer>(config);
    case ScorerKind::kColbert: return std::make_unique<ColbertScorer>(config);
    case ScorerKind::kPrett: return std::make_unique<PrettScorer>(config);
    case ScorerKind::kTk: return std::make_unique<TkScorer>(config);
  }
  throw ConfigError("unknown scorer kind");
}

}  // namespace kdrank
