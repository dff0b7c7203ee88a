#include "kdrank/encoder/encoder.hpp"

#include <cmath>
#include <numeric>

#include "kdrank/error.hpp"

namespace kdrank {

void EncoderConfig::validate() const {
  KDRANK_CHECK(vocab_size > SpecialTokens::kCount, ConfigError, "vocab_size must exceed the special tokens");
  KDRANK_CHECK(embed_dim > 0, ConfigError, "embed_dim must be positive");
  KDRANK_CHECK(num_heads > 0 && embed_dim % num_heads == 0, ConfigError,
               "embed_dim must be divisible by num_heads");
  KDRANK_CHECK(ffn_dim > 0, ConfigError, "ffn_dim must be positive");
  KDRANK_CHECK(max_positions > 0, ConfigError, "max_positions must be positive");
  KDRANK_CHECK(std::isfinite(gate_alpha), ConfigError, "gate_alpha must be finite");
}

std::vector<std::uint8_t> padding_mask(std::span<const TokenId> ids) {
  std::vector<std::uint8_t> keep(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) keep[i] = ids[i] != SpecialTokens::kPad;
  return keep;
}

Encoder::Encoder(const EncoderConfig& config, ParameterSet& params, const std::string& prefix, Rng& rng)
    : config_(config), params_(&params) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t f = config_.ffn_dim;
  token_table_ = params.add(prefix + ".token_embedding", normal_tensor({config_.vocab_size, d}, 1.0, rng));
  position_table_ =
      params.add(prefix + ".position_embedding", normal_tensor({config_.max_positions, d}, 0.1, rng));
  const double wd = 1.0 / std::sqrt(static_cast<double>(d));
  const double wf = 1.0 / std::sqrt(static_cast<double>(f));
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string n = prefix + ".layer" + std::to_string(l) + ".";
    LayerParams lp{};
    lp.wq = params.add(n + "attn.wq", normal_tensor({d, d}, wd, rng));
    lp.bq = params.add(n + "attn.bq", Tensor({d}));
    lp.wk = params.add(n + "attn.wk", normal_tensor({d, d}, wd, rng));
    lp.bk = params.add(n + "attn.bk", Tensor({d}));
    lp.wv = params.add(n + "attn.wv", normal_tensor({d, d}, wd, rng));
    lp.bv = params.add(n + "attn.bv", Tensor({d}));
    lp.wo = params.add(n + "attn.wo", normal_tensor({d, d}, wd, rng));
    lp.bo = params.add(n + "attn.bo", Tensor({d}));
    lp.ln1_gain = params.add(n + "ln1.gain", Tensor({d}, 1.0));
    lp.ln1_bias = params.add(n + "ln1.bias", Tensor({d}));
    lp.w1 = params.add(n + "ffn.w1", normal_tensor({d, f}, wd, rng));
    lp.b1 = params.add(n + "ffn.b1", Tensor({f}));
    lp.w2 = params.add(n + "ffn.w2", normal_tensor({f, d}, wf, rng));
    lp.b2 = params.add(n + "ffn.b2", Tensor({d}));
    lp.ln2_gain = params.add(n + "ln2.gain", Tensor({d}, 1.0));
    lp.ln2_bias = params.add(n + "ln2.bias", Tensor({d}));
    layers_.push_back(lp);
  }
}

Var Encoder::token_embeddings(Tape& tape, std::span<const TokenId> ids) const {
  KDRANK_CHECK(!ids.empty(), ShapeError, "cannot embed an empty sequence");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (std::size_t r : rows) {
    KDRANK_CHECK(r < config_.vocab_size, ShapeError,
                 "token id " + std::to_string(r) + " outside vocabulary of " +
                     std::to_string(config_.vocab_size));
  }
  return ops::gather_rows(p(tape, token_table_), rows);
}

Var Encoder::add_positions(Tape& tape, const Var& x) const {
  const std::size_t len = x.shape()[0];
  KDRANK_CHECK(len <= config_.max_positions, ShapeError,
               "sequence of " + std::to_string(len) + " tokens exceeds max_positions " +
                   std::to_string(config_.max_positions));
  std::vector<std::size_t> positions(len);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return ops::add(x, ops::gather_rows(p(tape, position_table_), positions));
}

SequenceState Encoder::embed(Tape& tape, std::span<const TokenId> ids) const {
  return SequenceState{add_positions(tape, token_embeddings(tape, ids)), padding_mask(ids)};
}

Var Encoder::layer(Tape& tape, const Var& x, std::span<const std::uint8_t> keep,
                   const LayerParams& lp) const {
  using namespace ops;
  const std::size_t heads = config_.num_heads;
  const std::size_t dh = config_.embed_dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Var q = add_row(matmul(x, p(tape, lp.wq)), p(tape, lp.bq));
  const Var k = add_row(matmul(x, p(tape, lp.wk)), p(tape, lp.bk));
  const Var v = add_row(matmul(x, p(tape, lp.wv)), p(tape, lp.bv));
  std::vector<Var> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = slice_cols(q, h * dh, dh);
    const Var kh = slice_cols(k, h * dh, dh);
    const Var vh = slice_cols(v, h * dh, dh);
    const Var attn = softmax(scale(matmul_bt(qh, kh), inv_sqrt), keep);
    head_out.push_back(matmul(attn, vh));
  }
  const Var merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  const Var attn_out = add_row(matmul(merged, p(tape, lp.wo)), p(tape, lp.bo));
  const Var h1 = layer_norm_rows(add(x, attn_out), p(tape, lp.ln1_gain), p(tape, lp.ln1_bias));

  const Var ff = add_row(matmul(gelu(add_row(matmul(h1, p(tape, lp.w1)), p(tape, lp.b1))), p(tape, lp.w2)),
                         p(tape, lp.b2));
  return layer_norm_rows(add(h1, ff), p(tape, lp.ln2_gain), p(tape, lp.ln2_bias));
}

SequenceState Encoder::forward(Tape& tape, SequenceState state, LayerRange range) const {
  KDRANK_CHECK(range.begin <= range.end && range.end <= layers_.size(), ShapeError,
               "layer range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                   ") outside encoder of " + std::to_string(layers_.size()) + " layers");
  KDRANK_CHECK(state.keep.size() == state.hidden.shape()[0], ShapeError, "mask length mismatch");
  for (std::size_t l = range.begin; l < range.end; ++l) {
    state.hidden = layer(tape, state.hidden, state.keep, layers_[l]);
  }
  return state;
}

SequenceState Encoder::encode(Tape& tape, std::span<const TokenId> ids, std::size_t layers) const {
  return forward(tape, embed(tape, ids), LayerRange{0, layers});
}

Var Encoder::contextualize_gated(Tape& tape, const Var& raw, std::span<const std::uint8_t> keep,
                                 const Var& alpha) const {
  SequenceState tf{add_positions(tape, raw), std::vector<std::uint8_t>(keep.begin(), keep.end())};
  tf = forward(tape, std::move(tf), LayerRange{0, layers_.size()});
  const Var one_minus_alpha = ops::add_scalar(ops::neg(alpha), 1.0);
  return ops::add(ops::scale_by(raw, alpha), ops::scale_by(tf.hidden, one_minus_alpha));
}

}  // namespace kdrank
