#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/encoder/vocabulary.hpp"
#include "kdrank/util/rng.hpp"

namespace kdrank {

struct EncoderConfig {
  std::size_t vocab_size = 5000;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t max_positions = 256;
  /// Initial contextualization gate for gated encoders; clamped to [0, 1].
  double gate_alpha = 0.5;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Half-open, 0-based range of transformer layers: [begin, end).
struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Hidden states of one sequence plus the key mask (0 marks padding).
struct SequenceState {
  Var hidden;
  std::vector<std::uint8_t> keep;
};

std::vector<std::uint8_t> padding_mask(std::span<const TokenId> ids);

/// Token + learned position embeddings followed by a stack of post-LN
/// transformer layers. Parameters live in an external ParameterSet under
/// `prefix`; the encoder stores indices only and reads values through a tape.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterSet& params, const std::string& prefix, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }

  /// Token embeddings only (no positions): [len × embed_dim].
  Var token_embeddings(Tape& tape, std::span<const TokenId> ids) const;
  /// Token plus position embeddings, positions counted from 0.
  SequenceState embed(Tape& tape, std::span<const TokenId> ids) const;
  /// Runs layers [range.begin, range.end) on `state`.
  SequenceState forward(Tape& tape, SequenceState state, LayerRange range) const;
  /// embed followed by layers [0, layers).
  SequenceState encode(Tape& tape, std::span<const TokenId> ids, std::size_t layers) const;

  /// raw * alpha + TF(raw) * (1 - alpha), where TF adds positions and runs
  /// every layer. `alpha` must hold a single value.
  Var contextualize_gated(Tape& tape, const Var& raw, std::span<const std::uint8_t> keep,
                          const Var& alpha) const;

 private:
  struct LayerParams {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln1_gain, ln1_bias;
    std::size_t w1, b1, w2, b2;
    std::size_t ln2_gain, ln2_bias;
  };

  Var p(Tape& tape, std::size_t index) const { return tape.param(*params_, index); }
  Var layer(Tape& tape, const Var& x, std::span<const std::uint8_t> keep, const LayerParams& lp) const;
  Var add_positions(Tape& tape, const Var& x) const;

  EncoderConfig config_;
  const ParameterSet* params_;
  std::size_t token_table_;
  std::size_t position_table_;
  std::vector<LayerParams> layers_;
};

}  // namespace kdrank
