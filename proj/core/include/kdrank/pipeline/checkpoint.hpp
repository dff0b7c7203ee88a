#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>

#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

/// Parameter snapshot of a scorer together with the config that built it.
struct Checkpoint {
  ScorerConfig config;
  std::size_t step = 0;
  double val_ndcg10 = 0.0;
  ParameterSet params;
};

Checkpoint snapshot(const Scorer& scorer, std::size_t step, double val_ndcg10);

/// Overwrites the scorer's parameters. Names and shapes must match exactly.
void load_parameters(Scorer& scorer, const ParameterSet& params);

/// Builds a scorer from the checkpoint config and loads its parameters.
std::unique_ptr<Scorer> restore_scorer(const Checkpoint& checkpoint);

/// Binary layout: 8-byte magic, u32 version, u64 FNV-1a hash of the config
/// JSON, u64 JSON length, JSON bytes, u64 step, f64 validation nDCG@10,
/// u64 parameter count, then per parameter: u64 name length, name, u64 rank,
/// rank × u64 dims, f64 values. Integers and floats in host byte order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws FormatError on a bad magic, unknown version, or config hash mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kdrank
