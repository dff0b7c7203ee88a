#pragma once

#include <string_view>
#include <vector>

#include "kdrank/autodiff/tape.hpp"

namespace kdrank {

enum class LossKind { kMarginMse, kPointwiseMse, kWeightedRankNet, kRankNet };

std::string_view to_string(LossKind kind);
/// Accepts "margin_mse", "pointwise_mse", "weighted_ranknet", "ranknet".
LossKind parse_loss_kind(std::string_view name);
/// True for the distillation losses, which need teacher scores.
bool uses_teacher(LossKind kind);

/// Student scores as [B] variables plus optional teacher scores for the same pairs.
struct ScorePairBatch {
  Var student_pos;
  Var student_neg;
  std::vector<double> teacher_pos;
  std::vector<double> teacher_neg;
};

/// mean_i log(1 + exp(-(pos_i - neg_i))). Teacher scores are not read.
Var ranknet_loss(const Var& pos, const Var& neg);

/// mean_i ((s+_i - s-_i) - (t+_i - t-_i))^2
Var margin_mse_loss(const ScorePairBatch& batch);

/// MSE(s+, t+) + MSE(s-, t-)
Var pointwise_mse_loss(const ScorePairBatch& batch);

/// mean_i ranknet(s+_i - s-_i) * |t+_i - t-_i|
Var weighted_ranknet_loss(const ScorePairBatch& batch);

Var compute_loss(LossKind kind, const ScorePairBatch& batch);

}  // namespace kdrank
