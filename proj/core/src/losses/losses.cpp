#include "kdrank/losses/losses.hpp"

#include <cmath>
#include <string>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/error.hpp"

namespace kdrank {
namespace {

std::size_t check_students(const Var& pos, const Var& neg) {
  KDRANK_CHECK(pos.valid() && neg.valid(), Error, "loss on unbound score variables");
  KDRANK_CHECK(pos.shape().size() == 1 && pos.shape() == neg.shape(), ShapeError,
               "student scores must be aligned [B] vectors");
  KDRANK_CHECK(pos.shape()[0] >= 1, ShapeError, "empty batch");
  return pos.shape()[0];
}

void check_teacher(const ScorePairBatch& batch) {
  const std::size_t b = check_students(batch.student_pos, batch.student_neg);
  KDRANK_CHECK(!batch.teacher_pos.empty() && !batch.teacher_neg.empty(), Error,
               "distillation loss requires teacher scores");
  KDRANK_CHECK(batch.teacher_pos.size() == b && batch.teacher_neg.size() == b, ShapeError,
               "teacher scores are not aligned with the batch");
}

Var teacher_margins(Tape& tape, const ScorePairBatch& batch) {
  Tensor m(Shape{batch.teacher_pos.size()});
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = batch.teacher_pos[i] - batch.teacher_neg[i];
  return tape.constant(std::move(m));
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMarginMse: return "margin_mse";
    case LossKind::kPointwiseMse: return "pointwise_mse";
    case LossKind::kWeightedRankNet: return "weighted_ranknet";
    case LossKind::kRankNet: return "ranknet";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kMarginMse, LossKind::kPointwiseMse, LossKind::kWeightedRankNet,
                     LossKind::kRankNet}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

bool uses_teacher(LossKind kind) { return kind != LossKind::kRankNet; }

Var ranknet_loss(const Var& pos, const Var& neg) {
  check_students(pos, neg);
  return ops::mean(ops::softplus(ops::neg(ops::sub(pos, neg))));
}

Var margin_mse_loss(const ScorePairBatch& batch) {
  check_teacher(batch);
  Tape& tape = batch.student_pos.tape();
  const Var student = ops::sub(batch.student_pos, batch.student_neg);
  return ops::mean(ops::square(ops::sub(student, teacher_margins(tape, batch))));
}

Var pointwise_mse_loss(const ScorePairBatch& batch) {
  check_teacher(batch);
  Tape& tape = batch.student_pos.tape();
  const Var tp = tape.constant(Tensor::vector(batch.teacher_pos));
  const Var tn = tape.constant(Tensor::vector(batch.teacher_neg));
  return ops::add(ops::mean(ops::square(ops::sub(batch.student_pos, tp))),
                  ops::mean(ops::square(ops::sub(batch.student_neg, tn))));
}

Var weighted_ranknet_loss(const ScorePairBatch& batch) {
  check_teacher(batch);
  Tape& tape = batch.student_pos.tape();
  Tensor weights(Shape{batch.teacher_pos.size()});
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::abs(batch.teacher_pos[i] - batch.teacher_neg[i]);
  }
  const Var per_pair = ops::softplus(ops::neg(ops::sub(batch.student_pos, batch.student_neg)));
  return ops::mean(ops::mul(per_pair, tape.constant(std::move(weights))));
}

Var compute_loss(LossKind kind, const ScorePairBatch& batch) {
  switch (kind) {
    case LossKind::kMarginMse: return margin_mse_loss(batch);
    case LossKind::kPointwiseMse: return pointwise_mse_loss(batch);
    case LossKind::kWeightedRankNet: return weighted_ranknet_loss(batch);
    case LossKind::kRankNet: return ranknet_loss(batch.student_pos, batch.student_neg);
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace kdrank
