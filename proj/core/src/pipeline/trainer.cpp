#include "kdrank/pipeline/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/error.hpp"
#include "kdrank/pipeline/scoring.hpp"
#include "kdrank/util/format.hpp"
#include "kdrank/util/parallel.hpp"
#include "kdrank/util/rng.hpp"

namespace kdrank {

Adam::Adam(const ParameterSet& params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  KDRANK_CHECK(learning_rate > 0.0, ConfigError, "learning rate must be positive");
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape(), 0.0);
    v_.emplace_back(p.value.shape(), 0.0);
  }
}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  KDRANK_CHECK(params.size() == m_.size() && grads.size() == m_.size(), Error,
               "optimizer state does not match the parameter set");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> w = params[i].value.data();
    std::span<double> m = m_[i].data();
    std::span<double> v = v_[i].data();
    const bool has_grad = !grads[i].empty();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = has_grad ? grads[i][k] : 0.0;
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_shortest(*v) : std::string("-"); }

std::optional<double> parse_opt(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  if (s == "-") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(path.string(), line, "bad number '" + s + "'");
}

struct SampleResult {
  Gradients grads;
  double loss = 0.0;
  double pos = 0.0;
  double neg = 0.0;
};

struct IntervalStats {
  double loss = 0.0, pos = 0.0, neg = 0.0;
  std::size_t correct = 0, pairs = 0, steps = 0;

  TrainLogRow row(std::size_t step) const {
    TrainLogRow r;
    r.step = step;
    if (steps == 0) return r;
    r.loss = loss / static_cast<double>(steps);
    r.pairwise_acc = static_cast<double>(correct) / static_cast<double>(pairs);
    r.margin_mean_pos = pos / static_cast<double>(pairs);
    r.margin_mean_neg = neg / static_cast<double>(pairs);
    return r;
  }
};

}  // namespace

std::string training_log_header() { return "step\tloss\tpairwise_acc\tmargin_mean_pos\tmargin_mean_neg\tval_ndcg10"; }

std::string format_training_log_row(const TrainLogRow& r) {
  return std::to_string(r.step) + '\t' + opt(r.loss) + '\t' + opt(r.pairwise_acc) + '\t' + opt(r.margin_mean_pos) +
         '\t' + opt(r.margin_mean_neg) + '\t' + opt(r.val_ndcg10);
}

std::vector<TrainLogRow> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  KDRANK_CHECK(in.good(), Error, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  KDRANK_CHECK(std::getline(in, line) && line == training_log_header(), FormatError,
               path.string() + ": missing training log header");
  std::vector<TrainLogRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    if (cols.size() != 6) throw FormatError(path.string(), line_no, "expected 6 columns");
    TrainLogRow r;
    r.step = static_cast<std::size_t>(std::stoull(cols[0]));
    r.loss = parse_opt(cols[1], path, line_no);
    r.pairwise_acc = parse_opt(cols[2], path, line_no);
    r.margin_mean_pos = parse_opt(cols[3], path, line_no);
    r.margin_mean_neg = parse_opt(cols[4], path, line_no);
    r.val_ndcg10 = parse_opt(cols[5], path, line_no);
    rows.push_back(r);
  }
  return rows;
}

double validate(const Scorer& scorer, const ValidationData& validation, std::size_t threads) {
  KDRANK_CHECK(validation.queries && validation.passages && validation.candidates && validation.qrels, Error,
               "incomplete validation data");
  const Run run = rerank(scorer, *validation.candidates, *validation.queries, *validation.passages, threads);
  return evaluate_run(run, *validation.qrels, validation.metrics).mean_ndcg;
}

TrainResult train(Scorer& scorer, const TrainingData& data, const ValidationData* validation,
                  const TrainConfig& config, std::ostream* log_out) {
  config.validate();
  KDRANK_CHECK(data.queries && data.passages, Error, "training data needs query and passage tokens");
  KDRANK_CHECK(!data.triples.empty() || config.max_steps == 0, Error, "no training triples");
  const bool distill = uses_teacher(config.loss_kind);
  if (distill) {
    KDRANK_CHECK(!data.teacher.empty(), Error,
                 "loss '" + std::string(to_string(config.loss_kind)) + "' requires teacher scores");
    check_alignment(data.triples, data.teacher);
  }
  const bool binary_signal =
      config.loss_kind == LossKind::kRankNet || config.loss_kind == LossKind::kWeightedRankNet;

  std::vector<std::array<std::size_t, 3>> idx(data.triples.size());
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    const auto& t = data.triples[i];
    idx[i] = {data.queries->index_of(t.query_id), data.passages->index_of(t.pos_passage_id),
              data.passages->index_of(t.neg_passage_id)};
  }

  ParameterSet& params = scorer.parameters();
  Adam adam(params, config.resolved_learning_rate(scorer.kind()));
  Rng order_rng(derive_seed(config.seed, 0x7472));
  std::vector<std::size_t> order(data.triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainResult result;
  const std::size_t log_interval = config.resolved_log_interval();
  auto emit = [&](const TrainLogRow& row) {
    result.log.push_back(row);
    if (log_out) *log_out << format_training_log_row(row) << '\n' << std::flush;
  };
  if (log_out) *log_out << training_log_header() << '\n';

  double best_score = -1.0;
  std::size_t since_improvement = 0;
  auto run_validation = [&](std::size_t step) -> std::optional<double> {
    if (validation == nullptr) return std::nullopt;
    const double ndcg = validate(scorer, *validation, config.threads);
    if (ndcg > best_score) {
      best_score = ndcg;
      result.best = snapshot(scorer, step, ndcg);
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    return ndcg;
  };

  TrainLogRow first;
  first.val_ndcg10 = run_validation(0);
  emit(first);

  IntervalStats stats;
  std::vector<SampleResult> samples(config.batch_size);
  std::size_t step = 0;
  while (step < config.max_steps) {
    ++step;
    std::vector<std::size_t> batch(config.batch_size);
    for (auto& b : batch) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
        cursor = 0;
      }
      b = order[cursor++];
    }
    try {
      parallel_for(batch.size(), config.threads, [&](std::size_t s) {
        const auto& [qi, pi, ni] = idx[batch[s]];
        Tape tape;
        const TokenSequence& q = data.queries->at(qi);
        const Var pos = scorer.score(tape, q, data.passages->at(pi));
        const Var neg = scorer.score(tape, q, data.passages->at(ni));
        const Var one_pos[] = {pos};
        const Var one_neg[] = {neg};
        ScorePairBatch pair{ops::stack(one_pos), ops::stack(one_neg), {}, {}};
        if (distill) {
          pair.teacher_pos = {data.teacher[batch[s]].pos_score};
          pair.teacher_neg = {data.teacher[batch[s]].neg_score};
        }
        const Var loss = compute_loss(config.loss_kind, pair);
        tape.backward(loss);
        SampleResult& r = samples[s];
        r.grads = Gradients(params.size());
        tape.accumulate_param_grads(r.grads);
        r.loss = loss.value().item();
        r.pos = pos.value().item();
        r.neg = neg.value().item();
      });
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }

    Gradients total(params.size());
    double loss = 0.0;
    for (auto& s : samples) {
      total.add(s.grads);
      loss += s.loss;
      stats.pos += s.pos;
      stats.neg += s.neg;
      stats.correct += s.pos > s.neg ? 1 : 0;
    }
    total.scale(1.0 / static_cast<double>(batch.size()));
    loss /= static_cast<double>(batch.size());
    KDRANK_CHECK(std::isfinite(loss), NonFiniteError,
                 "training diverged at step " + std::to_string(step) + ": non-finite loss");
    adam.step(params, total);
    stats.loss += loss;
    stats.pairs += batch.size();
    ++stats.steps;
    (binary_signal ? result.label_reads : result.teacher_reads) += batch.size();
    if (config.loss_kind == LossKind::kWeightedRankNet) result.teacher_reads += batch.size();

    std::optional<double> val;
    if (step % config.validation_interval == 0 || step == config.max_steps) val = run_validation(step);
    const bool stop = val && since_improvement >= config.early_stop_patience;
    if (step % log_interval == 0 || step == config.max_steps || stop || val) {
      TrainLogRow row = stats.row(step);
      row.val_ndcg10 = val;
      emit(row);
      stats = {};
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.steps_run = step;
  if (validation == nullptr) result.best = snapshot(scorer, step, 0.0);
  load_parameters(scorer, result.best.params);
  return result;
}

}  // namespace kdrank
