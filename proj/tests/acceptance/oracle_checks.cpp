// Criteria 1-5: gradients, loss algebra, metric and scorer oracles, caching.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "kdrank/autodiff/ops.hpp"
#include "kdrank/evaluation/metrics.hpp"
#include "kdrank/losses/losses.hpp"
#include "kdrank/scorers/kernels.hpp"
#include "kdrank/scorers/scorer.hpp"
#include "kdrank/util/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace kdrank::acceptance {
namespace {

using test::random_sequence;

constexpr double kStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
// Below this magnitude the comparison is absolute (tolerance 1e-8). Central
// differences at h = 1e-5 carry round-off near 1e-9, so gradients that are
// exactly zero (attention key biases) cannot be compared relatively.
constexpr double kGradFloor = 1e-4;

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) { return normal_tensor(std::move(shape), scale, rng); }

ScorerConfig random_small_config(ScorerKind kind, Rng& rng, std::uint64_t seed) {
  ScorerConfig c;
  c.kind = kind;
  c.encoder.vocab_size = 12;
  c.encoder.num_heads = pick(rng, 1, 2);
  c.encoder.embed_dim = c.encoder.num_heads * pick(rng, 2, 4);
  c.encoder.num_layers = kind == ScorerKind::kPrett ? pick(rng, 2, 3) : pick(rng, 1, 2);
  c.encoder.ffn_dim = pick(rng, 4, 12);
  c.encoder.max_positions = 24;
  c.encoder.gate_alpha = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
  c.output_dim = pick(rng, 2, 5);
  c.mask_repeat = pick(rng, 1, 3);
  if (kind == ScorerKind::kPrett) c.prett_split = pick(rng, 1, c.encoder.num_layers - 1);
  c.init_seed = seed;
  return c;
}

struct WorstError {
  double value = 0.0;
  std::string where;
  std::size_t checked = 0;

  void update(double e, const std::string& at) {
    ++checked;
    if (e > value) {
      value = e;
      where = at;
    }
  }
};

// Every coordinate of every parameter against central differences.
void check_scorer_gradients(Scorer& scorer, const TokenSequence& q, const TokenSequence& p, WorstError& worst,
                            const std::string& label) {
  ParameterSet& params = scorer.parameters();
  Gradients grads(params.size());
  {
    Tape tape;
    tape.backward(scorer.score(tape, q, p));
    tape.accumulate_param_grads(grads);
  }
  auto eval = [&] {
    Tape tape(Tape::Mode::kInference);
    return scorer.score(tape, q, p).value().item();
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& value = params[i].value;
    for (std::size_t c = 0; c < value.size(); ++c) {
      const double original = value[c];
      value[c] = original + kStep;
      const double up = eval();
      value[c] = original - kStep;
      const double down = eval();
      value[c] = original;
      const double numeric = (up - down) / (2.0 * kStep);
      const double analytic = grads[i].empty() ? 0.0 : grads[i][c];
      worst.update(relative_error(analytic, numeric), label + " " + params[i].name + "[" + std::to_string(c) + "]");
    }
  }
}

void check_loss_gradients(LossKind kind, Rng& rng, WorstError& worst, const std::string& label) {
  const std::size_t b = pick(rng, 1, 8);
  std::vector<Tensor> inputs = {random_tensor(rng, {b}, 2.0), random_tensor(rng, {b}, 2.0)};
  std::vector<double> tp, tn;
  for (std::size_t i = 0; i < b; ++i) {
    tp.push_back(normal_tensor({1}, 2.0, rng)[0]);
    tn.push_back(normal_tensor({1}, 2.0, rng)[0]);
  }
  auto loss_of = [&](const Var& pos, const Var& neg) {
    return compute_loss(kind, ScorePairBatch{pos, neg, tp, tn});
  };
  Tape tape;
  const Var pos = tape.leaf(inputs[0]);
  const Var neg = tape.leaf(inputs[1]);
  tape.backward(loss_of(pos, neg));
  const Tensor analytic[] = {tape.grad(pos), tape.grad(neg)};
  for (std::size_t side = 0; side < 2; ++side) {
    for (std::size_t c = 0; c < b; ++c) {
      auto eval = [&](double delta) {
        std::vector<Tensor> x = inputs;
        x[side][c] += delta;
        Tape t(Tape::Mode::kInference);
        return loss_of(t.constant(x[0]), t.constant(x[1])).value().item();
      };
      const double numeric = (eval(kStep) - eval(-kStep)) / (2.0 * kStep);
      worst.update(relative_error(analytic[side][c], numeric),
                   label + (side == 0 ? " pos[" : " neg[") + std::to_string(c) + "]");
    }
  }
}

// Values on a 1/64 grid and shifts on a 1/8 grid keep every sum and
// difference exact, so invariance can be tested with ==.
double grid(Rng& rng) { return static_cast<double>(static_cast<int>(rng() % 513) - 256) / 64.0; }

double brute_dcg(const std::vector<int>& grades, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t r = 0; r < grades.size() && r < k; ++r) {
    dcg += (std::pow(2.0, grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg;
}

// Ideal DCG by trying every ordering of the judged grades.
double brute_idcg(std::vector<int> judged, std::size_t k) {
  std::sort(judged.begin(), judged.end());
  double best = 0.0;
  do {
    best = std::max(best, brute_dcg(judged, k));
  } while (std::next_permutation(judged.begin(), judged.end()));
  return best;
}

struct MicroCase {
  std::vector<RunEntry> run;
  std::map<std::string, int> grades;
};

struct BruteMetrics {
  double ndcg = 0.0;
  bool has_binary = false;
  double rr = 0.0;
  double ap = 0.0;
};

BruteMetrics brute_metrics(const MicroCase& mc, std::size_t map_k) {
  std::vector<RunEntry> ranked = mc.run;
  std::sort(ranked.begin(), ranked.end(), [](const RunEntry& a, const RunEntry& b) {
    return a.score != b.score ? a.score > b.score : a.passage_id < b.passage_id;
  });
  std::vector<int> gains;
  for (const RunEntry& e : ranked) {
    const auto it = mc.grades.find(e.passage_id);
    gains.push_back(it == mc.grades.end() ? 0 : it->second);
  }
  std::vector<int> judged;
  std::size_t relevant = 0;
  for (const auto& [pid, g] : mc.grades) {
    judged.push_back(g);
    relevant += g >= 2 ? 1 : 0;
  }
  BruteMetrics m;
  const double idcg = brute_idcg(judged, 10);
  m.ndcg = idcg == 0.0 ? 0.0 : brute_dcg(gains, 10) / idcg;
  m.has_binary = relevant > 0;
  for (std::size_t r = 0; r < gains.size() && r < 10; ++r) {
    if (gains[r] >= 2) {
      m.rr = 1.0 / static_cast<double>(r + 1);
      break;
    }
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < gains.size() && r < map_k; ++r) {
    if (gains[r] >= 2) sum += static_cast<double>(++hits) / static_cast<double>(r + 1);
  }
  if (relevant > 0) m.ap = sum / static_cast<double>(std::min(relevant, map_k));
  return m;
}

MicroCase random_micro_case(Rng& rng) {
  MicroCase mc;
  const std::size_t n = pick(rng, 1, 6);
  for (std::size_t i = 0; i < n; ++i) {
    // Few distinct scores so ties are common.
    mc.run.push_back({"d" + std::to_string(i), static_cast<double>(rng() % 4) * 0.5});
    if (rng() % 4 != 0) mc.grades["d" + std::to_string(i)] = static_cast<int>(rng() % 4);
  }
  const std::size_t unretrieved = rng() % 3;
  for (std::size_t i = 0; i < unretrieved; ++i) mc.grades["u" + std::to_string(i)] = static_cast<int>(rng() % 4);
  if (mc.grades.empty()) mc.grades["d0"] = static_cast<int>(rng() % 4);
  return mc;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

}  // namespace

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  constexpr int kConfigs = 20;
  std::ostringstream detail;
  bool pass = true;
  for (ScorerKind kind : kAllScorerKinds) {
    WorstError worst;
    for (int t = 0; t < kConfigs; ++t) {
      const ScorerConfig config = random_small_config(kind, rng, 1000 + t);
      const auto scorer = make_scorer(config);
      const TokenSequence q = random_sequence(rng, 1, 4, config.encoder.vocab_size);
      const TokenSequence p = random_sequence(rng, 2, 6, config.encoder.vocab_size);
      check_scorer_gradients(*scorer, q, p, worst, "config " + std::to_string(t));
    }
    pass = pass && worst.value < kGradTolerance;
    detail << to_string(kind) << " " << fmt(worst.value) << " (" << worst.checked << " coords";
    if (worst.value >= kGradTolerance) detail << ", worst at " << worst.where;
    detail << "); ";
  }
  for (LossKind kind : {LossKind::kMarginMse, LossKind::kPointwiseMse, LossKind::kWeightedRankNet, LossKind::kRankNet}) {
    WorstError worst;
    for (int t = 0; t < kConfigs; ++t) check_loss_gradients(kind, rng, worst, "batch " + std::to_string(t));
    pass = pass && worst.value < kGradTolerance;
    detail << to_string(kind) << " " << fmt(worst.value);
    if (worst.value >= kGradTolerance) detail << " (worst at " << worst.where << ")";
    detail << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && secs < 120.0;
  detail << "max relative error vs central differences (h=1e-5), " << kConfigs << " configs each, " << fmt(secs)
         << " s";
  return {pass, detail.str()};
}

Outcome margin_mse_algebra() {
  Rng rng(202);
  constexpr int kCases = 200;
  int fixpoint_bad = 0, shift_bad = 0, pointwise_invariant = 0, pointwise_formula_bad = 0;
  for (int t = 0; t < kCases; ++t) {
    const std::size_t b = pick(rng, 1, 8);
    std::vector<double> sp(b), sn(b), tp(b), tn(b), tp2(b), tn2(b), shift(b);
    bool nonzero_shift = false;
    for (std::size_t i = 0; i < b; ++i) {
      sp[i] = grid(rng);
      sn[i] = grid(rng);
      tp[i] = grid(rng);
      tn[i] = grid(rng);
      shift[i] = static_cast<double>(static_cast<int>(rng() % 33) - 16) / 8.0;
      if (i == 0 && shift[i] == 0.0) shift[i] = 0.5;
      nonzero_shift = nonzero_shift || shift[i] != 0.0;
      tp2[i] = tp[i] + shift[i];
      tn2[i] = tn[i] + shift[i];
    }
    Tape tape(Tape::Mode::kInference);
    const Var s_pos = tape.constant(Tensor::vector(sp));
    const Var s_neg = tape.constant(Tensor::vector(sn));

    // Student equal to teacher.
    const double at_fixpoint =
        margin_mse_loss({tape.constant(Tensor::vector(tp)), tape.constant(Tensor::vector(tn)), tp, tn}).value().item();
    fixpoint_bad += at_fixpoint == 0.0 ? 0 : 1;
    // Same margins, shifted scores.
    const double shifted_student = margin_mse_loss({tape.constant(Tensor::vector(tp2)),
                                                    tape.constant(Tensor::vector(tn2)), tp, tn})
                                       .value()
                                       .item();
    fixpoint_bad += shifted_student == 0.0 ? 0 : 1;

    const double base = margin_mse_loss({s_pos, s_neg, tp, tn}).value().item();
    const double moved = margin_mse_loss({s_pos, s_neg, tp2, tn2}).value().item();
    shift_bad += base == moved ? 0 : 1;

    const double pw_base = pointwise_mse_loss({s_pos, s_neg, tp, tn}).value().item();
    const double pw_moved = pointwise_mse_loss({s_pos, s_neg, tp2, tn2}).value().item();
    pointwise_invariant += (nonzero_shift && pw_base == pw_moved) ? 1 : 0;
    // Closed form of the change: mean_i [c_i^2 - 2 c_i (s+_i - t+_i)] + mean_i [c_i^2 - 2 c_i (s-_i - t-_i)].
    double expected = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      expected += 2.0 * shift[i] * shift[i] - 2.0 * shift[i] * (sp[i] - tp[i]) - 2.0 * shift[i] * (sn[i] - tn[i]);
    }
    expected /= static_cast<double>(b);
    pointwise_formula_bad += std::abs((pw_moved - pw_base) - expected) <= 1e-9 ? 0 : 1;
  }
  const bool pass = fixpoint_bad == 0 && shift_bad == 0 && pointwise_invariant == 0 && pointwise_formula_bad == 0;
  std::ostringstream d;
  d << kCases << " cases: non-zero at fixpoint " << fixpoint_bad << ", shift changed margin-mse " << shift_bad
    << ", pointwise unchanged by a shift " << pointwise_invariant << ", pointwise change off its closed form "
    << pointwise_formula_bad;
  return {pass, d.str()};
}

Outcome metric_oracles() {
  std::ostringstream d;
  bool pass = true;

  // Sole relevant passage at rank 2.
  {
    Run run;
    run["q"] = {{"a", 2.0}, {"b", 1.0}};
    Qrels qrels;
    qrels.set("q", "a", 0);
    qrels.set("q", "b", 2);
    const MetricReport r = evaluate_run(run, qrels);
    const double expected = 1.0 / std::log2(3.0);
    const bool ok = std::abs(r.mean_ndcg - expected) <= 1e-9 && std::abs(r.mean_mrr - 0.5) <= 1e-9;
    pass = pass && ok;
    d << "hand case nDCG " << r.mean_ndcg << " (expected " << expected << ")" << (ok ? "" : " MISMATCH") << "; ";
  }

  Rng rng(303);
  constexpr int kCases = 100;
  std::vector<MicroCase> cases;
  Run run;
  Qrels qrels;
  for (int t = 0; t < kCases; ++t) {
    cases.push_back(random_micro_case(rng));
    const std::string qid = "q" + std::to_string(t);
    run[qid] = cases.back().run;
    for (const auto& [pid, g] : cases.back().grades) qrels.set(qid, pid, g);
  }
  for (std::size_t map_k : {std::size_t{1000}, std::size_t{3}}) {
    MetricConfig config;
    config.map_k = map_k;
    const MetricReport report = evaluate_run(run, qrels, config);
    double worst = 0.0;
    int presence_bad = 0;
    double sum_ndcg = 0.0, sum_rr = 0.0, sum_ap = 0.0;
    std::size_t binary = 0;
    for (int t = 0; t < kCases; ++t) {
      const BruteMetrics b = brute_metrics(cases[t], map_k);
      const std::string qid = "q" + std::to_string(t);
      const auto it = std::find_if(report.per_query.begin(), report.per_query.end(),
                                   [&](const QueryMetrics& m) { return m.query_id == qid; });
      if (it == report.per_query.end()) {
        ++presence_bad;
        continue;
      }
      worst = std::max(worst, std::abs(it->ndcg - b.ndcg));
      sum_ndcg += b.ndcg;
      if (b.has_binary != it->mrr.has_value() || b.has_binary != it->map.has_value()) {
        ++presence_bad;
        continue;
      }
      if (b.has_binary) {
        worst = std::max({worst, std::abs(*it->mrr - b.rr), std::abs(*it->map - b.ap)});
        sum_rr += b.rr;
        sum_ap += b.ap;
        ++binary;
      }
    }
    worst = std::max(worst, std::abs(report.mean_ndcg - sum_ndcg / kCases));
    if (binary > 0) {
      worst = std::max({worst, std::abs(report.mean_mrr - sum_rr / static_cast<double>(binary)),
                        std::abs(report.mean_map - sum_ap / static_cast<double>(binary))});
    }
    const bool ok = worst <= 1e-9 && presence_bad == 0;
    pass = pass && ok;
    d << kCases << " micro-cases with MAP@" << map_k << ": max deviation " << fmt(worst) << ", presence mismatches "
      << presence_bad << "; ";
  }
  return {pass, d.str()};
}

Outcome scorer_oracles() {
  Rng rng(404);
  std::ostringstream d;
  constexpr int kCases = 300;
  int colbert_bad = 0, pooling_bad = 0;
  for (int t = 0; t < kCases; ++t) {
    const std::size_t m = pick(rng, 1, 12), n = pick(rng, 1, 12), dim = pick(rng, 1, 16);
    const Tensor q = random_tensor(rng, {m, dim});
    const Tensor p = random_tensor(rng, {n, dim});
    Tape tape(Tape::Mode::kInference);
    const double got = colbert_maxsim(tape.constant(q), tape.constant(p)).value().item();
    colbert_bad += got == test::oracle::colbert_maxsim(q, p) ? 0 : 1;

    KernelConfig kernels = KernelConfig::defaults();
    if (t % 2 == 1) kernels.sigma = 0.05 + 0.01 * static_cast<double>(rng() % 20);
    const Tensor pooled = kernel_pooling(tape.constant(q), tape.constant(p), kernels).value();
    const std::vector<double> expected = test::oracle::kernel_pooling(q, p, kernels.centers, kernels.sigma);
    pooling_bad += std::vector<double>(pooled.data().begin(), pooled.data().end()) == expected ? 0 : 1;
  }

  Tape tape(Tape::Mode::kInference);
  const Tensor act = kernel_activations(tape.constant(Tensor::matrix({{1.0}})), KernelConfig{{0.9}, 0.1}).value();
  const double deviation = std::abs(act[0] - std::exp(-0.5));
  const bool pass = colbert_bad == 0 && pooling_bad == 0 && deviation <= 1e-12;
  d << kCases << " cases (m,n <= 12, dim <= 16): colbert mismatches " << colbert_bad << ", kernel pooling mismatches "
    << pooling_bad << "; activation(cos=1, mu=0.9, sigma=0.1) = " << act[0] << ", |diff from exp(-0.5)| "
    << fmt(deviation);
  return {pass, d.str()};
}

Outcome cache_soundness() {
  Rng rng(505);
  std::ostringstream d;
  bool pass = true;
  constexpr int kPairs = 1000;
  constexpr std::size_t kVocab = 60;
  auto config_for = [](ScorerKind kind, std::size_t layers, std::size_t split) {
    ScorerConfig c = test::tiny_config(kind, 17, kVocab);
    c.encoder.embed_dim = 16;
    c.encoder.ffn_dim = 32;
    c.encoder.num_layers = layers;
    c.output_dim = 8;
    c.mask_repeat = 4;
    c.prett_split = split;
    return c;
  };
  auto mismatches = [&](const Scorer& s, int pairs) {
    int bad = 0;
    for (int i = 0; i < pairs; ++i) {
      const TokenSequence q = random_sequence(rng, 1, 6, kVocab);
      const TokenSequence p = random_sequence(rng, 1, 20, kVocab);
      Tape fresh(Tape::Mode::kInference), cached(Tape::Mode::kInference);
      const double a = s.score(fresh, q, p).value().item();
      const double b = s.score_cached(cached, q, s.precompute(p, i)).value().item();
      bad += a == b ? 0 : 1;
    }
    return bad;
  };
  for (ScorerKind kind : {ScorerKind::kDot, ScorerKind::kColbert, ScorerKind::kPrett, ScorerKind::kTk}) {
    const int bad = mismatches(*make_scorer(config_for(kind, 2, 1)), kPairs);
    pass = pass && bad == 0;
    d << to_string(kind) << " " << bad << "/" << kPairs << " mismatches; ";
  }
  constexpr std::size_t kLayers = 4;
  for (std::size_t split = 1; split < kLayers; ++split) {
    const int bad = mismatches(*make_scorer(config_for(ScorerKind::kPrett, kLayers, split)), 200);
    pass = pass && bad == 0;
    d << "prett split " << split << "/" << kLayers << " " << bad << "/200; ";
  }
  d << "cached vs fresh compared bitwise";
  return {pass, d.str()};
}

}  // namespace kdrank::acceptance
