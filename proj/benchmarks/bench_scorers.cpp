// Micro benchmarks for scoring one query against cached candidates and for
// the interaction primitives. Token ids and caches are prepared outside the
// timed loop.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/benchmark/latency.hpp"
#include "kdrank/losses/losses.hpp"
#include "kdrank/pipeline/scoring.hpp"
#include "kdrank/scorers/kernels.hpp"
#include "kdrank/scorers/passage_cache.hpp"
#include "kdrank/scorers/scorer.hpp"
#include "kdrank/util/rng.hpp"

namespace {

using namespace kdrank;

constexpr std::size_t kVocab = 500;

ScorerConfig toy_config(ScorerKind kind) {
  ScorerConfig c;
  c.kind = kind;
  c.encoder.vocab_size = kVocab;
  c.encoder.embed_dim = 32;
  c.encoder.num_layers = 2;
  c.encoder.num_heads = 2;
  c.encoder.ffn_dim = 64;
  c.encoder.max_positions = 64;
  c.output_dim = 16;
  c.mask_repeat = 4;
  c.prett_split = 1;
  c.init_seed = 1;
  return c;
}

TokenSequence random_tokens(Rng& rng, std::size_t len) {
  TokenSequence s;
  for (std::size_t i = 0; i < len; ++i) {
    s.ids.push_back(static_cast<TokenId>(SpecialTokens::kCount + rng() % (kVocab - SpecialTokens::kCount)));
  }
  return s;
}

struct Workload {
  std::unique_ptr<Scorer> scorer;
  TokenSequence query;
  std::vector<TokenSequence> passages;
  std::vector<const TokenSequence*> raw;
  PassageCache cache;
};

Workload make_workload(ScorerKind kind, std::size_t candidates) {
  Workload w;
  Rng rng(11);
  w.scorer = make_scorer(toy_config(kind));
  w.query = random_tokens(rng, 3);
  for (std::size_t i = 0; i < candidates; ++i) w.passages.push_back(random_tokens(rng, 10 + rng() % 7));
  for (const auto& p : w.passages) w.raw.push_back(&p);
  if (w.scorer->cacheable()) w.cache = build_cache(*w.scorer, w.raw).cache;
  return w;
}

void BM_ScoreQuery(benchmark::State& state) {
  const auto kind = static_cast<ScorerKind>(state.range(0));
  const Workload w = make_workload(kind, static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    std::vector<double> scores = w.scorer->cacheable() ? score_against_cache(*w.scorer, w.query, w.cache.entries)
                                                       : score_fresh(*w.scorer, w.query, w.raw);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetLabel(std::string(to_string(kind)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ScoreQuery)
    ->ArgsProduct({{static_cast<long>(ScorerKind::kCat), static_cast<long>(ScorerKind::kDot),
                    static_cast<long>(ScorerKind::kColbert), static_cast<long>(ScorerKind::kPrett),
                    static_cast<long>(ScorerKind::kTk)},
                   {100}})
    ->Unit(benchmark::kMillisecond);

void BM_ColbertMaxsim(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor q = normal_tensor({8, 16}, 1.0, rng);
  const Tensor p = normal_tensor({n, 16}, 1.0, rng);
  for (auto _ : state) {
    Tape tape(Tape::Mode::kInference);
    benchmark::DoNotOptimize(colbert_maxsim(tape.borrow(q), tape.borrow(p)).value().item());
  }
}
BENCHMARK(BM_ColbertMaxsim)->Arg(16)->Arg(64)->Arg(200);

void BM_KernelPooling(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor q = normal_tensor({4, 32}, 1.0, rng);
  const Tensor p = normal_tensor({n, 32}, 1.0, rng);
  const KernelConfig kernels = KernelConfig::defaults();
  for (auto _ : state) {
    Tape tape(Tape::Mode::kInference);
    benchmark::DoNotOptimize(kernel_pooling(tape.borrow(q), tape.borrow(p), kernels).value().ptr());
  }
}
BENCHMARK(BM_KernelPooling)->Arg(16)->Arg(64)->Arg(200);

void BM_TrainingSample(benchmark::State& state) {
  const auto kind = static_cast<ScorerKind>(state.range(0));
  Rng rng(5);
  auto scorer = make_scorer(toy_config(kind));
  const TokenSequence q = random_tokens(rng, 3);
  const TokenSequence pos = random_tokens(rng, 14);
  const TokenSequence neg = random_tokens(rng, 14);
  for (auto _ : state) {
    Tape tape;
    const Var s[] = {scorer->score(tape, q, pos)};
    const Var t[] = {scorer->score(tape, q, neg)};
    const Var loss = compute_loss(LossKind::kMarginMse, ScorePairBatch{ops::stack(s), ops::stack(t), {1.0}, {-1.0}});
    tape.backward(loss);
    Gradients g(scorer->parameters().size());
    tape.accumulate_param_grads(g);
    benchmark::DoNotOptimize(g[0].ptr());
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_TrainingSample)
    ->DenseRange(static_cast<long>(ScorerKind::kCat), static_cast<long>(ScorerKind::kTk))
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
