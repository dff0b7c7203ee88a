#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "experiment.hpp"
#include "kdrank/benchmark/latency.hpp"
#include "kdrank/data/formats.hpp"
#include "kdrank/data/synthetic.hpp"
#include "kdrank/error.hpp"
#include "kdrank/evaluation/metrics.hpp"
#include "kdrank/pipeline/checkpoint.hpp"
#include "kdrank/pipeline/dataset.hpp"
#include "kdrank/pipeline/scoring.hpp"
#include "kdrank/pipeline/trainer.hpp"
#include "kdrank/util/format.hpp"

namespace kdrank::cli {
namespace {

constexpr const char* kResolvedConfig = "resolved_config.json";
constexpr const char* kTeacherScores = "teacher_scores.tsv";

struct Corpus {
  Vocabulary vocabulary;
  TokenStore train_queries;
  TokenStore val_queries;
  TokenStore eval_queries;
  TokenStore passages;
  std::vector<TrainingTriple> triples;
  Qrels qrels;
  CandidateLists val_candidates;
  CandidateLists eval_candidates;
};

void require_file(const Path& path, const std::string& what) {
  KDRANK_CHECK(!path.empty(), ConfigError, what + " path is required");
  KDRANK_CHECK(std::filesystem::is_regular_file(path), Error, what + " '" + path.string() + "' does not exist");
}

std::unique_ptr<Corpus> load_corpus(const Path& dir) {
  KDRANK_CHECK(!dir.empty(), ConfigError, "--corpus is required");
  const CorpusPaths p = CorpusPaths::in(dir);
  for (const Path& f : {p.vocabulary, p.passages, p.train_queries, p.val_queries, p.eval_queries, p.triples, p.qrels,
                        p.val_candidates, p.eval_candidates}) {
    require_file(f, "corpus file");
  }
  auto c = std::make_unique<Corpus>();
  c->vocabulary = Vocabulary::load(p.vocabulary);
  c->train_queries = TokenStore(read_collection(p.train_queries), c->vocabulary, kMaxQueryTokens);
  c->val_queries = TokenStore(read_collection(p.val_queries), c->vocabulary, kMaxQueryTokens);
  c->eval_queries = TokenStore(read_collection(p.eval_queries), c->vocabulary, kMaxQueryTokens);
  c->passages = TokenStore(read_collection(p.passages), c->vocabulary, kMaxPassageTokens);
  c->triples = read_triples(p.triples);
  c->qrels = read_qrels(p.qrels);
  c->val_candidates = read_candidates(p.val_candidates);
  c->eval_candidates = read_candidates(p.eval_candidates);
  return c;
}

std::unique_ptr<Scorer> load_scorer(const Path& path) {
  require_file(path, "checkpoint");
  return restore_scorer(load_checkpoint(path));
}

Path prepare_out(const Path& out) {
  KDRANK_CHECK(!out.empty(), ConfigError, "--out is required");
  std::filesystem::create_directories(out);
  return out;
}

std::pair<std::string, std::string> split_label(const std::string& spec, char sep) {
  const auto pos = spec.find(sep);
  KDRANK_CHECK(pos != std::string::npos && pos > 0 && pos + 1 < spec.size(), ConfigError,
               "expected 'label" + std::string(1, sep) + "value', got '" + spec + "'");
  return {spec.substr(0, pos), spec.substr(pos + 1)};
}

Json path_list(const std::vector<Path>& paths) {
  Json a = Json::array();
  for (const Path& p : paths) a.push_back(p.string());
  return a;
}

std::ofstream open_text(const Path& path) {
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void gen_corpus(const GenCorpusArgs& args) {
  ExperimentConfig exp = args.config.empty() ? ExperimentConfig{} : load_experiment(args.config);
  if (args.seed) exp.corpus.seed = *args.seed;
  exp.corpus.validate();
  const Path out = prepare_out(args.out);
  write_corpus(out, generate_synthetic_corpus(exp.corpus));
  write_json(out / kResolvedConfig, Json{{"command", "gen-corpus"}, {"corpus", to_json(exp.corpus)}});
  std::cout << "wrote corpus to " << out.string() << '\n';
}

void train_model(const TrainArgs& args) {
  KDRANK_CHECK(!args.config.empty(), ConfigError, "--config is required");
  const ExperimentConfig exp = load_experiment(args.config);
  ModelSection model;
  std::string section = "teacher";
  if (!args.student) {
    KDRANK_CHECK(exp.teacher.has_value(), ConfigError, "config has no 'teacher' section");
    model = *exp.teacher;
  } else {
    const auto it = exp.students.find(*args.student);
    KDRANK_CHECK(it != exp.students.end(), ConfigError, "config has no student named '" + *args.student + "'");
    model = it->second;
    section = "student";
  }
  if (args.seed) {
    model.train.seed = *args.seed;
    model.scorer.init_seed = *args.seed;
  }
  if (args.threads) model.train.threads = *args.threads;
  model.train.validate();

  const auto corpus = load_corpus(args.corpus);
  model.scorer.encoder.vocab_size = corpus->vocabulary.size();
  model.scorer.validate();

  std::vector<TeacherScoreRecord> teacher;
  if (uses_teacher(model.train.loss_kind)) {
    KDRANK_CHECK(!args.teacher_scores.empty(), ConfigError,
                 "loss '" + std::string(to_string(model.train.loss_kind)) + "' needs --teacher-scores");
    require_file(args.teacher_scores, "teacher score file");
    teacher = read_teacher_scores(args.teacher_scores);
    check_alignment(corpus->triples, teacher);
  }

  const Path out = prepare_out(args.out);
  write_json(out / kResolvedConfig,
             Json{{"command", "train-" + section},
                  {"corpus", args.corpus.string()},
                  {"teacher_scores", uses_teacher(model.train.loss_kind) ? args.teacher_scores.string() : ""},
                  {"name", args.student.value_or("teacher")},
                  {section, to_json(model)},
                  {"metrics", to_json(exp.metrics)}});

  const auto scorer = make_scorer(model.scorer);
  const TrainingData data{corpus->triples, &corpus->train_queries, &corpus->passages, teacher};
  const ValidationData validation{&corpus->val_queries, &corpus->passages, &corpus->val_candidates, &corpus->qrels,
                                  exp.metrics};
  std::ofstream log = open_text(out / "train.log");
  const TrainResult result = train(*scorer, data, &validation, model.train, &log);
  save_checkpoint(out / "model.ckpt", result.best);
  write_json(out / "summary.json", Json{{"best_step", result.best.step},
                                        {"best_val_ndcg10", result.best.val_ndcg10},
                                        {"steps_run", result.steps_run},
                                        {"stopped_early", result.stopped_early},
                                        {"label_reads", result.label_reads},
                                        {"teacher_reads", result.teacher_reads}});
  std::cout << to_string(model.scorer.kind) << " " << to_string(model.train.loss_kind) << ": best step "
            << result.best.step << ", val nDCG@10 " << format_fixed(result.best.val_ndcg10, 4) << '\n';
}

void score_triples(const ScoreTriplesArgs& args) {
  const auto scorer = load_scorer(args.checkpoint);
  const auto corpus = load_corpus(args.corpus);
  const Path out = prepare_out(args.out);
  const auto records =
      generate_teacher_scores(*scorer, corpus->triples, corpus->train_queries, corpus->passages, args.threads);
  write_teacher_scores(out / kTeacherScores, records);
  write_json(out / kResolvedConfig, Json{{"command", "score-triples"},
                                         {"checkpoint", args.checkpoint.string()},
                                         {"corpus", args.corpus.string()},
                                         {"scorer", to_json(scorer->config())},
                                         {"records", records.size()}});
  std::cout << "scored " << records.size() << " triples\n";
}

void ensemble(const EnsembleArgs& args) {
  KDRANK_CHECK(!args.inputs.empty(), ConfigError, "ensemble needs at least one --inputs file");
  std::vector<std::vector<TeacherScoreRecord>> inputs;
  for (const Path& p : args.inputs) {
    require_file(p, "teacher score file");
    inputs.push_back(read_teacher_scores(p));
  }
  const Path out = prepare_out(args.out);
  const auto mean = ensemble_scores(inputs);
  write_teacher_scores(out / kTeacherScores, mean);
  write_json(out / kResolvedConfig, Json{{"command", "ensemble"}, {"inputs", path_list(args.inputs)}});
  std::cout << "averaged " << inputs.size() << " teacher files over " << mean.size() << " triples\n";
}

void rerank_candidates(const RerankArgs& args) {
  KDRANK_CHECK(args.split == "val" || args.split == "eval", ConfigError, "--split must be 'val' or 'eval'");
  const auto scorer = load_scorer(args.checkpoint);
  const auto corpus = load_corpus(args.corpus);
  const Path out = prepare_out(args.out);
  const bool val = args.split == "val";
  const kdrank::Run run = rerank(*scorer, val ? corpus->val_candidates : corpus->eval_candidates,
                                 val ? corpus->val_queries : corpus->eval_queries, corpus->passages, args.threads);
  write_run(out / "run.txt", run, args.tag);
  write_json(out / kResolvedConfig, Json{{"command", "rerank"},
                                         {"checkpoint", args.checkpoint.string()},
                                         {"corpus", args.corpus.string()},
                                         {"split", args.split},
                                         {"tag", args.tag},
                                         {"scorer", to_json(scorer->config())}});
  std::cout << "re-ranked " << run.size() << " queries\n";
}

void evaluate(const EvaluateArgs& args) {
  require_file(args.run, "run file");
  require_file(args.qrels, "qrels file");
  const MetricConfig metrics = args.config.empty() ? MetricConfig{} : load_experiment(args.config).metrics;
  const Path out = prepare_out(args.out);
  const MetricReport report = evaluate_run(read_run(args.run), read_qrels(args.qrels), metrics);
  write_report(out / "metrics.tsv", out / "metrics.json", report);
  write_json(out / kResolvedConfig, Json{{"command", "evaluate"},
                                         {"run", args.run.string()},
                                         {"qrels", args.qrels.string()},
                                         {"metrics", to_json(metrics)}});
  std::cout << "nDCG@" << metrics.ndcg_k << " " << format_fixed(report.mean_ndcg, 4) << "  MRR@" << metrics.mrr_k
            << " " << format_fixed(report.mean_mrr, 4) << "  MAP@" << metrics.map_k << " "
            << format_fixed(report.mean_map, 4) << "  (" << report.ndcg_queries << " queries, "
            << report.skipped_queries << " skipped)\n";
}

void margin_stats(const MarginStatsArgs& args) {
  KDRANK_CHECK(args.bins >= 1, ConfigError, "--bins must be at least 1");
  KDRANK_CHECK(!args.scores.empty() || !args.checkpoints.empty(), ConfigError,
               "margin-stats needs --scores or --checkpoint inputs");
  const Path out = prepare_out(args.out);

  struct Series {
    std::string label;
    std::vector<double> pos, neg;
  };
  std::vector<Series> series;
  auto add_records = [&](const std::string& label, const std::vector<TeacherScoreRecord>& records) {
    for (const Series& s : series) KDRANK_CHECK(s.label != label, ConfigError, "duplicate label '" + label + "'");
    Series s{label, {}, {}};
    for (const auto& r : records) {
      s.pos.push_back(r.pos_score);
      s.neg.push_back(r.neg_score);
    }
    series.push_back(std::move(s));
  };
  for (const std::string& spec : args.scores) {
    const auto [label, file] = split_label(spec, '=');
    require_file(file, "score file");
    add_records(label, read_teacher_scores(file));
  }
  if (!args.checkpoints.empty()) {
    const auto corpus = load_corpus(args.corpus);
    for (const std::string& spec : args.checkpoints) {
      const auto [label, file] = split_label(spec, '=');
      const auto scorer = load_scorer(file);
      const auto records =
          generate_teacher_scores(*scorer, corpus->triples, corpus->train_queries, corpus->passages, args.threads);
      write_teacher_scores(out / (label + ".scores.tsv"), records);
      add_records(label, records);
    }
  }

  // Shared equal-width edges over every margin so the histograms overlay.
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const Series& s : series) {
    KDRANK_CHECK(!s.pos.empty(), Error, "no scores for '" + s.label + "'");
    for (std::size_t i = 0; i < s.pos.size(); ++i) {
      const double m = s.pos[i] - s.neg[i];
      lo = first ? m : std::min(lo, m);
      hi = first ? m : std::max(hi, m);
      first = false;
    }
  }
  std::vector<double> edges;
  if (hi > lo) {
    for (std::size_t b = 0; b < args.bins; ++b) {
      edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(args.bins));
    }
    edges.push_back(hi);
  }

  Json summary = Json::array();
  for (const Series& s : series) {
    const MarginHistogram h = edges.empty() ? margin_histogram(s.pos, s.neg, args.bins, s.label)
                                            : margin_histogram(s.pos, s.neg, edges, s.label);
    open_text(out / (s.label + ".histogram.csv")) << format_histogram_csv(h);
    open_text(out / (s.label + ".histogram.json")) << format_histogram_json(h) << '\n';
    summary.push_back(Json{{"label", s.label},
                           {"sample_size", h.sample_size},
                           {"mean", h.mean},
                           {"stddev", h.stddev},
                           {"fraction_negative", h.fraction_negative}});
  }

  for (const std::string& spec : args.logs) {
    const auto [label, file] = split_label(spec, '=');
    require_file(file, "training log");
    std::ofstream trace = open_text(out / (label + ".trace.csv"));
    trace << "step,margin_mean_pos,margin_mean_neg,val_ndcg10\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_shortest(*v) : std::string(); };
    for (const TrainLogRow& row : read_training_log(file)) {
      trace << row.step << ',' << cell(row.margin_mean_pos) << ',' << cell(row.margin_mean_neg) << ','
            << cell(row.val_ndcg10) << '\n';
    }
  }

  write_json(out / "summary.json", summary);
  write_json(out / kResolvedConfig, Json{{"command", "margin-stats"},
                                         {"scores", args.scores},
                                         {"checkpoints", args.checkpoints},
                                         {"logs", args.logs},
                                         {"corpus", args.corpus.string()},
                                         {"bins", args.bins}});
  std::cout << "wrote " << series.size() << " margin histograms\n";
}

void bench(const BenchArgs& args) {
  KDRANK_CHECK(!args.config.empty(), ConfigError, "--config is required");
  const ExperimentConfig exp = load_experiment(args.config);
  KDRANK_CHECK(exp.bench.has_value(), ConfigError, "config has no 'bench' section");
  BenchSection b = *exp.bench;
  const auto corpus = load_corpus(args.corpus);
  KDRANK_CHECK(corpus->passages.size() >= b.candidates, ConfigError,
               "corpus has fewer passages than bench.candidates");
  KDRANK_CHECK(corpus->eval_queries.size() >= 1, Error, "corpus has no evaluation queries");
  b.scorer.encoder.vocab_size = corpus->vocabulary.size();

  std::vector<const TokenSequence*> passages;
  for (std::size_t i = 0; i < b.candidates; ++i) passages.push_back(&corpus->passages.at(i));
  const TokenSequence& query = corpus->eval_queries.at(0);

  std::vector<std::unique_ptr<Scorer>> scorers;
  if (args.checkpoints.empty()) {
    for (ScorerKind kind : b.kinds) {
      ScorerConfig c = b.scorer;
      c.kind = kind;
      scorers.push_back(make_scorer(c));
    }
  } else {
    for (const std::string& file : args.checkpoints) scorers.push_back(load_scorer(file));
  }

  const Path out = prepare_out(args.out);
  std::vector<LatencyReport> reports;
  pin_allocator_thresholds();
  for (const auto& scorer : scorers) {
    std::optional<BuiltCache> cache;
    if (scorer->cacheable()) cache = build_cache(*scorer, passages);
    reports.push_back(
        measure_latency(*scorer, cache ? &*cache : nullptr, query, passages, LatencyConfig{b.warmup, b.trials}));
    std::cout << to_string(scorer->kind()) << " median " << format_fixed(reports.back().median_ms, 3) << " ms\n";
  }
  open_text(out / "latency.csv") << format_latency_csv(reports);
  Json resolved{{"command", "bench"}, {"corpus", args.corpus.string()}, {"bench", to_json(b)}};
  if (!args.checkpoints.empty()) resolved["checkpoints"] = args.checkpoints;
  write_json(out / kResolvedConfig, resolved);
}

void tradeoff(const TradeoffArgs& args) {
  require_file(args.latency, "latency file");
  std::ifstream lin(args.latency);
  std::stringstream lbuf;
  lbuf << lin.rdbuf();
  const std::vector<LatencyReport> latency = parse_latency_csv(lbuf.str());

  std::vector<EffectivenessEntry> effectiveness;
  for (const std::string& spec : args.reports) {
    const auto [key, file] = split_label(spec, '=');
    const auto [kind, variant] = split_label(key, ':');
    require_file(file, "metrics report");
    std::ifstream in(file);
    Json j;
    try {
      j = Json::parse(in);
      effectiveness.push_back({parse_scorer_kind(kind), variant, j.at("ndcg").get<double>(),
                               j.at("mrr").get<double>(), j.at("map").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file + ": " + e.what());
    }
  }
  const Path out = prepare_out(args.out);
  const auto rows = tradeoff_table(latency, effectiveness);
  open_text(out / "tradeoff.csv") << format_tradeoff_csv(rows);
  write_json(out / kResolvedConfig,
             Json{{"command", "tradeoff"}, {"latency", args.latency.string()}, {"reports", args.reports}});
  std::cout << "wrote " << rows.size() << " trade-off rows\n";
}

}  // namespace kdrank::cli
