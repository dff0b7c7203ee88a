#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "commands.hpp"
#include "kdrank/error.hpp"
#include "kdrank/pipeline/config.hpp"

namespace {

using namespace kdrank::cli;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kDiverged = 4 };

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << kdrank::Json{{"error", kind}, {"message", e.what()}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distillation-trained neural re-rankers on a synthetic corpus"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate the seeded synthetic corpus");
  gen_cmd->add_option("--config", gen.config, "Experiment config (uses its 'corpus' section)");
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->callback([&] { gen_corpus(gen); });

  TrainArgs teacher;
  auto* teacher_cmd = app.add_subcommand("train-teacher", "Train the teacher from binary triple labels");
  TrainArgs student;
  auto* student_cmd = app.add_subcommand("train-student", "Train a student, optionally from teacher scores");
  for (auto [cmd, args] : {std::pair{teacher_cmd, &teacher}, std::pair{student_cmd, &student}}) {
    cmd->add_option("--config", args->config, "Experiment config")->required();
    cmd->add_option("--corpus", args->corpus, "Corpus directory")->required();
    cmd->add_option("--out", args->out, "Output directory")->required();
    cmd->add_option("--seed", args->seed, "Training and initialization seed");
    cmd->add_option("--threads", args->threads, "Worker threads (0 = all cores)");
  }
  student_cmd->add_option("--name", student.student, "Student entry of the config's 'students' map")->required();
  student_cmd->add_option("--teacher-scores", student.teacher_scores, "Teacher score file for distillation losses");
  teacher_cmd->callback([&] { train_model(teacher); });
  student_cmd->callback([&] { train_model(student); });

  ScoreTriplesArgs score;
  auto* score_cmd = app.add_subcommand("score-triples", "Score every training triple with a frozen model");
  score_cmd->add_option("--checkpoint", score.checkpoint, "Model checkpoint")->required();
  score_cmd->add_option("--corpus", score.corpus, "Corpus directory")->required();
  score_cmd->add_option("--out", score.out, "Output directory")->required();
  score_cmd->add_option("--threads", score.threads, "Worker threads (0 = all cores)");
  score_cmd->callback([&] { score_triples(score); });

  EnsembleArgs ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "Average aligned teacher score files");
  ens_cmd->add_option("--inputs", ens.inputs, "Teacher score files")->required();
  ens_cmd->add_option("--out", ens.out, "Output directory")->required();
  ens_cmd->callback([&] { ensemble(ens); });

  RerankArgs rr;
  auto* rr_cmd = app.add_subcommand("rerank", "Re-rank candidate lists into a run file");
  rr_cmd->add_option("--checkpoint", rr.checkpoint, "Model checkpoint")->required();
  rr_cmd->add_option("--corpus", rr.corpus, "Corpus directory")->required();
  rr_cmd->add_option("--split", rr.split, "Candidate split: val or eval");
  rr_cmd->add_option("--tag", rr.tag, "Run tag");
  rr_cmd->add_option("--out", rr.out, "Output directory")->required();
  rr_cmd->add_option("--threads", rr.threads, "Worker threads (0 = all cores)");
  rr_cmd->callback([&] { rerank_candidates(rr); });

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Compute nDCG@10, MRR@10 and MAP for a run");
  ev_cmd->add_option("--run", ev.run, "Run file")->required();
  ev_cmd->add_option("--qrels", ev.qrels, "Qrels file")->required();
  ev_cmd->add_option("--config", ev.config, "Experiment config (uses its 'metrics' section)");
  ev_cmd->add_option("--out", ev.out, "Output directory")->required();
  ev_cmd->callback([&] { evaluate(ev); });

  MarginStatsArgs ms;
  auto* ms_cmd = app.add_subcommand("margin-stats", "Margin histograms and training-log margin traces");
  ms_cmd->add_option("--scores", ms.scores, "label=score-file inputs");
  ms_cmd->add_option("--checkpoint", ms.checkpoints, "label=checkpoint inputs, scored on the training triples");
  ms_cmd->add_option("--log", ms.logs, "label=training-log inputs");
  ms_cmd->add_option("--corpus", ms.corpus, "Corpus directory (needed with --checkpoint)");
  ms_cmd->add_option("--bins", ms.bins, "Histogram bins");
  ms_cmd->add_option("--out", ms.out, "Output directory")->required();
  ms_cmd->add_option("--threads", ms.threads, "Worker threads (0 = all cores)");
  ms_cmd->callback([&] { margin_stats(ms); });

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "Median query latency over cached candidates");
  bn_cmd->add_option("--config", bn.config, "Experiment config (uses its 'bench' section)")->required();
  bn_cmd->add_option("--corpus", bn.corpus, "Corpus directory")->required();
  bn_cmd->add_option("--checkpoint", bn.checkpoints, "Checkpoints to time instead of fresh models");
  bn_cmd->add_option("--out", bn.out, "Output directory")->required();
  bn_cmd->callback([&] { bench(bn); });

  TradeoffArgs tr;
  auto* tr_cmd = app.add_subcommand("tradeoff", "Join latency and effectiveness into one table");
  tr_cmd->add_option("--latency", tr.latency, "latency.csv from bench")->required();
  tr_cmd->add_option("--report", tr.reports, "kind:variant=metrics.json entries")->required();
  tr_cmd->add_option("--out", tr.out, "Output directory")->required();
  tr_cmd->callback([&] { tradeoff(tr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const kdrank::ConfigError& e) {
    return report("config", e, kConfig);
  } catch (const kdrank::FormatError& e) {
    return report("format", e, kFormat);
  } catch (const kdrank::NonFiniteError& e) {
    return report("diverged", e, kDiverged);
  } catch (const kdrank::Error& e) {
    return report("runtime", e, kFailure);
  } catch (const std::exception& e) {
    return report("internal", e, kFailure);
  }
  return kOk;
}
