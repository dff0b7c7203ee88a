#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "kdrank/data/formats.hpp"
#include "kdrank/data/synthetic.hpp"
#include "kdrank/error.hpp"
#include "test_support.hpp"

namespace kdrank {
namespace {

using test::read_text;
using test::temp_dir;
using test::write_text;

std::size_t error_line(auto&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

TEST(Triples, RoundTrip) {
  const auto path = temp_dir("triples") / "t.tsv";
  const std::vector<TrainingTriple> triples = {{"q1", "p1", "p2"}, {"q2", "p3", "p1"}};
  write_triples(path, triples);
  EXPECT_EQ(read_text(path), "q1\tp1\tp2\nq2\tp3\tp1\n");
  EXPECT_EQ(read_triples(path), triples);
}

TEST(Triples, RejectsBadLines) {
  const auto path = temp_dir("triples_bad") / "t.tsv";
  write_text(path, "q1\tp1\tp2\nq2\tp3\n");
  EXPECT_EQ(error_line([&] { read_triples(path); }), 2u);
  write_text(path, "q1\tp1\tp2\nq1\tp2\tp3\nq3\tp4\tp4\n");
  EXPECT_EQ(error_line([&] { read_triples(path); }), 3u);
  EXPECT_THROW(read_triples(temp_dir("missing") / "none.tsv"), Error);
}

TEST(Collection, RoundTripKeepsOrder) {
  const auto path = temp_dir("collection") / "c.tsv";
  TextCollection c;
  c.add("p9", "zeta alpha");
  c.add("p1", "beta");
  write_collection(path, c);
  const TextCollection back = read_collection(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.id(0), "p9");
  EXPECT_EQ(back.text(1), "beta");
  EXPECT_EQ(back.index_of("p1"), 1u);
  EXPECT_FALSE(back.find("p2").has_value());
  EXPECT_THROW(back.index_of("p2"), Error);
  EXPECT_THROW(c.add("p1", "again"), Error);
}

TEST(Collection, RejectsDuplicateIds) {
  const auto path = temp_dir("collection_dup") / "c.tsv";
  write_text(path, "p1\ta\np2\tb\np1\tc\n");
  EXPECT_EQ(error_line([&] { read_collection(path); }), 3u);
}

TEST(TeacherScores, SixDecimalFormat) {
  EXPECT_EQ(format_teacher_score({1.5, -0.25, "q", "a", "b"}), "1.500000\t-0.250000\tq\ta\tb");
  EXPECT_EQ(format_teacher_score({1.0 / 3.0, 2e-7, "q", "a", "b"}), "0.333333\t0.000000\tq\ta\tb");
}

TEST(TeacherScores, RoundTripAndAlignment) {
  const auto path = temp_dir("teacher") / "s.tsv";
  const std::vector<TeacherScoreRecord> recs = {{2.5, -1.0, "q1", "p1", "p2"}, {0.125, 0.5, "q2", "p3", "p1"}};
  write_teacher_scores(path, recs);
  EXPECT_EQ(read_teacher_scores(path), recs);
  const std::vector<TrainingTriple> triples = {{"q1", "p1", "p2"}, {"q2", "p3", "p1"}};
  EXPECT_NO_THROW(check_alignment(triples, recs));
  const std::vector<TrainingTriple> swapped = {{"q1", "p1", "p2"}, {"q2", "p1", "p3"}};
  EXPECT_THROW(check_alignment(swapped, recs), Error);
  EXPECT_THROW(check_alignment(std::span(triples).first(1), recs), Error);
}

TEST(TeacherScores, ScoreOnlyAndExtraColumns) {
  const auto path = temp_dir("teacher_cols") / "s.tsv";
  write_text(path, "1.0\t2.0\n3.0\t4.0\tq\ta\tb\textra\n");
  const auto recs = read_teacher_scores(path);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_TRUE(recs[0].query_id.empty());
  EXPECT_EQ(recs[1].neg_passage_id, "b");
  const std::vector<TrainingTriple> triples = {{"x", "y", "z"}, {"q", "a", "b"}};
  EXPECT_NO_THROW(check_alignment(triples, recs));
  write_text(path, "1.0\t2.0\n3.0\t4.0\tq\n");
  EXPECT_EQ(error_line([&] { read_teacher_scores(path); }), 2u);
  write_text(path, "1.0\tnan-ish\n");
  EXPECT_EQ(error_line([&] { read_teacher_scores(path); }), 1u);
}

TEST(Qrels, RoundTripAndUnjudgedGrade) {
  const auto path = temp_dir("qrels") / "q.txt";
  Qrels q;
  q.set("q1", "p1", 2);
  q.set("q1", "p2", 0);
  q.set("q2", "p1", 3);
  write_qrels(path, q);
  const Qrels back = read_qrels(path);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.grade("q1", "p1"), 2);
  EXPECT_EQ(back.grade("q1", "p9"), 0);
  EXPECT_TRUE(back.has_query("q2"));
  EXPECT_FALSE(back.has_query("q3"));
  EXPECT_EQ(back.judgments("q1")->size(), 2u);
  EXPECT_EQ(back.judgments("q3"), nullptr);
  EXPECT_THROW(q.set("q1", "p1", -1), Error);
  write_text(path, "q1 0 p1 2\nq1 0 p2\n");
  EXPECT_EQ(error_line([&] { read_qrels(path); }), 2u);
}

TEST(Runs, SortBreaksTiesByPassageId) {
  std::vector<RunEntry> e = {{"p3", 1.0}, {"p10", 2.0}, {"p2", 1.0}, {"p1", 0.5}};
  sort_ranking(e);
  EXPECT_EQ(e, (std::vector<RunEntry>{{"p10", 2.0}, {"p2", 1.0}, {"p3", 1.0}, {"p1", 0.5}}));
}

TEST(Runs, WriteRecomputesRanksAndRoundTrips) {
  const auto path = temp_dir("run") / "r.txt";
  kdrank::Run run;
  run["q1"] = {{"b", 1.0}, {"a", 1.0}, {"c", 3.25}};
  run["q0"] = {{"x", -0.1}};
  write_run(path, run, "tag");
  EXPECT_EQ(read_text(path), "q0 Q0 x 1 -0.1 tag\nq1 Q0 c 1 3.25 tag\nq1 Q0 a 2 1 tag\nq1 Q0 b 3 1 tag\n");
  const kdrank::Run back = read_run(path);
  EXPECT_EQ(back.at("q1"), (std::vector<RunEntry>{{"c", 3.25}, {"a", 1.0}, {"b", 1.0}}));
  EXPECT_EQ(back.at("q0").front().score, -0.1);
}

TEST(Runs, ScoresRoundTripExactly) {
  const auto path = temp_dir("run_exact") / "r.txt";
  Rng rng(4);
  kdrank::Run run;
  for (int i = 0; i < 50; ++i) run["q"].push_back({"p" + std::to_string(i), normal_tensor({1}, 10.0, rng)[0]});
  write_run(path, run, "t");
  kdrank::Run sorted = run;
  sort_ranking(sorted["q"]);
  EXPECT_EQ(read_run(path), sorted);
}

TEST(Runs, RejectsDuplicatePassages) {
  const auto path = temp_dir("run_dup") / "r.txt";
  write_text(path, "q1 Q0 a 1 2.0 t\nq1 Q0 a 2 1.0 t\n");
  EXPECT_EQ(error_line([&] { read_run(path); }), 2u);
}

TEST(Candidates, RoundTrip) {
  const auto path = temp_dir("cands") / "c.tsv";
  CandidateLists c;
  c["q1"] = {"p5", "p1", "p3"};
  c["q2"] = {"p2"};
  write_candidates(path, c);
  EXPECT_EQ(read_candidates(path), c);
}

SyntheticCorpusConfig small_corpus_config() {
  SyntheticCorpusConfig c;
  c.n_passages = 400;
  c.n_train_queries = 30;
  c.n_val_queries = 5;
  c.n_eval_queries = 5;
  c.vocab_size = 300;
  c.n_topics = 10;
  c.topic_words = 10;
  c.triples_per_query = 4;
  c.candidates_per_query = 20;
  return c;
}

TEST(Synthetic, ValidatesConfig) {
  SyntheticCorpusConfig c = small_corpus_config();
  c.vocab_size = 100;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_corpus_config();
  c.passage_min_tokens = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_corpus_config();
  c.topic_density[1] = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Synthetic, ShapeAndLabelConsistency) {
  const SyntheticCorpusConfig cfg = small_corpus_config();
  const SyntheticCorpus c = generate_synthetic_corpus(cfg);
  EXPECT_EQ(c.passages.size(), cfg.n_passages);
  EXPECT_EQ(c.train_queries.size(), cfg.n_train_queries);
  EXPECT_EQ(c.triples.size(), cfg.n_train_queries * cfg.triples_per_query);
  for (const TrainingTriple& t : c.triples) {
    EXPECT_GT(c.qrels.grade(t.query_id, t.pos_passage_id), 0);
    EXPECT_EQ(c.qrels.grade(t.query_id, t.neg_passage_id), 0);
  }
  EXPECT_EQ(c.eval_candidates.size(), cfg.n_eval_queries);
  for (const auto& [qid, pids] : c.eval_candidates) {
    EXPECT_EQ(pids.size(), cfg.candidates_per_query);
    EXPECT_EQ(std::set<std::string>(pids.begin(), pids.end()).size(), pids.size());
    std::size_t relevant = 0;
    for (const std::string& pid : pids) {
      ASSERT_NE(c.qrels.judgments(qid)->find(pid), c.qrels.judgments(qid)->end());
      relevant += c.qrels.grade(qid, pid) > 0;
    }
    EXPECT_GE(relevant, 1u);
    EXPECT_LT(relevant, pids.size());
  }
  for (std::size_t i = 0; i < c.passages.size(); ++i) {
    EXPECT_GE(c.passage_strengths[i], 1);
    EXPECT_LE(c.passage_strengths[i], 3);
    EXPECT_LT(c.passage_topics[i], cfg.n_topics);
  }
}

TEST(Synthetic, SameSeedSameFilesDifferentSeedDifferentCorpus) {
  SyntheticCorpusConfig cfg = small_corpus_config();
  const auto a = temp_dir("synth_a"), b = temp_dir("synth_b"), d = temp_dir("synth_d");
  write_corpus(a, generate_synthetic_corpus(cfg));
  write_corpus(b, generate_synthetic_corpus(cfg));
  cfg.seed = 8;
  write_corpus(d, generate_synthetic_corpus(cfg));
  const CorpusPaths pa = CorpusPaths::in(a), pb = CorpusPaths::in(b), pd = CorpusPaths::in(d);
  for (auto member : {&CorpusPaths::vocabulary, &CorpusPaths::passages, &CorpusPaths::train_queries,
                      &CorpusPaths::val_queries, &CorpusPaths::eval_queries, &CorpusPaths::triples,
                      &CorpusPaths::qrels, &CorpusPaths::val_candidates, &CorpusPaths::eval_candidates}) {
    EXPECT_EQ(read_text(pa.*member), read_text(pb.*member)) << (pa.*member).filename();
  }
  EXPECT_NE(read_text(pa.passages), read_text(pd.passages));
}

TEST(Synthetic, StrongerPassagesCarryMoreTopicWords) {
  SyntheticCorpusConfig cfg = small_corpus_config();
  cfg.n_passages = 3000;
  const SyntheticCorpus c = generate_synthetic_corpus(cfg);
  double topic_tokens[3] = {0, 0, 0}, all_tokens[3] = {0, 0, 0};
  for (std::size_t i = 0; i < c.passages.size(); ++i) {
    const std::size_t lo = c.passage_topics[i] * cfg.topic_words;
    const int s = c.passage_strengths[i] - 1;
    const TokenSequence seq = tokenize(c.passages.text(i), c.vocabulary, 1000);
    for (TokenId id : seq.ids) {
      const std::size_t word = static_cast<std::size_t>(id) - SpecialTokens::kCount;
      topic_tokens[s] += word >= lo && word < lo + cfg.topic_words;
      all_tokens[s] += 1;
    }
  }
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(topic_tokens[s] / all_tokens[s], cfg.topic_density[s], 0.03) << s;
}

}  // namespace
}  // namespace kdrank
