#include "kdrank/pipeline/scoring.hpp"

#include <array>
#include <unordered_set>

#include "kdrank/error.hpp"
#include "kdrank/util/parallel.hpp"

namespace kdrank {

std::vector<TeacherScoreRecord> generate_teacher_scores(const Scorer& teacher, std::span<const TrainingTriple> triples,
                                                        const TokenStore& queries, const TokenStore& passages,
                                                        std::size_t threads) {
  std::vector<TeacherScoreRecord> records(triples.size());
  // Resolve ids up front so unknown ids fail before any scoring work.
  std::vector<std::array<std::size_t, 3>> idx(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    idx[i] = {queries.index_of(triples[i].query_id), passages.index_of(triples[i].pos_passage_id),
              passages.index_of(triples[i].neg_passage_id)};
  }
  parallel_for(triples.size(), threads, [&](std::size_t i) {
    const TokenSequence& q = queries.at(idx[i][0]);
    TeacherScoreRecord& r = records[i];
    {
      Tape tape(Tape::Mode::kInference);
      r.pos_score = teacher.score(tape, q, passages.at(idx[i][1])).value().item();
    }
    {
      Tape tape(Tape::Mode::kInference);
      r.neg_score = teacher.score(tape, q, passages.at(idx[i][2])).value().item();
    }
    r.query_id = triples[i].query_id;
    r.pos_passage_id = triples[i].pos_passage_id;
    r.neg_passage_id = triples[i].neg_passage_id;
  });
  return records;
}

std::vector<TeacherScoreRecord> ensemble_scores(std::span<const std::vector<TeacherScoreRecord>> inputs) {
  KDRANK_CHECK(!inputs.empty(), Error, "ensemble needs at least one teacher score file");
  const std::size_t n = inputs[0].size();
  for (std::size_t f = 1; f < inputs.size(); ++f) {
    KDRANK_CHECK(inputs[f].size() == n, Error,
                 "teacher score file " + std::to_string(f + 1) + " has " + std::to_string(inputs[f].size()) +
                     " records, expected " + std::to_string(n));
  }
  std::vector<TeacherScoreRecord> out(n);
  const auto count = static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < n; ++i) {
    double pos = 0.0, neg = 0.0;
    for (const auto& file : inputs) {
      pos += file[i].pos_score;
      neg += file[i].neg_score;
    }
    TeacherScoreRecord& r = out[i];
    r.pos_score = pos / count;
    r.neg_score = neg / count;
    for (const auto& file : inputs) {
      const TeacherScoreRecord& in = file[i];
      if (in.query_id.empty()) continue;
      if (r.query_id.empty()) {
        r.query_id = in.query_id;
        r.pos_passage_id = in.pos_passage_id;
        r.neg_passage_id = in.neg_passage_id;
      } else if (in.query_id != r.query_id || in.pos_passage_id != r.pos_passage_id ||
                 in.neg_passage_id != r.neg_passage_id) {
        throw Error("teacher score files disagree on the triple at record " + std::to_string(i + 1));
      }
    }
  }
  return out;
}

std::vector<double> score_candidates(const Scorer& scorer, const TokenSequence& query,
                                     std::span<const TokenSequence* const> passages) {
  std::vector<double> scores;
  scores.reserve(passages.size());
  if (!scorer.cacheable()) {
    for (const TokenSequence* p : passages) {
      Tape tape(Tape::Mode::kInference);
      scores.push_back(scorer.score(tape, query, *p).value().item());
    }
    return scores;
  }
  Tape query_tape(Tape::Mode::kInference);
  const Tensor& query_rep = scorer.encode_query(query_tape, query).value();
  for (const TokenSequence* p : passages) {
    Tape tape(Tape::Mode::kInference);
    const Var passage_rep = scorer.encode_passage(tape, *p);
    scores.push_back(scorer.interact(tape, tape.borrow(query_rep), passage_rep).value().item());
  }
  return scores;
}

Run rerank(const Scorer& scorer, const CandidateLists& candidates, const TokenStore& queries,
           const TokenStore& passages, std::size_t threads) {
  struct Job {
    const std::string* qid;
    const TokenSequence* query;
    std::vector<const TokenSequence*> passages;
    const std::vector<std::string>* pids;
    std::vector<double> scores;
  };
  std::vector<Job> jobs;
  for (const auto& [qid, pids] : candidates) {
    Job job{&qid, &queries.get(qid), {}, &pids, {}};
    std::unordered_set<std::string_view> seen;
    for (const auto& pid : pids) {
      KDRANK_CHECK(seen.insert(pid).second, Error, "duplicate candidate '" + pid + "' for query '" + qid + "'");
      job.passages.push_back(&passages.get(pid));
    }
    jobs.push_back(std::move(job));
  }
  parallel_for(jobs.size(), threads,
               [&](std::size_t j) { jobs[j].scores = score_candidates(scorer, *jobs[j].query, jobs[j].passages); });
  Run run;
  for (auto& job : jobs) {
    auto& entries = run[*job.qid];
    for (std::size_t i = 0; i < job.pids->size(); ++i) entries.push_back({(*job.pids)[i], job.scores[i]});
    sort_ranking(entries);
  }
  return run;
}

}  // namespace kdrank
