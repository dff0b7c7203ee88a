#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kdrank/data/formats.hpp"
#include "kdrank/pipeline/dataset.hpp"
#include "kdrank/scorers/scorer.hpp"

namespace kdrank {

/// Scores both passages of every triple with frozen parameters. Output order
/// follows the triples and does not depend on the thread count.
std::vector<TeacherScoreRecord> generate_teacher_scores(const Scorer& teacher, std::span<const TrainingTriple> triples,
                                                        const TokenStore& queries, const TokenStore& passages,
                                                        std::size_t threads = 1);

/// Per-record mean of pos and neg scores across aligned teacher files.
/// Throws on empty input, length mismatch, or disagreeing id columns.
std::vector<TeacherScoreRecord> ensemble_scores(std::span<const std::vector<TeacherScoreRecord>> inputs);

/// Scores of one query against its candidates. Cacheable scorers encode the
/// query once and go through encode_passage + interact, which gives the same
/// values as the full path.
std::vector<double> score_candidates(const Scorer& scorer, const TokenSequence& query,
                                     std::span<const TokenSequence* const> passages);

/// Re-ranks every candidate list; rankings follow the global tie rule.
Run rerank(const Scorer& scorer, const CandidateLists& candidates, const TokenStore& queries,
           const TokenStore& passages, std::size_t threads = 1);

}  // namespace kdrank
