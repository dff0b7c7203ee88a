#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kdrank {

struct TrainingTriple {
  std::string query_id;
  std::string pos_passage_id;
  std::string neg_passage_id;

  bool operator==(const TrainingTriple&) const = default;
};

/// Teacher scores for one triple. Id fields are empty when the file omits them.
struct TeacherScoreRecord {
  double pos_score = 0.0;
  double neg_score = 0.0;
  std::string query_id;
  std::string pos_passage_id;
  std::string neg_passage_id;

  bool operator==(const TeacherScoreRecord&) const = default;
};

/// Id → text table that remembers insertion order. Used for passages and queries.
class TextCollection {
 public:
  /// Throws Error on duplicate ids.
  void add(std::string id, std::string text);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_[index]; }
  const std::string& text(std::size_t index) const { return texts_[index]; }
  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws Error for unknown ids.
  std::size_t index_of(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Graded relevance judgments: query id → passage id → grade (>= 0).
class Qrels {
 public:
  void set(const std::string& query_id, const std::string& passage_id, int grade);
  /// Grade of a judged pair; 0 for unjudged pairs.
  int grade(std::string_view query_id, std::string_view passage_id) const;
  bool has_query(std::string_view query_id) const;
  const std::map<std::string, int, std::less<>>* judgments(std::string_view query_id) const;

  const std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>>& queries() const {
    return grades_;
  }
  std::size_t size() const;

 private:
  std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>> grades_;
};

struct RunEntry {
  std::string passage_id;
  double score = 0.0;

  bool operator==(const RunEntry&) const = default;
};

/// Per-query ranked lists, keyed by query id.
using Run = std::map<std::string, std::vector<RunEntry>, std::less<>>;

/// Per-query candidate passage ids, in first-stage order.
using CandidateLists = std::map<std::string, std::vector<std::string>, std::less<>>;

/// Descending score; equal scores ordered by passage id ascending (byte order).
void sort_ranking(std::vector<RunEntry>& entries);

// Tab-separated "qid\tpos_pid\tneg_pid".
std::vector<TrainingTriple> read_triples(const std::filesystem::path& path);
void write_triples(const std::filesystem::path& path, std::span<const TrainingTriple> triples);

// Tab-separated "id\ttext"; duplicate ids are an error.
TextCollection read_collection(const std::filesystem::path& path);
void write_collection(const std::filesystem::path& path, const TextCollection& collection);

// "pos<TAB>neg<TAB>qid<TAB>pos_id<TAB>neg_id", scores with 6 decimals.
std::string format_teacher_score(const TeacherScoreRecord& record);
void write_teacher_scores(const std::filesystem::path& path, std::span<const TeacherScoreRecord> records);
/// Needs at least the two score columns; id columns are read when present and
/// anything after them is ignored.
std::vector<TeacherScoreRecord> read_teacher_scores(const std::filesystem::path& path);
/// Throws Error if the counts differ or present id columns disagree with the triples.
void check_alignment(std::span<const TrainingTriple> triples, std::span<const TeacherScoreRecord> records);

// "qid 0 pid grade", whitespace separated.
Qrels read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

// "qid Q0 pid rank score tag"; ranks are recomputed from the score order.
void write_run(const std::filesystem::path& path, const Run& run, std::string_view tag);
Run read_run(const std::filesystem::path& path);

// Tab-separated "qid\tpid", grouped by query in file order.
CandidateLists read_candidates(const std::filesystem::path& path);
void write_candidates(const std::filesystem::path& path, const CandidateLists& candidates);

}  // namespace kdrank
