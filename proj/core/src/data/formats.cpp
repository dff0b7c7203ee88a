#include "kdrank/data/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "kdrank/error.hpp"
#include "kdrank/util/format.hpp"

namespace kdrank {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  KDRANK_CHECK(in.good(), Error, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write " + path.string());
  return out;
}

// Calls fn(line, line_no) for each line, stripping a trailing '\r'.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn(std::string_view(line), line_no);
  }
}

double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(path.string(), line_no, "not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s, const std::filesystem::path& path, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(path.string(), line_no, "not an integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void TextCollection::add(std::string id, std::string text) {
  KDRANK_CHECK(!index_.contains(id), Error, "duplicate id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  texts_.push_back(std::move(text));
}

std::optional<std::size_t> TextCollection::find(std::string_view id) const {
  if (auto it = index_.find(std::string(id)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t TextCollection::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw Error("unknown id '" + std::string(id) + "'");
}

void Qrels::set(const std::string& query_id, const std::string& passage_id, int grade) {
  KDRANK_CHECK(grade >= 0, Error, "relevance grades must be non-negative");
  grades_[query_id][passage_id] = grade;
}

int Qrels::grade(std::string_view query_id, std::string_view passage_id) const {
  const auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  const auto p = q->second.find(passage_id);
  return p == q->second.end() ? 0 : p->second;
}

bool Qrels::has_query(std::string_view query_id) const { return grades_.find(query_id) != grades_.end(); }

const std::map<std::string, int, std::less<>>* Qrels::judgments(std::string_view query_id) const {
  const auto q = grades_.find(query_id);
  return q == grades_.end() ? nullptr : &q->second;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [q, m] : grades_) n += m.size();
  return n;
}

void sort_ranking(std::vector<RunEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_id < b.passage_id;
  });
}

std::vector<TrainingTriple> read_triples(const std::filesystem::path& path) {
  std::vector<TrainingTriple> triples;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split(line, '\t');
    if (cols.size() != 3) {
      throw FormatError(path.string(), line_no,
                        "expected 3 columns, found " + std::to_string(cols.size()));
    }
    if (cols[1] == cols[2]) throw FormatError(path.string(), line_no, "positive equals negative passage");
    triples.push_back({std::string(cols[0]), std::string(cols[1]), std::string(cols[2])});
  });
  return triples;
}

void write_triples(const std::filesystem::path& path, std::span<const TrainingTriple> triples) {
  std::ofstream out = open_output(path);
  for (const auto& t : triples) out << t.query_id << '\t' << t.pos_passage_id << '\t' << t.neg_passage_id << '\n';
}

TextCollection read_collection(const std::filesystem::path& path) {
  TextCollection c;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw FormatError(path.string(), line_no, "expected 2 columns");
    std::string id(line.substr(0, tab));
    if (c.find(id)) throw FormatError(path.string(), line_no, "duplicate id '" + id + "'");
    c.add(std::move(id), std::string(line.substr(tab + 1)));
  });
  return c;
}

void write_collection(const std::filesystem::path& path, const TextCollection& collection) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < collection.size(); ++i) out << collection.id(i) << '\t' << collection.text(i) << '\n';
}

std::string format_teacher_score(const TeacherScoreRecord& r) {
  return format_fixed(r.pos_score, 6) + '\t' + format_fixed(r.neg_score, 6) + '\t' + r.query_id + '\t' +
         r.pos_passage_id + '\t' + r.neg_passage_id;
}

void write_teacher_scores(const std::filesystem::path& path, std::span<const TeacherScoreRecord> records) {
  std::ofstream out = open_output(path);
  for (const auto& r : records) {
    KDRANK_CHECK(std::isfinite(r.pos_score) && std::isfinite(r.neg_score), NonFiniteError,
                 "non-finite teacher score");
    out << format_teacher_score(r) << '\n';
  }
}

std::vector<TeacherScoreRecord> read_teacher_scores(const std::filesystem::path& path) {
  std::vector<TeacherScoreRecord> records;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split(line, '\t');
    if (cols.size() < 2) throw FormatError(path.string(), line_no, "expected at least 2 score columns");
    if (cols.size() == 3 || cols.size() == 4) {
      throw FormatError(path.string(), line_no, "id columns must be qid, pos_id and neg_id together");
    }
    TeacherScoreRecord r;
    r.pos_score = parse_double(cols[0], path, line_no);
    r.neg_score = parse_double(cols[1], path, line_no);
    if (cols.size() >= 5) {
      r.query_id = cols[2];
      r.pos_passage_id = cols[3];
      r.neg_passage_id = cols[4];
    }
    records.push_back(std::move(r));
  });
  return records;
}

void check_alignment(std::span<const TrainingTriple> triples, std::span<const TeacherScoreRecord> records) {
  KDRANK_CHECK(triples.size() == records.size(), Error,
               "teacher score count " + std::to_string(records.size()) + " differs from triple count " +
                   std::to_string(triples.size()));
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& r = records[i];
    if (r.query_id.empty()) continue;
    const auto& t = triples[i];
    if (r.query_id != t.query_id || r.pos_passage_id != t.pos_passage_id ||
        r.neg_passage_id != t.neg_passage_id) {
      throw Error("teacher score record " + std::to_string(i + 1) + " is not aligned with its triple");
    }
  }
}

Qrels read_qrels(const std::filesystem::path& path) {
  Qrels q;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split_whitespace(line);
    if (cols.empty()) return;
    if (cols.size() != 4) {
      throw FormatError(path.string(), line_no, "expected 'qid 0 pid grade', found " +
                                                    std::to_string(cols.size()) + " columns");
    }
    const long long grade = parse_int(cols[3], path, line_no);
    if (grade < 0) throw FormatError(path.string(), line_no, "negative grade");
    q.set(std::string(cols[0]), std::string(cols[2]), static_cast<int>(grade));
  });
  return q;
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  std::ofstream out = open_output(path);
  for (const auto& [qid, judged] : qrels.queries()) {
    for (const auto& [pid, grade] : judged) out << qid << " 0 " << pid << ' ' << grade << '\n';
  }
}

void write_run(const std::filesystem::path& path, const Run& run, std::string_view tag) {
  std::ofstream out = open_output(path);
  for (const auto& [qid, entries] : run) {
    std::vector<RunEntry> ranked = entries;
    sort_ranking(ranked);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      KDRANK_CHECK(ranked[i].passage_id != ranked[i - 1].passage_id || ranked[i].score != ranked[i - 1].score,
                   Error, "duplicate passage '" + ranked[i].passage_id + "' for query '" + qid + "'");
    }
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      out << qid << " Q0 " << ranked[i].passage_id << ' ' << (i + 1) << ' ' << format_shortest(ranked[i].score)
          << ' ' << tag << '\n';
    }
  }
}

Run read_run(const std::filesystem::path& path) {
  Run run;
  std::map<std::string, std::vector<std::pair<long long, RunEntry>>, std::less<>> ranked;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split_whitespace(line);
    if (cols.empty()) return;
    if (cols.size() != 6) {
      throw FormatError(path.string(), line_no, "expected 'qid Q0 pid rank score tag', found " +
                                                    std::to_string(cols.size()) + " columns");
    }
    const long long rank = parse_int(cols[3], path, line_no);
    const double score = parse_double(cols[4], path, line_no);
    if (!seen.emplace(cols[0], cols[2]).second) {
      throw FormatError(path.string(), line_no,
                        "duplicate passage '" + std::string(cols[2]) + "' for query '" + std::string(cols[0]) + "'");
    }
    ranked[std::string(cols[0])].push_back({rank, RunEntry{std::string(cols[2]), score}});
  });
  for (auto& [qid, entries] : ranked) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& out = run[qid];
    for (auto& [rank, e] : entries) out.push_back(std::move(e));
  }
  return run;
}

CandidateLists read_candidates(const std::filesystem::path& path) {
  CandidateLists lists;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw FormatError(path.string(), line_no, "expected 2 columns");
    lists[std::string(cols[0])].emplace_back(cols[1]);
  });
  return lists;
}

void write_candidates(const std::filesystem::path& path, const CandidateLists& candidates) {
  std::ofstream out = open_output(path);
  for (const auto& [qid, pids] : candidates) {
    for (const auto& pid : pids) out << qid << '\t' << pid << '\n';
  }
}

}  // namespace kdrank
