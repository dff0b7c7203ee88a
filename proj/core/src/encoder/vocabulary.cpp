#include "kdrank/encoder/vocabulary.hpp"

#include <array>
#include <cctype>
#include <fstream>

#include "kdrank/error.hpp"

namespace kdrank {
namespace {

constexpr std::array<std::string_view, SpecialTokens::kCount> kSpecialNames = {
    "[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"};

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Vocabulary::Vocabulary() {
  for (std::string_view name : kSpecialNames) {
    index_.emplace(std::string(name), static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(name);
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  KDRANK_CHECK(in.good(), Error, "cannot open vocabulary file " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no <= SpecialTokens::kCount) {
      if (line != kSpecialNames[line_no - 1]) {
        throw FormatError(path.string(), line_no,
                          "expected special token " + std::string(kSpecialNames[line_no - 1]));
      }
      continue;
    }
    if (line.empty()) throw FormatError(path.string(), line_no, "empty token");
    const std::string folded = to_lower(line);
    if (vocab.index_.contains(folded)) {
      throw FormatError(path.string(), line_no, "duplicate token '" + line + "'");
    }
    vocab.add(folded);
  }
  if (line_no < SpecialTokens::kCount) {
    throw FormatError(path.string(), line_no + 1, "vocabulary is missing special tokens");
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  KDRANK_CHECK(out.good(), Error, "cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocabulary::add(std::string_view token) {
  std::string folded = to_lower(token);
  if (auto it = index_.find(folded); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(folded, id);
  tokens_.push_back(std::move(folded));
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

TokenId Vocabulary::lookup(std::string_view token) const {
  if (auto it = index_.find(to_lower(token)); it != index_.end()) return it->second;
  return SpecialTokens::kOov;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t cap) {
  TokenSequence seq;
  std::size_t i = 0;
  while (i < text.size() && seq.ids.size() < cap) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) seq.ids.push_back(vocab.lookup(text.substr(start, i - start)));
  }
  KDRANK_CHECK(!seq.ids.empty(), Error, "text produced no tokens");
  return seq;
}

}  // namespace kdrank
