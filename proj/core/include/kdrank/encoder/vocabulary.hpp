#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kdrank {

using TokenId = std::uint32_t;

/// Reserved ids; the vocabulary file lists these tokens first, in this order.
struct SpecialTokens {
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kSep = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kPad = 3;
  static constexpr TokenId kOov = 4;
  static constexpr std::size_t kCount = 5;
};

inline constexpr std::size_t kMaxQueryTokens = 30;
inline constexpr std::size_t kMaxPassageTokens = 200;

class Vocabulary {
 public:
  /// Vocabulary holding only the special tokens.
  Vocabulary();

  /// One token per line; line number (0-based) is the id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Adds a case-folded token, returning its id (existing id if present).
  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  /// Case-folded lookup; unknown tokens map to the OOV id.
  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

/// Whitespace tokenization with case folding, truncated to `cap` ids.
/// Throws Error when the text holds no tokens.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t cap);

std::string to_lower(std::string_view s);

}  // namespace kdrank
