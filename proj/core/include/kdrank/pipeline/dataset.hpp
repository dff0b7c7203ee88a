#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "kdrank/data/formats.hpp"
#include "kdrank/encoder/vocabulary.hpp"

namespace kdrank {

/// Token ids for every text of a collection, tokenized once up front.
class TokenStore {
 public:
  TokenStore() = default;
  TokenStore(const TextCollection& texts, const Vocabulary& vocab, std::size_t cap);

  std::size_t size() const { return sequences_.size(); }
  const std::string& id(std::size_t index) const { return ids_[index]; }
  const TokenSequence& at(std::size_t index) const { return sequences_[index]; }
  /// Throws Error for unknown ids.
  std::size_t index_of(std::string_view id) const { return lookup_.index_of(id); }
  const TokenSequence& get(std::string_view id) const { return sequences_[index_of(id)]; }

 private:
  TextCollection lookup_;
  std::vector<std::string> ids_;
  std::vector<TokenSequence> sequences_;
};

}  // namespace kdrank
