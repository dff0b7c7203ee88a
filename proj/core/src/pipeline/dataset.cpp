#include "kdrank/pipeline/dataset.hpp"

namespace kdrank {

TokenStore::TokenStore(const TextCollection& texts, const Vocabulary& vocab, std::size_t cap) {
  ids_.reserve(texts.size());
  sequences_.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    lookup_.add(texts.id(i), {});
    ids_.push_back(texts.id(i));
    sequences_.push_back(tokenize(texts.text(i), vocab, cap));
  }
}

}  // namespace kdrank
