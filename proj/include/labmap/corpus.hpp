#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "labmap/ingest.hpp"

namespace labmap::corpus {

using StopWords = std::unordered_set<std::string>;
using WordId = std::uint32_t;

StopWords parse_stopwords(std::string_view bytes);
StopWords load_stopwords(const std::string& path);

// Lowercase, split on non-alphanumerics, drop tokens shorter than two
// characters and stopwords. Bytes outside ASCII act as separators.
std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Words must be distinct; index = position.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(id); }
  std::optional<WordId> find(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

// Words with frequency >= min_count, ordered by descending frequency then
// lexicographically. Throws ArgumentError if nothing survives.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_lists,
                            std::size_t min_count);

struct Document {
  std::vector<WordId> tokens;
  double timestamp = 0.0;  // days since 1970-01-01
  std::string event_id;
  std::string fips;
  int year = 0;
  int month = 0;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;

  std::size_t total_tokens() const;
};

// One document per event, in event order. Events whose text keeps no
// vocabulary word become empty documents.
Corpus corpus_from_events(const std::vector<ingest::GeoEvent>& events, const StopWords& stopwords,
                          std::size_t min_count = 1);

// Tokens of a new text mapped onto an existing vocabulary; unknown words
// are dropped.
std::vector<WordId> encode(std::string_view text, const Vocabulary& vocabulary,
                           const StopWords& stopwords);

}  // namespace labmap::corpus
