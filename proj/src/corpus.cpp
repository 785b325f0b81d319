#include "labmap/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "labmap/error.hpp"

namespace labmap::corpus {

StopWords parse_stopwords(std::string_view bytes) {
  StopWords out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string w;
    for (char c : bytes.substr(pos, nl - pos))
      if (!std::isspace(static_cast<unsigned char>(c)))
        w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (!w.empty()) out.insert(std::move(w));
    pos = nl + 1;
  }
  return out;
}

StopWords load_stopwords(const std::string& path) {
  return parse_stopwords(ingest::read_file(path));
}

std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2 && !stopwords.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c))
      cur.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second)
      throw ArgumentError("duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_lists,
                            std::size_t min_count) {
  if (min_count < 1) throw ArgumentError("min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& list : token_lists)
    for (const auto& t : list) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, n] : freq)
    if (n >= min_count) kept.emplace_back(w, n);
  if (kept.empty()) throw ArgumentError("empty vocabulary after min_count filtering");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [w, n] : kept) words.push_back(std::move(w));
  return Vocabulary(std::move(words));
}

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.tokens.size();
  return n;
}

Corpus corpus_from_events(const std::vector<ingest::GeoEvent>& events, const StopWords& stopwords,
                          std::size_t min_count) {
  if (events.empty()) throw ArgumentError("no events to build a corpus from");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(events.size());
  for (const auto& e : events) tokens.push_back(tokenize(e.raw.report_text, stopwords));

  Corpus c;
  c.vocabulary = build_vocabulary(tokens, min_count);
  c.documents.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    Document d;
    for (const auto& t : tokens[i])
      if (auto id = c.vocabulary.find(t)) d.tokens.push_back(*id);
    const auto& date = events[i].date();
    d.timestamp = static_cast<double>(date.to_days());
    d.event_id = events[i].id();
    d.fips = events[i].fips;
    d.year = date.year;
    d.month = date.month;
    c.documents.push_back(std::move(d));
  }
  return c;
}

std::vector<WordId> encode(std::string_view text, const Vocabulary& vocabulary,
                           const StopWords& stopwords) {
  std::vector<WordId> out;
  for (const auto& t : tokenize(text, stopwords))
    if (auto id = vocabulary.find(t)) out.push_back(*id);
  return out;
}

}  // namespace labmap::corpus
