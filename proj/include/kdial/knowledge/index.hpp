#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/tokenizer/bpe.hpp"

namespace kdial::knowledge {

struct Document {
  std::string id;
  std::string title;
  std::string body;
  std::optional<std::string> timestamp;
  friend bool operator==(const Document&, const Document&) = default;
};

nlohmann::json to_json(const Document& d);
Document document_from_json(const nlohmann::json& j);
std::vector<Document> read_documents(const std::string& path);

/// Lowercases ASCII, encodes with the model vocabulary, and keeps tokens
/// that contain a letter, digit or non-ASCII byte. Offsets index the
/// original text (lowercasing preserves byte lengths).
class Analyzer {
 public:
  explicit Analyzer(tokenizer::Vocabulary vocab) : vocab_(std::move(vocab)) {}

  struct Span {
    tokenizer::TokenId term;
    std::size_t begin;
    std::size_t end;
    bool indexed;  // false for whitespace/punctuation-only tokens
  };
  std::vector<Span> spans(std::string_view text) const;
  std::vector<tokenizer::TokenId> terms(std::string_view text) const;

  const tokenizer::Vocabulary& vocabulary() const { return vocab_; }

 private:
  tokenizer::Vocabulary vocab_;
};

struct Posting {
  std::uint32_t doc;
  std::uint32_t tf;
  friend bool operator==(const Posting&, const Posting&) = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
  std::string title;
  std::string snippet;
};

struct SearchOptions {
  std::size_t snippet_tokens = 128;
};

/// Inverted index over title + body with BM25 ranking.
class Index {
 public:
  explicit Index(Analyzer analyzer, Bm25Params params = {}) : analyzer_(std::move(analyzer)), bm25_(params) {}

  // Throws ValidationError on a duplicate id or empty body.
  static Index build(std::vector<Document> docs, Analyzer analyzer, Bm25Params params = {});
  void add_document(Document doc);

  // While frozen, document count, average length and document frequencies
  // stay at their values from the moment of freezing.
  void freeze_statistics();
  void unfreeze_statistics() { frozen_.reset(); }
  bool statistics_frozen() const { return frozen_.has_value(); }

  /// Top-k documents sharing at least one term with the query, by BM25
  /// score descending, then id ascending. k must be at least 1.
  std::vector<SearchHit> search(std::string_view query, std::size_t k, const SearchOptions& options = {}) const;

  // BM25 score of one document (unique query terms), for oracles and debugging.
  double score(std::string_view query, std::size_t doc) const;
  double idf(tokenizer::TokenId term) const;

  // Highest-scoring window of the body: sum of idf over query-term tokens in
  // `window` consecutive analyzer tokens; the earliest window wins ties.
  std::string snippet(std::size_t doc, const std::vector<tokenizer::TokenId>& query_terms, std::size_t window) const;

  std::size_t size() const { return docs_.size(); }
  const std::vector<Document>& documents() const { return docs_; }
  const std::map<tokenizer::TokenId, std::vector<Posting>>& postings() const { return postings_; }
  const std::vector<std::uint32_t>& doc_lengths() const { return lengths_; }
  const Analyzer& analyzer() const { return analyzer_; }
  const Bm25Params& bm25() const { return bm25_; }

  // Versioned binary file with the vocabulary fingerprint and a CRC-32.
  void save(const std::string& path) const;
  static Index load(const std::string& path, Analyzer analyzer);

  // Recounts postings and lengths from the documents; throws FormatError on any disagreement.
  void verify() const;

 private:
  struct Stats {
    double doc_count = 0;
    double avg_length = 0;
    std::map<tokenizer::TokenId, std::uint32_t> df;
  };
  double doc_count() const;
  double avg_length() const;
  std::uint32_t df(tokenizer::TokenId term) const;

  Analyzer analyzer_;
  Bm25Params bm25_;
  std::vector<Document> docs_;
  std::map<std::string, std::uint32_t> ids_;
  std::map<tokenizer::TokenId, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> lengths_;
  std::uint64_t total_length_ = 0;
  std::optional<Stats> frozen_;
};

}  // namespace kdial::knowledge
