#include "kdial/knowledge/index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <set>

#include "kdial/common/binary_io.hpp"
#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"

namespace kdial::knowledge {

using tokenizer::TokenId;

nlohmann::json to_json(const Document& d) {
  nlohmann::json j = {{"id", d.id}, {"title", d.title}, {"body", d.body}};
  if (d.timestamp) j["timestamp"] = *d.timestamp;
  return j;
}

Document document_from_json(const nlohmann::json& j) {
  try {
    Document d;
    d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    d.title = j.value("title", "");
    d.body = j.at("body").get<std::string>();
    if (j.contains("timestamp") && !j.at("timestamp").is_null()) {
      d.timestamp = j.at("timestamp").is_string() ? j.at("timestamp").get<std::string>() : j.at("timestamp").dump();
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed document: ") + e.what());
  }
}

std::vector<Document> read_documents(const std::string& path) {
  std::vector<Document> docs;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) { docs.push_back(document_from_json(j)); });
  return docs;
}

std::vector<Analyzer::Span> Analyzer::spans(std::string_view text) const {
  std::string lower(text);
  for (auto& c : lower) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  std::vector<Span> out;
  std::size_t pos = 0;
  for (TokenId t : vocab_.encode(lower)) {
    const auto& bytes = vocab_.bytes(t);
    bool indexed = false;
    for (unsigned char c : bytes) indexed = indexed || std::isalnum(c) || c >= 0x80;
    out.push_back({t, pos, pos + bytes.size(), indexed});
    pos += bytes.size();
  }
  return out;
}

std::vector<TokenId> Analyzer::terms(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& s : spans(text)) {
    if (s.indexed) out.push_back(s.term);
  }
  return out;
}

Index Index::build(std::vector<Document> docs, Analyzer analyzer, Bm25Params params) {
  Index index(std::move(analyzer), params);
  for (auto& d : docs) index.add_document(std::move(d));
  return index;
}

void Index::add_document(Document doc) {
  if (doc.body.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("document '" + doc.id + "' has an empty body");
  }
  if (ids_.count(doc.id)) throw ValidationError("duplicate document id '" + doc.id + "'");
  const auto n = static_cast<std::uint32_t>(docs_.size());
  std::map<TokenId, std::uint32_t> tf;
  std::uint32_t length = 0;
  for (const auto* field : {&doc.title, &doc.body}) {
    for (TokenId t : analyzer_.terms(*field)) {
      ++tf[t];
      ++length;
    }
  }
  for (const auto& [term, count] : tf) postings_[term].push_back({n, count});
  lengths_.push_back(length);
  total_length_ += length;
  ids_.emplace(doc.id, n);
  docs_.push_back(std::move(doc));
}

void Index::freeze_statistics() {
  Stats s;
  s.doc_count = static_cast<double>(docs_.size());
  s.avg_length = avg_length();
  for (const auto& [term, list] : postings_) s.df[term] = static_cast<std::uint32_t>(list.size());
  frozen_ = std::move(s);
}

double Index::doc_count() const { return frozen_ ? frozen_->doc_count : static_cast<double>(docs_.size()); }

double Index::avg_length() const {
  if (frozen_) return frozen_->avg_length;
  return docs_.empty() ? 0.0 : static_cast<double>(total_length_) / static_cast<double>(docs_.size());
}

std::uint32_t Index::df(TokenId term) const {
  if (frozen_) {
    const auto it = frozen_->df.find(term);
    if (it != frozen_->df.end()) return it->second;
  }
  const auto it = postings_.find(term);
  return it == postings_.end() ? 0 : static_cast<std::uint32_t>(it->second.size());
}

double Index::idf(TokenId term) const {
  const double n = doc_count();
  const double d = static_cast<double>(df(term));
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Index::score(std::string_view query, std::size_t doc) const {
  const auto terms = analyzer_.terms(query);
  const std::set<TokenId> unique(terms.begin(), terms.end());
  const double avgdl = avg_length();
  const double dl = static_cast<double>(lengths_.at(doc));
  double s = 0.0;
  for (TokenId t : unique) {
    const auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    const auto p = std::lower_bound(it->second.begin(), it->second.end(), static_cast<std::uint32_t>(doc),
                                    [](const Posting& x, std::uint32_t d) { return x.doc < d; });
    if (p == it->second.end() || p->doc != doc) continue;
    const double tf = static_cast<double>(p->tf);
    const double norm = avgdl > 0.0 ? dl / avgdl : 0.0;
    s += idf(t) * tf * (bm25_.k1 + 1.0) / (tf + bm25_.k1 * (1.0 - bm25_.b + bm25_.b * norm));
  }
  return s;
}

std::vector<SearchHit> Index::search(std::string_view query, std::size_t k, const SearchOptions& options) const {
  if (k == 0) throw ValidationError("search: k must be at least 1");
  const auto terms = analyzer_.terms(query);
  const std::set<TokenId> unique(terms.begin(), terms.end());
  std::set<std::uint32_t> candidates;
  for (TokenId t : unique) {
    const auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    for (const auto& p : it->second) candidates.insert(p.doc);
  }
  std::vector<std::pair<double, std::uint32_t>> scored;
  for (auto d : candidates) scored.emplace_back(score(query, d), d);
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return docs_[a.second].id < docs_[b.second].id;
  });
  if (scored.size() > k) scored.resize(k);
  const std::vector<TokenId> query_terms(unique.begin(), unique.end());
  std::vector<SearchHit> hits;
  for (const auto& [s, d] : scored) {
    hits.push_back({docs_[d].id, s, docs_[d].title, snippet(d, query_terms, options.snippet_tokens)});
  }
  return hits;
}

std::string Index::snippet(std::size_t doc, const std::vector<TokenId>& query_terms, std::size_t window) const {
  const auto& body = docs_.at(doc).body;
  const auto spans = analyzer_.spans(body);
  if (spans.empty() || window == 0) return {};
  const std::set<TokenId> wanted(query_terms.begin(), query_terms.end());
  std::vector<double> weight(spans.size(), 0.0);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].indexed && wanted.count(spans[i].term)) weight[i] = idf(spans[i].term);
  }
  const std::size_t w = std::min(window, spans.size());
  double current = 0.0;
  for (std::size_t i = 0; i < w; ++i) current += weight[i];
  double best = current;
  std::size_t best_start = 0;
  for (std::size_t start = 1; start + w <= spans.size(); ++start) {
    current += weight[start + w - 1] - weight[start - 1];
    if (current > best + 1e-12) {
      best = current;
      best_start = start;
    }
  }
  const std::size_t from = spans[best_start].begin;
  const std::size_t to = spans[best_start + w - 1].end;
  std::string out = body.substr(from, to - from);
  const auto b = out.find_first_not_of(" \t\r\n");
  const auto e = out.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : out.substr(b, e - b + 1);
}

namespace {

constexpr char kMagic[8] = {'K', 'D', 'I', 'A', 'L', 'I', 'D', 'X'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void Index::save(const std::string& path) const {
  ByteWriter out;
  out.put_raw(std::string_view(kMagic, sizeof(kMagic)));
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint32_t>(analyzer_.vocabulary().fingerprint());
  out.put<double>(bm25_.k1);
  out.put<double>(bm25_.b);
  out.put<std::uint64_t>(docs_.size());
  for (const auto& d : docs_) {
    out.put_string(d.id);
    out.put_string(d.title);
    out.put_string(d.body);
    out.put<std::uint8_t>(d.timestamp ? 1 : 0);
    if (d.timestamp) out.put_string(*d.timestamp);
    out.put<std::uint32_t>(lengths_[&d - docs_.data()]);
  }
  out.put<std::uint64_t>(postings_.size());
  for (const auto& [term, list] : postings_) {
    out.put<std::int32_t>(term);
    out.put<std::uint64_t>(list.size());
    for (const auto& p : list) {
      out.put<std::uint32_t>(p.doc);
      out.put<std::uint32_t>(p.tf);
    }
  }
  out.put<std::uint8_t>(frozen_ ? 1 : 0);
  if (frozen_) {
    out.put<double>(frozen_->doc_count);
    out.put<double>(frozen_->avg_length);
    out.put<std::uint64_t>(frozen_->df.size());
    for (const auto& [term, n] : frozen_->df) {
      out.put<std::int32_t>(term);
      out.put<std::uint32_t>(n);
    }
  }
  write_checked_file(path, std::move(out.bytes()));
}

Index Index::load(const std::string& path, Analyzer analyzer) {
  const auto bytes = read_checked_file(path);
  ByteReader in(bytes);
  if (std::memcmp(in.get_raw(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path + ": not an index file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw FormatError(path + ": unsupported index version " + std::to_string(version));
  const auto fingerprint = in.get<std::uint32_t>();
  if (fingerprint != analyzer.vocabulary().fingerprint()) {
    throw ValidationError(path + ": index was built with a different vocabulary");
  }
  Bm25Params params;
  params.k1 = in.get<double>();
  params.b = in.get<double>();
  Index index(std::move(analyzer), params);
  const auto n = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    Document d;
    d.id = in.get_string();
    d.title = in.get_string();
    d.body = in.get_string();
    if (in.get<std::uint8_t>()) d.timestamp = in.get_string();
    const auto length = in.get<std::uint32_t>();
    index.lengths_.push_back(length);
    index.total_length_ += length;
    if (!index.ids_.emplace(d.id, static_cast<std::uint32_t>(i)).second) {
      throw FormatError(path + ": duplicate document id '" + d.id + "'");
    }
    index.docs_.push_back(std::move(d));
  }
  const auto terms = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < terms; ++i) {
    const auto term = in.get<std::int32_t>();
    const auto count = in.get<std::uint64_t>();
    auto& list = index.postings_[term];
    for (std::uint64_t j = 0; j < count; ++j) {
      Posting p;
      p.doc = in.get<std::uint32_t>();
      p.tf = in.get<std::uint32_t>();
      if (p.doc >= n) throw FormatError(path + ": posting references missing document " + std::to_string(p.doc));
      list.push_back(p);
    }
  }
  if (in.get<std::uint8_t>()) {
    Stats s;
    s.doc_count = in.get<double>();
    s.avg_length = in.get<double>();
    const auto m = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < m; ++i) {
      const auto term = in.get<std::int32_t>();
      s.df[term] = in.get<std::uint32_t>();
    }
    index.frozen_ = std::move(s);
  }
  if (in.remaining() != 0) throw FormatError(path + ": trailing bytes");
  return index;
}

void Index::verify() const {
  Index fresh = build(docs_, analyzer_, bm25_);
  if (fresh.postings_ != postings_ || fresh.lengths_ != lengths_) {
    throw FormatError("index statistics disagree with a recount of its documents");
  }
}

}  // namespace kdial::knowledge
