#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "kdial/knowledge/index.hpp"

namespace kdial::testing {

struct OracleHit {
  std::string id;
  double score;
};

// Exhaustive BM25: re-tokenizes every document and scores all of them.
inline std::vector<OracleHit> exhaustive_bm25(const std::vector<knowledge::Document>& docs,
                                              const knowledge::Analyzer& analyzer, const std::string& query,
                                              double k1 = 1.2, double b = 0.75) {
  std::vector<std::vector<tokenizer::TokenId>> terms;
  double total = 0;
  for (const auto& d : docs) {
    auto t = analyzer.terms(d.title);
    const auto body = analyzer.terms(d.body);
    t.insert(t.end(), body.begin(), body.end());
    total += static_cast<double>(t.size());
    terms.push_back(std::move(t));
  }
  const double n = static_cast<double>(docs.size());
  const double avgdl = docs.empty() ? 0 : total / n;
  const auto q = analyzer.terms(query);
  const std::set<tokenizer::TokenId> unique(q.begin(), q.end());
  std::vector<OracleHit> hits;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0;
    bool matched = false;
    for (auto term : unique) {
      const double tf = static_cast<double>(std::count(terms[i].begin(), terms[i].end(), term));
      if (tf == 0) continue;
      matched = true;
      double df = 0;
      for (const auto& t : terms) df += std::find(t.begin(), t.end(), term) != t.end();
      const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
      const double dl = static_cast<double>(terms[i].size());
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
    }
    if (matched) hits.push_back({docs[i].id, score});
  }
  std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& c) {
    if (a.score != c.score) return a.score > c.score;
    return a.id < c.id;
  });
  return hits;
}

}  // namespace kdial::testing
