#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdial/corpus/cleaning.hpp"
#include "kdial/corpus/dialogue.hpp"
#include "kdial/corpus/extract.hpp"

namespace kdial::corpus {

struct CorpusBuildOptions {
  std::size_t utterance_cap = 64;
  double single_weight = 1.0;
  double multi_weight = 1.0;
  std::uint64_t seed = 0;
  CleaningOptions cleaning;
};

struct CorpusBuildStats {
  std::size_t threads = 0;
  std::size_t documents = 0;
  std::size_t extracted = 0;
  std::size_t dropped_by_cleaning = 0;
  std::size_t duplicates = 0;
  std::size_t emitted = 0;
  nlohmann::json to_json() const;
};

/// Raw JSON-lines records ({"kind":"thread",...} or {"kind":"doc",...}) to a
/// cleaned, deduplicated, single/multi-party mixed dialogue list.
std::vector<Dialogue> build_dialogues(const std::vector<nlohmann::json>& raw, const CorpusBuildOptions& options,
                                      const TokenCounter& count_tokens, CorpusBuildStats* stats = nullptr);

}  // namespace kdial::corpus
