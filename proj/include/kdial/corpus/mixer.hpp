#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "kdial/corpus/dialogue.hpp"

namespace kdial::corpus {

using DialogueSource = std::function<std::optional<Dialogue>()>;

DialogueSource vector_source(std::vector<Dialogue> items);

/// Interleaves a single-party and a multi-party stream. Each pull draws the
/// stream with probability proportional to its weight; once one stream runs
/// dry the other continues alone (logged once). A zero-weight stream is
/// never drawn.
class CorpusMixer {
 public:
  CorpusMixer(DialogueSource single, DialogueSource multi, double single_weight, double multi_weight,
              std::uint64_t seed);

  std::optional<Dialogue> next();

  std::size_t single_drawn() const { return single_drawn_; }
  std::size_t multi_drawn() const { return multi_drawn_; }

 private:
  std::optional<Dialogue> pull(bool single);

  DialogueSource single_, multi_;
  double single_weight_, multi_weight_;
  std::mt19937_64 rng_;
  bool single_done_ = false, multi_done_ = false;
  std::size_t single_drawn_ = 0, multi_drawn_ = 0;
};

// Drains a mixer over two in-memory lists.
std::vector<Dialogue> mix_corpora(std::vector<Dialogue> single, std::vector<Dialogue> multi, double single_weight,
                                  double multi_weight, std::uint64_t seed);

}  // namespace kdial::corpus
