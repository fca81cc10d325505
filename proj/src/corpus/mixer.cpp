#include "kdial/corpus/mixer.hpp"

#include <cmath>
#include <memory>

#include "kdial/common/error.hpp"
#include "kdial/common/log.hpp"

namespace kdial::corpus {

DialogueSource vector_source(std::vector<Dialogue> items) {
  auto state = std::make_shared<std::pair<std::vector<Dialogue>, std::size_t>>(std::move(items), 0);
  return [state]() -> std::optional<Dialogue> {
    if (state->second >= state->first.size()) return std::nullopt;
    return state->first[state->second++];
  };
}

CorpusMixer::CorpusMixer(DialogueSource single, DialogueSource multi, double single_weight, double multi_weight,
                         std::uint64_t seed)
    : single_(std::move(single)),
      multi_(std::move(multi)),
      single_weight_(single_weight),
      multi_weight_(multi_weight),
      rng_(seed) {
  if (!(single_weight >= 0.0) || !(multi_weight >= 0.0) || !std::isfinite(single_weight) ||
      !std::isfinite(multi_weight) || single_weight + multi_weight <= 0.0) {
    throw ValidationError("mixing weights must be non-negative with a positive sum");
  }
  single_done_ = single_weight == 0.0;
  multi_done_ = multi_weight == 0.0;
}

std::optional<Dialogue> CorpusMixer::pull(bool single) {
  auto item = single ? single_() : multi_();
  if (item) {
    ++(single ? single_drawn_ : multi_drawn_);
    return item;
  }
  (single ? single_done_ : multi_done_) = true;
  const bool other_live = single ? !multi_done_ : !single_done_;
  if (other_live) {
    log::warning(std::string(single ? "single-party" : "multi-party") +
                 " stream exhausted; continuing with the other stream only");
  }
  return std::nullopt;
}

std::optional<Dialogue> CorpusMixer::next() {
  while (!single_done_ || !multi_done_) {
    bool single;
    if (single_done_) {
      single = false;
    } else if (multi_done_) {
      single = true;
    } else {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      single = u < single_weight_ / (single_weight_ + multi_weight_);
    }
    if (auto item = pull(single)) return item;
  }
  return std::nullopt;
}

std::vector<Dialogue> mix_corpora(std::vector<Dialogue> single, std::vector<Dialogue> multi, double single_weight,
                                  double multi_weight, std::uint64_t seed) {
  CorpusMixer mixer(vector_source(std::move(single)), vector_source(std::move(multi)), single_weight, multi_weight,
                    seed);
  std::vector<Dialogue> out;
  while (auto d = mixer.next()) out.push_back(std::move(*d));
  return out;
}

}  // namespace kdial::corpus
