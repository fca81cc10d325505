#include "kdial/corpus/pipeline.hpp"

#include "kdial/common/error.hpp"
#include "kdial/corpus/mixer.hpp"

namespace kdial::corpus {

nlohmann::json CorpusBuildStats::to_json() const {
  return {{"threads", threads},         {"documents", documents}, {"extracted", extracted},
          {"dropped_by_cleaning", dropped_by_cleaning}, {"duplicates", duplicates}, {"emitted", emitted}};
}

std::vector<Dialogue> build_dialogues(const std::vector<nlohmann::json>& raw, const CorpusBuildOptions& options,
                                      const TokenCounter& count_tokens, CorpusBuildStats* stats) {
  CorpusBuildStats local;
  CorpusBuildStats& st = stats ? *stats : local;
  std::vector<Dialogue> single, multi;
  Deduplicator dedup;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& rec = raw[i];
    const std::string kind = rec.value("kind", "");
    const std::string fallback = "record" + std::to_string(i);
    std::vector<Dialogue> extracted;
    if (kind == "thread") {
      ++st.threads;
      extracted = comments_to_dialogues(thread_from_json(rec, fallback));
    } else if (kind == "doc") {
      ++st.documents;
      if (!rec.contains("text") || !rec.at("text").is_string()) {
        throw ValidationError("raw record " + std::to_string(i) + ": doc without text");
      }
      extracted.push_back(text_to_dialogue(strip_control_characters(rec.at("text").get<std::string>()),
                                           rec.value("id", fallback), options.utterance_cap, count_tokens,
                                           rec.value("speaker", "author")));
    } else {
      throw ValidationError("raw record " + std::to_string(i) + ": unknown kind '" + kind + "'");
    }
    for (auto& d : extracted) {
      ++st.extracted;
      auto cleaned = clean_dialogue(std::move(d), options.cleaning);
      if (!cleaned) {
        ++st.dropped_by_cleaning;
        continue;
      }
      if (!dedup.insert(*cleaned)) {
        ++st.duplicates;
        continue;
      }
      (cleaned->kind == DialogueKind::kSingleParty ? single : multi).push_back(std::move(*cleaned));
    }
  }
  auto out = mix_corpora(std::move(single), std::move(multi), options.single_weight, options.multi_weight,
                         options.seed);
  st.emitted = out.size();
  return out;
}

}  // namespace kdial::corpus
