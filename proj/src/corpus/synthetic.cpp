#include "kdial/corpus/synthetic.hpp"

#include <random>
#include <set>

#include "kdial/common/error.hpp"

namespace kdial::corpus {

namespace {

const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "st"};
const char* kVowels[] = {"a", "e", "i", "o", "u"};
const char* kCodas[] = {"", "n", "r", "l", "s", "k", "m"};
const char* kKinds[] = {"mount", "lake", "river", "island", "forest", "tower", "valley", "harbor"};
const char* kFactNouns[] = {"stones", "bells", "lanterns", "orchards", "bridges", "caves", "statues", "gardens"};

const char* kAsk[] = {"what is {} known for?", "have you heard of {}?", "tell me something about {}."};
const char* kProbe = "do you know anything about {}?";
const char* kOpeners[] = {"hi there, how is your day going?", "hello! nice to meet you.", "hey, good to see you again."};

const char* kActivities[] = {"baking bread", "playing chess", "painting walls", "reading poems", "fixing bikes",
                             "walking dogs", "watching films", "learning songs", "planting beans", "cleaning windows"};
const char* kChitReplies[] = {"that sounds like fun, i enjoy {} too.", "nice, i have never tried {} myself.",
                              "oh really? tell me more about {}."};
const char* kChitAsks[] = {"i spent the whole day {}.", "lately i am really into {}.", "my friend and i love {}."};

std::string fill(const char* tmpl, const std::string& value) {
  std::string s = tmpl;
  const auto at = s.find("{}");
  return at == std::string::npos ? s : s.replace(at, 2, value);
}

template <typename Array>
const char* pick(const Array& a, std::mt19937_64& rng) {
  return a[rng() % (sizeof(a) / sizeof(a[0]))];
}

}  // namespace

std::vector<Dialogue> SyntheticWorld::dialogues() const {
  std::vector<Dialogue> out;
  for (const auto& r : records) {
    Dialogue d{r.id, DialogueKind::kMultiParty, r.context};
    d.utterances.push_back({r.responder, r.response});
    out.push_back(std::move(d));
  }
  return out;
}

std::string SyntheticWorld::text() const {
  std::string t;
  for (const auto& topic : topics) t += topic.title + "\n" + topic.body + "\n";
  for (const auto& r : records) {
    for (const auto& u : r.context) t += u.text + "\n";
    t += r.response + "\n";
  }
  for (const auto& p : probes) {
    for (const auto& u : p.context) t += u.text + "\n";
  }
  return t;
}

SyntheticWorld make_synthetic_world(std::size_t topic_count, std::uint64_t seed) {
  if (topic_count == 0) throw ValidationError("synthetic world needs at least one topic");
  std::mt19937_64 rng(seed);
  std::set<std::string> used;
  auto word = [&] {
    while (true) {
      std::string w;
      for (int s = 0; s < 2; ++s) {
        w += pick(kOnsets, rng);
        w += pick(kVowels, rng);
        w += pick(kCodas, rng);
      }
      if (used.insert(w).second) return w;
    }
  };

  SyntheticWorld world;
  for (std::size_t i = 0; i < topic_count; ++i) {
    FactTopic t;
    t.id = "fact-" + std::to_string(i + 1);
    t.title = std::string(kKinds[i % 8]) + " " + word();
    t.fact = word() + " " + pick(kFactNouns, rng);
    t.body = t.title + " is famous for its " + t.fact + ". travellers come from far away to see the " + t.fact + ".";
    world.topics.push_back(std::move(t));
  }

  for (std::size_t i = 0; i < world.topics.size(); ++i) {
    const auto& t = world.topics[i];
    for (std::size_t k = 0; k < std::size(kAsk); ++k) {
      KnowledgeDialogueRecord r;
      r.id = t.id + "-" + std::to_string(k + 1);
      r.context = {{"b", pick(kOpeners, rng)}, {"a", fill(kAsk[k], t.title)}};
      r.human_query = t.title;
      r.retrieved_knowledge = t.body;
      r.response = "i read that " + t.title + " is famous for its " + t.fact + ".";
      r.responder = "b";
      world.records.push_back(std::move(r));
    }
    world.probes.push_back({i, {{"b", pick(kOpeners, rng)}, {"a", fill(kProbe, t.title)}}, "b"});
  }

  for (std::size_t i = 0; i < std::size(kActivities); ++i) {
    world.chitchat_topics.push_back(fill(kChitAsks[0], kActivities[i]));
    for (std::size_t k = 0; k < std::size(kChitAsks); ++k) {
      KnowledgeDialogueRecord r;
      r.id = "chat-" + std::to_string(i + 1) + "-" + std::to_string(k + 1);
      r.context = {{"b", pick(kOpeners, rng)}, {"a", fill(kChitAsks[k], kActivities[i])}};
      r.response = fill(kChitReplies[k], kActivities[i]);
      r.responder = "b";
      world.records.push_back(std::move(r));
    }
  }
  return world;
}

}  // namespace kdial::corpus
