#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "manifest.hpp"

namespace kdial::cli {

struct BuildCorpusArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string stats;
  std::size_t utterance_cap = 64;
  double single_weight = 1.0;
  double multi_weight = 1.0;
};

struct TrainTokenizerArgs {
  std::vector<std::string> corpus;
  std::size_t size = 2048;
  std::string out;
};

struct TrainArgs {
  std::string phase;
  std::vector<std::string> data;
  std::string vocab;
  std::string out;
  std::string init;
  std::string resume;
  bool force = false;
  std::string phase_config;
  std::string model_config;
  std::string loss_csv;
  std::size_t max_context = 8;
  std::size_t stop_after = 0;
  std::size_t max_steps = 0;  // cap on total steps; 0 keeps the phase budget
};

struct IndexArgs {
  std::string docs;
  std::string vocab;
  std::string out;
};

struct SearchArgs {
  std::string index;
  std::string vocab;
  std::string query;
  std::size_t k = 5;
};

struct DecodeArgs {
  std::string strategy = "greedy";
  double top_p = 0.9;
  double temperature = 1.0;
  std::size_t max_new_tokens = 48;
  std::size_t top_k_docs = 1;
  std::size_t knowledge_tokens = 128;
  std::size_t max_context = 8;
};

struct ChatArgs {
  std::string model;
  std::string vocab;
  std::string index;
  std::string transcript;
  DecodeArgs decode;
};

struct SelfChatArgs {
  std::string model;
  std::string vocab;
  std::string index;
  std::vector<std::string> topics;
  std::size_t rounds = 5;
  std::string out;
  bool timing = false;
  DecodeArgs decode;
};

struct EvaluateArgs {
  std::string annotations;
  std::string model;
  std::string baseline;
  bool zero_fill = false;
  std::string out;
  std::string table;
  std::string csv;
};

struct ReportArgs {
  std::string report;
  std::string format = "text";
  std::string model;
  std::string baseline;
};

struct MockArgs {
  std::string set;
  std::string out;
};

struct DemoArgs {
  std::string out;
  std::size_t topics = 50;
};

RunRecord build_corpus(const BuildCorpusArgs& a, std::uint64_t seed, std::ostream& out);
RunRecord train_tokenizer(const TrainTokenizerArgs& a, std::ostream& out);
RunRecord train(const TrainArgs& a, std::uint64_t seed, std::ostream& out);
RunRecord index(const IndexArgs& a, std::ostream& out);
RunRecord search(const SearchArgs& a, std::ostream& out);
RunRecord chat(const ChatArgs& a, std::uint64_t seed, std::istream& in, std::ostream& out);
RunRecord self_chat(const SelfChatArgs& a, std::uint64_t seed, std::ostream& out);
RunRecord evaluate(const EvaluateArgs& a, std::ostream& out);
RunRecord report(const ReportArgs& a, std::ostream& out);
RunRecord make_mock(const MockArgs& a, std::ostream& out);
RunRecord make_demo(const DemoArgs& a, std::uint64_t seed, std::ostream& out);

}  // namespace kdial::cli
