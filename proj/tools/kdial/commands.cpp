#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"
#include "kdial/common/log.hpp"
#include "kdial/corpus/pipeline.hpp"
#include "kdial/corpus/samples.hpp"
#include "kdial/corpus/synthetic.hpp"
#include "kdial/evaluation/aggregate.hpp"
#include "kdial/evaluation/mock.hpp"
#include "kdial/inference/pipeline.hpp"
#include "kdial/knowledge/index.hpp"
#include "kdial/model/checkpoint.hpp"
#include "kdial/training/trainer.hpp"

namespace kdial::cli {

namespace {

bool is_dialogue(const Json& j) { return j.contains("utterances"); }
bool is_record(const Json& j) { return j.contains("response") && j.contains("context"); }
bool is_document(const Json& j) { return j.contains("body"); }

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> read_topics(const std::string& path) {
  std::vector<std::string> out;
  for (auto line : read_lines(path)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  if (out.empty()) throw ValidationError(path + ": no topics");
  return out;
}

inference::PipelineConfig pipeline_config(const DecodeArgs& a, std::uint64_t seed) {
  inference::PipelineConfig cfg;
  inference::DecodeConfig d;
  d.strategy = inference::parse_strategy(a.strategy);
  d.p = a.top_p;
  d.temperature = a.temperature;
  d.max_new_tokens = a.max_new_tokens;
  d.seed = seed;
  d.validate();
  cfg.query_decode = d;
  cfg.response_decode = d;
  // Queries are short and should be stable: always greedy.
  cfg.query_decode.strategy = inference::Strategy::kGreedy;
  cfg.top_k = a.top_k_docs;
  cfg.knowledge_tokens = a.knowledge_tokens;
  cfg.max_context = a.max_context;
  if (cfg.top_k == 0) throw ValidationError("--docs must be at least 1");
  return cfg;
}

std::optional<knowledge::Index> maybe_index(const std::string& path, const tokenizer::Vocabulary& vocab) {
  if (path.empty()) return std::nullopt;
  return knowledge::Index::load(path, knowledge::Analyzer(vocab));
}

}  // namespace

RunRecord build_corpus(const BuildCorpusArgs& a, std::uint64_t seed, std::ostream& out) {
  std::vector<Json> raw;
  for (const auto& path : a.inputs) {
    for (auto& j : read_jsonl(path)) raw.push_back(std::move(j));
  }
  corpus::CorpusBuildOptions opts;
  opts.utterance_cap = a.utterance_cap;
  opts.single_weight = a.single_weight;
  opts.multi_weight = a.multi_weight;
  opts.seed = seed;
  corpus::CorpusBuildStats stats;
  const auto dialogues = corpus::build_dialogues(raw, opts, corpus::count_words, &stats);
  std::vector<Json> rows;
  for (const auto& d : dialogues) rows.push_back(corpus::to_json(d));
  write_jsonl(a.out, rows);
  out << "dialogues: " << dialogues.size() << " written to " << a.out << "\n" << stats.to_json().dump() << "\n";
  RunRecord r{a.inputs, {a.out}, true, {{"stats", stats.to_json()}}};
  if (!a.stats.empty()) {
    write_text_file(a.stats, stats.to_json().dump(2) + "\n");
    r.outputs.push_back(a.stats);
  }
  return r;
}

RunRecord train_tokenizer(const TrainTokenizerArgs& a, std::ostream& out) {
  std::vector<std::string> texts;
  for (const auto& path : a.corpus) {
    if (!has_suffix(path, ".jsonl")) {
      texts.push_back(read_text_file(path));
      continue;
    }
    for_each_jsonl(path, [&](const Json& j, std::size_t line) {
      if (is_dialogue(j)) {
        for (const auto& u : corpus::dialogue_from_json(j).utterances) texts.push_back(u.text);
      } else if (is_record(j)) {
        const auto r = corpus::knowledge_record_from_json(j);
        for (const auto& u : r.context) texts.push_back(u.text);
        texts.push_back(r.human_query);
        texts.push_back(r.retrieved_knowledge);
        texts.push_back(r.response);
      } else if (is_document(j)) {
        const auto d = knowledge::document_from_json(j);
        texts.push_back(d.title);
        texts.push_back(d.body);
      } else {
        throw ValidationError(path + ":" + std::to_string(line) + ": not a dialogue, knowledge record or document");
      }
    });
  }
  const auto result = tokenizer::train_bpe(texts, a.size);
  result.vocab.save(a.out);
  out << "vocabulary: " << result.vocab.size() << " tokens (" << result.vocab.merges().size() << " merges)"
      << (result.exhausted ? ", corpus exhausted before the target size" : "") << "\n";
  return {a.corpus, {a.out}, true, {{"tokens", result.vocab.size()}, {"exhausted", result.exhausted}}};
}

RunRecord train(const TrainArgs& a, std::uint64_t seed, std::ostream& out) {
  const auto phase_kind = training::parse_phase(a.phase);
  training::PhaseConfig phase =
      a.phase_config.empty() ? training::PhaseConfig::desk(phase_kind) : training::load_phase_config(a.phase_config);
  if (phase.phase != phase_kind) {
    throw ValidationError("--phase " + a.phase + " disagrees with " + a.phase_config + " (" +
                          training::phase_name(phase.phase) + ")");
  }
  phase.seed = seed;
  if (a.max_steps > 0 && phase.total_steps() > a.max_steps) {
    phase.total_tokens = static_cast<std::uint64_t>(a.max_steps) * phase.batch_tokens;
    phase.warmup_steps = std::min(phase.warmup_steps, a.max_steps);
  }
  const auto vocab = tokenizer::Vocabulary::load(a.vocab);

  RunRecord record;
  record.inputs = a.data;
  record.inputs.push_back(a.vocab);
  training::TrainingRun run;
  if (!a.resume.empty()) {
    if (!a.init.empty()) throw ValidationError("--resume and --init are exclusive");
    run = training::load_training_checkpoint(a.resume);
    if (run.phase.phase != phase_kind) {
      throw ValidationError("checkpoint " + a.resume + " belongs to phase " + training::phase_name(run.phase.phase));
    }
    record.inputs.push_back(a.resume);
  } else {
    model::ModelConfig cfg = model::ModelConfig::desk();
    if (!a.model_config.empty()) {
      cfg = model::model_config_from_json(Json::parse(read_text_file(a.model_config)));
      record.inputs.push_back(a.model_config);
    } else {
      cfg.vocab_size = vocab.size();
    }
    run = training::start_run(phase, cfg, a.init, a.force);
    if (!a.init.empty()) record.inputs.push_back(a.init);
  }
  if (!a.phase_config.empty()) record.inputs.push_back(a.phase_config);
  if (vocab.size() > run.model.vocab_size) {
    throw ValidationError("vocabulary has " + std::to_string(vocab.size()) + " tokens, model only " +
                          std::to_string(run.model.vocab_size));
  }

  std::vector<model::Sequence> data;
  std::size_t skipped = 0;
  auto add = [&](const corpus::TrainingSample& s) {
    try {
      data.push_back(corpus::serialize_sample(s, vocab, run.model));
    } catch (const ValidationError& e) {
      ++skipped;
      log::debug(e.what());
    }
  };
  for (const auto& path : a.data) {
    for_each_jsonl(path, [&](const Json& j, std::size_t line) {
      if (is_dialogue(j)) {
        for (const auto& s : corpus::dialogue_to_samples(corpus::dialogue_from_json(j), a.max_context)) add(s);
      } else if (is_record(j)) {
        for (const auto& s : corpus::knowledge_record_to_samples(corpus::knowledge_record_from_json(j))) add(s);
      } else {
        throw ValidationError(path + ":" + std::to_string(line) + ": not a dialogue or knowledge record");
      }
    });
  }
  if (skipped > 0) log::warning("skipped " + std::to_string(skipped) + " samples that do not fit max_len");
  if (data.empty()) throw ValidationError("no training sequences");

  training::TrainOptions opts;
  opts.checkpoint_path = a.out;
  opts.loss_csv = a.loss_csv;
  opts.stop_after = a.stop_after;
  const std::size_t total = run.phase.total_steps();
  opts.on_step = [&](const training::LossRecord& r) {
    if (r.step % 25 == 0 || r.step == total) {
      out << "step " << r.step << "/" << total << " lr " << r.lr << " loss " << r.loss << "\n" << std::flush;
    }
  };
  const auto result = training::train_phase(run, data, opts);
  if (result.aborted) throw Error("training aborted: " + result.message);
  out << "phase " << training::phase_name(run.phase.phase) << ": " << run.state.step << " steps, "
      << run.state.tokens_seen << " tokens, " << data.size() << " sequences; checkpoint " << a.out << "\n";
  record.outputs.push_back(a.out);
  if (!a.loss_csv.empty()) record.outputs.push_back(a.loss_csv);
  record.details = {{"steps", run.state.step},
                    {"sequences", data.size()},
                    {"skipped", skipped},
                    {"lineage", run.state.lineage},
                    {"final_loss", result.curve.empty() ? 0.0 : result.curve.back().loss}};
  return record;
}

RunRecord index(const IndexArgs& a, std::ostream& out) {
  const auto vocab = tokenizer::Vocabulary::load(a.vocab);
  auto idx = knowledge::Index::build(knowledge::read_documents(a.docs), knowledge::Analyzer(vocab));
  idx.save(a.out);
  out << "indexed " << idx.size() << " documents, " << idx.postings().size() << " terms into " << a.out << "\n";
  return {{a.docs, a.vocab}, {a.out}, true, {{"documents", idx.size()}}};
}

RunRecord search(const SearchArgs& a, std::ostream& out) {
  const auto vocab = tokenizer::Vocabulary::load(a.vocab);
  const auto idx = knowledge::Index::load(a.index, knowledge::Analyzer(vocab));
  const auto hits = idx.search(a.query, a.k);
  if (hits.empty()) out << "no matching documents\n";
  Json details = Json::array();
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& h = hits[i];
    out << i + 1 << ". [" << h.doc_id << "] " << h.title << "  (" << h.score << ")\n   " << h.snippet << "\n";
    details.push_back({{"doc_id", h.doc_id}, {"score", h.score}});
  }
  return {{a.index, a.vocab}, {}, true, {{"query", a.query}, {"hits", details}}};
}

namespace {

void print_trace(const inference::TurnTrace& t, std::ostream& out) {
  if (t.query) {
    out << "  [query] " << *t.query << "\n";
  } else {
    out << "  [query] none (answering without search)\n";
  }
  if (t.retrieval_failed) out << "  [search failed] " << t.retrieval_error << "\n";
  if (t.retrieval) {
    if (t.retrieval->empty()) out << "  [retrieved] nothing\n";
    for (const auto& d : *t.retrieval) out << "  [retrieved] " << d.doc_id << " " << d.title << " (" << d.score << ")\n";
  }
}

}  // namespace

RunRecord chat(const ChatArgs& a, std::uint64_t seed, std::istream& in, std::ostream& out) {
  const auto m = inference::DialogueModel::load(a.model, a.vocab);
  const auto store = maybe_index(a.index, m.vocab);
  const auto base = pipeline_config(a.decode, seed);
  std::vector<corpus::Utterance> history;
  std::vector<Json> transcript;
  out << "type a message; /reset clears the conversation, /quit exits\n";
  std::string line;
  std::size_t turn = 0;
  while (out << "you: " << std::flush, std::getline(in, line)) {
    if (line == "/quit") break;
    if (line == "/reset") {
      history.clear();
      out << "(conversation cleared)\n";
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    history.push_back({"user", line});
    auto cfg = base;
    cfg.query_decode.seed = seed + turn;
    cfg.response_decode.seed = seed + turn;
    auto trace = inference::respond(m, history, "bot", store ? &*store : nullptr, cfg);
    trace.turn = ++turn;
    print_trace(trace, out);
    out << "bot: " << trace.response << "\n";
    history.push_back({"bot", trace.response});
    transcript.push_back(trace.to_json(true));
  }
  out << "\n";
  RunRecord r{{a.model, a.vocab}, {}, false, {{"turns", turn}}};
  if (!a.index.empty()) r.inputs.push_back(a.index);
  if (!a.transcript.empty()) {
    write_jsonl(a.transcript, transcript);
    r.outputs.push_back(a.transcript);
  }
  return r;
}

RunRecord self_chat(const SelfChatArgs& a, std::uint64_t seed, std::ostream& out) {
  if (a.rounds == 0) throw ValidationError("--rounds must be at least 1");
  const auto m = inference::DialogueModel::load(a.model, a.vocab);
  const auto store = maybe_index(a.index, m.vocab);
  const auto base = pipeline_config(a.decode, seed);
  std::vector<Json> rows;
  RunRecord r{{a.model, a.vocab}, {a.out}, !a.timing, {}};
  if (!a.index.empty()) r.inputs.push_back(a.index);
  std::size_t queries = 0, turns = 0;
  for (const auto& file : a.topics) {
    r.inputs.push_back(file);
    const auto topics = read_topics(file);
    for (std::size_t i = 0; i < topics.size(); ++i) {
      auto cfg = base;
      // Spread topics apart so per-turn seeds never collide.
      const std::uint64_t topic_seed = seed + 1000 * rows.size();
      cfg.query_decode.seed = topic_seed;
      cfg.response_decode.seed = topic_seed;
      const auto log = inference::self_chat(m, topics[i], a.rounds, store ? &*store : nullptr, cfg);
      Json utts = Json::array();
      for (const auto& u : log.utterances()) utts.push_back(corpus::to_json(u));
      Json traces = Json::array();
      for (std::size_t t = 1; t < log.turns.size(); ++t) {
        traces.push_back(log.turns[t].to_json(a.timing));
        queries += log.turns[t].query.has_value();
        ++turns;
      }
      rows.push_back({{"topic", topics[i]},
                      {"topic_file", std::filesystem::path(file).filename().string()},
                      {"topic_index", i},
                      {"seed", topic_seed},
                      {"rounds", a.rounds},
                      {"utterances", utts},
                      {"turns", traces}});
    }
  }
  write_jsonl(a.out, rows);
  out << "self-chat: " << rows.size() << " topics, " << turns << " generated turns, " << queries
      << " with a search query; log " << a.out << "\n";
  r.details = {{"topics", rows.size()}, {"turns", turns}, {"queries", queries}};
  return r;
}

RunRecord evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto records = evaluation::read_annotations(a.annotations);
  evaluation::AggregateOptions opts;
  opts.policy = a.zero_fill ? evaluation::InvalidPolicy::kZeroFill : evaluation::InvalidPolicy::kExclude;
  const auto report = evaluation::aggregate(records, opts);
  const auto table = evaluation::render_table(report, a.model, a.baseline);
  out << "invalid records: " << (a.zero_fill ? "scored as 0" : "excluded") << "\n" << table;
  RunRecord r{{a.annotations}, {}, true, {{"mean_kappa", report.mean_kappa}}};
  if (!a.out.empty()) {
    auto j = report.to_json();
    j["invalid_policy"] = a.zero_fill ? "zero-fill" : "exclude";
    write_text_file(a.out, j.dump(2) + "\n");
    r.outputs.push_back(a.out);
  }
  if (!a.table.empty()) {
    write_text_file(a.table, table);
    r.outputs.push_back(a.table);
  }
  if (!a.csv.empty()) {
    write_text_file(a.csv, evaluation::render_csv(report));
    r.outputs.push_back(a.csv);
  }
  return r;
}

RunRecord report(const ReportArgs& a, std::ostream& out) {
  const auto report = evaluation::metric_report_from_json(Json::parse(read_text_file(a.report)));
  if (a.format == "text") {
    out << evaluation::render_table(report, a.model, a.baseline);
  } else if (a.format == "csv") {
    out << evaluation::render_csv(report);
  } else {
    throw ValidationError("--format must be text or csv");
  }
  return {{a.report}, {}, true, {}};
}

RunRecord make_mock(const MockArgs& a, std::ostream& out) {
  evaluation::MockSpec spec;
  if (a.set == "chitchat") {
    spec = evaluation::chitchat_spec();
  } else if (a.set == "knowledge") {
    spec = evaluation::knowledge_spec();
  } else {
    throw ValidationError("--set must be chitchat or knowledge");
  }
  const auto records = evaluation::make_mock_annotations(spec);
  evaluation::write_annotations(a.out, records);
  const auto report = evaluation::aggregate(records);
  out << records.size() << " annotations written to " << a.out << "; mean kappa " << report.mean_kappa << "\n";
  return {{}, {a.out}, true, {{"records", records.size()}, {"mean_kappa", report.mean_kappa}}};
}

RunRecord make_demo(const DemoArgs& a, std::uint64_t seed, std::ostream& out) {
  const auto world = corpus::make_synthetic_world(a.topics, seed);
  std::filesystem::create_directories(a.out);
  const std::string dir = a.out + "/";
  std::vector<Json> docs, records, dialogues;
  for (const auto& t : world.topics) docs.push_back(knowledge::to_json(knowledge::Document{t.id, t.title, t.body, {}}));
  for (const auto& r : world.records) records.push_back(corpus::to_json(r));
  for (const auto& d : world.dialogues()) dialogues.push_back(corpus::to_json(d));
  std::string topics;
  for (const auto& p : world.probes) topics += p.context.back().text + "\n";
  write_jsonl(dir + "docs.jsonl", docs);
  write_jsonl(dir + "records.jsonl", records);
  write_jsonl(dir + "dialogues.jsonl", dialogues);
  write_text_file(dir + "knowledge_topics.txt", topics);
  out << "demo world: " << docs.size() << " documents, " << records.size() << " knowledge records in " << a.out
      << "\n";
  return {{},
          {dir + "docs.jsonl", dir + "records.jsonl", dir + "dialogues.jsonl", dir + "knowledge_topics.txt"},
          true,
          {}};
}

}  // namespace kdial::cli
