#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "kdial/common/error.hpp"
#include "kdial/common/log.hpp"
#include "manifest.hpp"

namespace kdial::cli {

namespace {

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::kDebug;
  if (s == "info") return log::Level::kInfo;
  if (s == "warning") return log::Level::kWarning;
  if (s == "error") return log::Level::kError;
  if (s == "silent") return log::Level::kSilent;
  throw ValidationError("unknown log level '" + s + "'");
}

void add_decode_options(CLI::App* cmd, DecodeArgs& d) {
  cmd->add_option("--strategy", d.strategy, "greedy or top-p")->capture_default_str();
  cmd->add_option("--top-p", d.top_p, "nucleus mass for top-p")->capture_default_str();
  cmd->add_option("--temperature", d.temperature)->capture_default_str();
  cmd->add_option("--max-new-tokens", d.max_new_tokens)->capture_default_str();
  cmd->add_option("--docs", d.top_k_docs, "retrieved documents per query")->capture_default_str();
  cmd->add_option("--knowledge-tokens", d.knowledge_tokens, "model tokens of retrieved text kept")
      ->capture_default_str();
  cmd->add_option("--max-context", d.max_context, "most recent turns shown to the model")->capture_default_str();
}

int replay(const std::string& manifest_path, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-grounded dialogue toolkit: corpus, tokenizer, training, retrieval, chat, evaluation."};
  app.name("kdial");
  app.require_subcommand(1);
  app.fallthrough();
  auto* config_opt = app.set_config("--config", "", "INI/TOML file with default flag values");
  config_opt->envname("KDIAL_CONFIG");

  std::uint64_t seed = 0;
  std::string manifest_path;
  std::string log_level = "info";
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();
  app.add_option("--manifest", manifest_path, "where to write the run manifest");
  app.add_option("--log-level", log_level, "debug, info, warning, error or silent")->capture_default_str();

  BuildCorpusArgs corpus_args;
  auto* c = app.add_subcommand("build-corpus", "raw threads and documents -> cleaned dialogue JSONL");
  c->add_option("--input", corpus_args.inputs, "raw JSONL ({\"kind\":\"thread\"|\"doc\",...})")->required();
  c->add_option("--out", corpus_args.out)->required();
  c->add_option("--stats", corpus_args.stats, "also write build statistics here");
  c->add_option("--utterance-cap", corpus_args.utterance_cap, "max words per document utterance")
      ->capture_default_str();
  c->add_option("--single-weight", corpus_args.single_weight)->capture_default_str();
  c->add_option("--multi-weight", corpus_args.multi_weight)->capture_default_str();

  TrainTokenizerArgs tok_args;
  auto* t = app.add_subcommand("train-tokenizer", "learn a byte-level BPE vocabulary");
  t->add_option("--corpus", tok_args.corpus, "dialogue/record/document JSONL or plain text")->required();
  t->add_option("--size", tok_args.size, "target vocabulary size")->capture_default_str();
  t->add_option("--out", tok_args.out)->required();

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "run one training phase");
  tr->add_option("--phase", train_args.phase, "pretrain, finetune or stage2")->required();
  tr->add_option("--data", train_args.data, "dialogue or knowledge-record JSONL")->required();
  tr->add_option("--vocab", train_args.vocab)->required();
  tr->add_option("--out", train_args.out, "checkpoint path")->required();
  tr->add_option("--init", train_args.init, "start from this model checkpoint");
  tr->add_option("--resume", train_args.resume, "continue an interrupted run of the same phase");
  tr->add_flag("--force", train_args.force, "allow stage2 from random weights");
  tr->add_option("--phase-config", train_args.phase_config, "phase hyperparameters (JSON)");
  tr->add_option("--model-config", train_args.model_config, "model shape (JSON)");
  tr->add_option("--loss-csv", train_args.loss_csv);
  tr->add_option("--max-context", train_args.max_context)->capture_default_str();
  tr->add_option("--stop-after", train_args.stop_after, "stop at this step (resume later)");
  tr->add_option("--max-steps", train_args.max_steps, "shorten the phase to at most this many steps");

  IndexArgs index_args;
  auto* ix = app.add_subcommand("index", "build a BM25 knowledge store");
  ix->add_option("--docs", index_args.docs, "document JSONL {id,title,body}")->required();
  ix->add_option("--vocab", index_args.vocab)->required();
  ix->add_option("--out", index_args.out)->required();

  SearchArgs search_args;
  auto* s = app.add_subcommand("search", "query a knowledge store");
  s->add_option("--index", search_args.index)->required();
  s->add_option("--vocab", search_args.vocab)->required();
  s->add_option("--query", search_args.query)->required();
  s->add_option("-k", search_args.k)->capture_default_str();

  ChatArgs chat_args;
  auto* ch = app.add_subcommand("chat", "interactive conversation with per-turn traces");
  ch->add_option("--model", chat_args.model)->required();
  ch->add_option("--vocab", chat_args.vocab)->required();
  ch->add_option("--index", chat_args.index, "knowledge store; omit to chat without search");
  ch->add_option("--transcript", chat_args.transcript, "write turn traces as JSONL");
  chat_args.decode.strategy = "top-p";
  add_decode_options(ch, chat_args.decode);

  SelfChatArgs self_args;
  auto* sc = app.add_subcommand("self-chat", "the model plays both speakers from each topic");
  sc->add_option("--model", self_args.model)->required();
  sc->add_option("--vocab", self_args.vocab)->required();
  sc->add_option("--index", self_args.index);
  sc->add_option("--topics", self_args.topics, "topic files, one opening utterance per line")->required();
  sc->add_option("--rounds", self_args.rounds)->capture_default_str();
  sc->add_option("--out", self_args.out)->required();
  sc->add_flag("--timing", self_args.timing, "record per-turn latency (output no longer reproducible)");
  add_decode_options(sc, self_args.decode);

  EvaluateArgs eval_args;
  auto* ev = app.add_subcommand("evaluate", "aggregate human annotations into a report");
  ev->add_option("--annotations", eval_args.annotations)->required();
  ev->add_option("--model", eval_args.model, "model to compare ...");
  ev->add_option("--baseline", eval_args.baseline, "... against this one");
  ev->add_flag("--zero-fill", eval_args.zero_fill, "score invalid records as 0 instead of dropping them");
  ev->add_option("--out", eval_args.out, "report JSON");
  ev->add_option("--table", eval_args.table, "report text table");
  ev->add_option("--csv", eval_args.csv, "report CSV");

  ReportArgs report_args;
  auto* rp = app.add_subcommand("report", "render a saved evaluation report");
  rp->add_option("--report", report_args.report)->required();
  rp->add_option("--format", report_args.format, "text or csv")->capture_default_str();
  rp->add_option("--model", report_args.model);
  rp->add_option("--baseline", report_args.baseline);

  MockArgs mock_args;
  auto* mk = app.add_subcommand("make-mock-annotations", "write a constructed annotation set");
  mk->add_option("--set", mock_args.set, "chitchat or knowledge")->required();
  mk->add_option("--out", mock_args.out)->required();

  DemoArgs demo_args;
  auto* dm = app.add_subcommand("make-demo", "write the synthetic fact world (documents, records, topics)");
  dm->add_option("--out", demo_args.out, "output directory")->required();
  dm->add_option("--topics", demo_args.topics)->capture_default_str();

  std::string replay_manifest;
  auto* rl = app.add_subcommand("replay", "re-run a manifest and compare output checksums");
  rl->add_option("--manifest", replay_manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "kdial: " << e.what() << "\n" << "run 'kdial --help' for usage\n";
    return 2;
  }

  const auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    log::set_level(parse_level(log_level));
    if (name == "replay") return replay(replay_manifest, in, out, err);

    const auto started = std::chrono::steady_clock::now();
    RunRecord record;
    std::string primary;
    if (name == "build-corpus") {
      record = build_corpus(corpus_args, seed, out);
    } else if (name == "train-tokenizer") {
      record = train_tokenizer(tok_args, out);
    } else if (name == "train") {
      record = train(train_args, seed, out);
    } else if (name == "index") {
      record = index(index_args, out);
    } else if (name == "search") {
      record = search(search_args, out);
    } else if (name == "chat") {
      record = chat(chat_args, seed, in, out);
    } else if (name == "self-chat") {
      record = self_chat(self_args, seed, out);
    } else if (name == "evaluate") {
      record = evaluate(eval_args, out);
    } else if (name == "report") {
      record = report(report_args, out);
    } else if (name == "make-mock-annotations") {
      record = make_mock(mock_args, out);
    } else if (name == "make-demo") {
      record = make_demo(demo_args, seed, out);
    }
    const std::string config = config_opt->count() > 0 || std::getenv("KDIAL_CONFIG") ? config_opt->as<std::string>() : "";
    if (!config.empty() && std::filesystem::is_regular_file(config)) record.inputs.push_back(config);

    std::string path = manifest_path;
    if (path.empty()) {
      path = record.outputs.empty() ? "kdial-" + name + ".manifest.json" : record.outputs.front() + ".manifest.json";
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(path, make_manifest(name, args, seed, record, elapsed));
    return 0;
  } catch (const std::exception& e) {
    err << "kdial " << name << ": " << e.what() << "\n";
    return 1;
  }
}

namespace {

int replay(const std::string& manifest_path, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto manifest = read_manifest(manifest_path);
  if (!manifest.value("deterministic", false)) {
    throw ValidationError(manifest_path + " records a run that is not reproducible");
  }
  const auto args = manifest.at("args").get<std::vector<std::string>>();
  const int rc = run_cli(args, in, out, err);
  if (rc != 0) return rc;
  bool same = true;
  for (const auto& o : manifest.at("outputs")) {
    const auto path = o.at("path").get<std::string>();
    const auto now = digest(path);
    const bool match = now.crc32 == o.at("crc32").get<std::string>();
    same = same && match;
    out << (match ? "identical " : "DIFFERENT ") << path << " (" << now.crc32 << ")\n";
  }
  return same ? 0 : 1;
}

}  // namespace

}  // namespace kdial::cli

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kdial::cli::run_cli(args, std::cin, std::cout, std::cerr);
}
