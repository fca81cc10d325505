#include "kdial/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include "kdial/common/error.hpp"
#include "kdial/common/log.hpp"
#include "kdial/model/checkpoint.hpp"
#include "kdial/model/transformer.hpp"

namespace kdial::training {

namespace {

constexpr const char* kMomentM = "adam_m.";
constexpr const char* kMomentV = "adam_v.";

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + epoch + 1);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

nlohmann::json state_json(const TrainerState& s) {
  return {{"step", s.step}, {"tokens_seen", s.tokens_seen}, {"epoch", s.epoch}, {"cursor", s.cursor},
          {"lineage", s.lineage}};
}

TrainerState state_from_json(const nlohmann::json& j) {
  TrainerState s;
  s.step = j.at("step").get<std::size_t>();
  s.tokens_seen = j.at("tokens_seen").get<std::uint64_t>();
  s.epoch = j.at("epoch").get<std::size_t>();
  s.cursor = j.at("cursor").get<std::size_t>();
  s.lineage = j.at("lineage").get<std::vector<std::string>>();
  return s;
}

}  // namespace

TrainingRun start_run(const PhaseConfig& phase, const model::ModelConfig& model_cfg,
                      const std::string& init_checkpoint, bool force) {
  phase.validate();
  TrainingRun run;
  run.phase = phase;
  if (init_checkpoint.empty()) {
    if (phase.phase == Phase::kStage2 && !force) {
      throw ValidationError(
          "stage2 continues from a trained checkpoint; refusing to start from random weights without --force");
    }
    run.model = model_cfg;
    run.params = model::init_parameters<float>(model_cfg, phase.seed);
  } else {
    auto loaded = model::load_model<float>(init_checkpoint);
    run.model = loaded.config;
    run.params = std::move(loaded.params);
    if (loaded.metadata.contains("state")) {
      run.state.lineage = loaded.metadata.at("state").at("lineage").get<std::vector<std::string>>();
    }
  }
  run.state.lineage.push_back(phase.name);
  return run;
}

void save_training_checkpoint(const std::string& path, const TrainingRun& run) {
  std::vector<std::pair<std::string, const numerics::Tensor<float>*>> aux;
  for (const auto& name : run.params.names()) {
    const auto m = run.optimizer.m.find(name);
    const auto v = run.optimizer.v.find(name);
    if (m == run.optimizer.m.end() || v == run.optimizer.v.end()) continue;
    aux.emplace_back(kMomentM + name, &m->second);
    aux.emplace_back(kMomentV + name, &v->second);
  }
  const nlohmann::json meta = {
      {"state", state_json(run.state)}, {"phase", to_json(run.phase)}, {"optimizer_step", run.optimizer.step}};
  const auto tmp = path + ".tmp";
  model::save_model<float>(tmp, run.model, run.params, meta, aux);
  std::filesystem::rename(tmp, path);
}

TrainingRun load_training_checkpoint(const std::string& path, const model::ModelConfig* expected) {
  auto loaded = model::load_model<float>(path, expected);
  TrainingRun run;
  run.model = loaded.config;
  run.params = std::move(loaded.params);
  try {
    run.state = state_from_json(loaded.metadata.at("state"));
    run.phase = phase_config_from_json(loaded.metadata.at("phase"));
    run.optimizer.step = loaded.metadata.at("optimizer_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": not a training checkpoint (" + e.what() + ")");
  }
  const std::string pm = kMomentM, pv = kMomentV;
  for (auto& [name, t] : loaded.aux) {
    if (name.rfind(pm, 0) == 0) {
      run.optimizer.m.emplace(name.substr(pm.size()), std::move(t));
    } else if (name.rfind(pv, 0) == 0) {
      run.optimizer.v.emplace(name.substr(pv.size()), std::move(t));
    }
  }
  for (const auto& [name, t] : run.optimizer.m) {
    if (!run.params.contains(name) || run.params.value(name).shape() != t.shape()) {
      throw ShapeError(path + ": optimizer moment '" + name + "' does not match the parameters");
    }
  }
  return run;
}

double batch_loss_and_gradients(TrainingRun& run, const std::vector<const model::Sequence*>& batch,
                                std::uint64_t dropout_seed) {
  run.params.zero_grad();
  std::vector<model::ShiftedTargets> targets;
  std::size_t total = 0;
  for (const auto* seq : batch) {
    targets.push_back(model::shift_targets(*seq));
    for (auto m : targets.back().mask) total += m != 0;
  }
  if (total == 0) throw ValidationError("batch has no trainable targets");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::size_t count = 0;
    for (auto m : targets[i].mask) count += m != 0;
    if (count == 0) continue;
    model::ForwardOptions<float> opts;
    opts.training = run.model.dropout > 0.0;
    opts.dropout_seed = dropout_seed * 7919 + i;
    auto pass = model::build_forward(run.params, run.model, *batch[i], opts);
    const auto node = pass.graph.cross_entropy(pass.logits, targets[i].targets, targets[i].mask);
    pass.graph.evaluate({});
    const double weight = static_cast<double>(count) / static_cast<double>(total);
    loss += weight * static_cast<double>(pass.graph.value(node).item());
    pass.graph.accumulate_gradients(node, static_cast<float>(weight));
  }
  return loss;
}

TrainResult train_phase(TrainingRun& run, const std::vector<model::Sequence>& data, const TrainOptions& options) {
  const PhaseConfig& cfg = run.phase;
  cfg.validate();
  if (data.empty()) throw ValidationError("phase '" + cfg.name + "': training data is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      model::validate_sequence(data[i], run.model);
    } catch (const ValidationError& e) {
      throw ValidationError("training sequence " + std::to_string(i) + ": " + e.what());
    }
    const auto mask = model::shift_targets(data[i]).mask;
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
      throw ValidationError("training sequence " + std::to_string(i) + " has no targets");
    }
  }
  const std::size_t total_steps = cfg.total_steps();
  const AdamWHyper hyper{cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  const bool resuming = run.state.step > 0;

  // Fallback for a diverged step when no checkpoint has been written yet.
  std::optional<TrainingRun> snapshot;
  bool have_file = false;
  if (!options.checkpoint_path.empty() && std::filesystem::exists(options.checkpoint_path) && resuming) {
    have_file = true;
  } else {
    snapshot = run;
  }

  TrainResult result;
  std::vector<LossRecord> pending;
  auto flush_csv = [&](bool append) {
    if (!options.loss_csv.empty()) write_loss_csv(options.loss_csv, pending, append);
    pending.clear();
  };
  bool csv_append = resuming;
  auto checkpoint = [&] {
    if (!options.checkpoint_path.empty()) {
      save_training_checkpoint(options.checkpoint_path, run);
      have_file = true;
      snapshot.reset();
    } else {
      snapshot = run;
    }
    flush_csv(csv_append);
    csv_append = true;
  };

  auto order = epoch_order(data.size(), cfg.seed, run.state.epoch);
  while (run.state.step < total_steps && (options.stop_after == 0 || run.state.step < options.stop_after)) {
    if (run.state.cursor >= data.size()) {
      run.state.epoch += 1;
      run.state.cursor = 0;
      order = epoch_order(data.size(), cfg.seed, run.state.epoch);
    }
    std::vector<const model::Sequence*> batch;
    std::uint64_t tokens = 0;
    while (run.state.cursor < data.size()) {
      const auto& seq = data[order[run.state.cursor]];
      if (!batch.empty() && tokens + seq.size() > cfg.batch_tokens) break;
      batch.push_back(&seq);
      tokens += seq.size();
      run.state.cursor += 1;
    }

    double loss = batch_loss_and_gradients(run, batch, cfg.seed * 1000003ULL + run.state.step);
    const double lr = lr_at(cfg, run.state.step + 1, total_steps);
    std::string failure;
    if (!std::isfinite(loss)) {
      failure = "non-finite loss at step " + std::to_string(run.state.step + 1);
    } else {
      clip_grad_norm(run.params, cfg.grad_clip);
      try {
        adamw_step(run.params, run.optimizer, lr, hyper);
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    if (!failure.empty()) {
      if (have_file) {
        run = load_training_checkpoint(options.checkpoint_path);
      } else {
        run = *snapshot;
      }
      result.aborted = true;
      result.message = failure + "; restored the last good checkpoint at step " + std::to_string(run.state.step);
      log::error(result.message);
      return result;
    }
    run.state.step += 1;
    run.state.tokens_seen += tokens;
    const LossRecord rec{run.state.step, run.state.tokens_seen, lr, loss};
    result.curve.push_back(rec);
    pending.push_back(rec);
    if (options.on_step) options.on_step(rec);
    if (cfg.checkpoint_every > 0 && run.state.step % cfg.checkpoint_every == 0) checkpoint();
  }
  checkpoint();
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve, bool append) {
  const bool header = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  if (header) out << "step,tokens_seen,lr,loss\n";
  out << std::setprecision(17);
  for (const auto& r : curve) out << r.step << ',' << r.tokens_seen << ',' << r.lr << ',' << r.loss << '\n';
}

std::vector<LossRecord> read_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "step,tokens_seen,lr,loss") throw FormatError(path + ": unexpected header '" + line + "'");
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRecord r;
    char c1, c2, c3;
    std::istringstream row(line);
    if (!(row >> r.step >> c1 >> r.tokens_seen >> c2 >> r.lr >> c3 >> r.loss)) {
      throw FormatError(path + ": bad row '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace kdial::training
