#include "kdial/training/phase.hpp"

#include <cmath>

#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"

namespace kdial::training {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kFinetune: return "finetune";
    case Phase::kStage2: return "stage2";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  if (name == "pretrain") return Phase::kPretrain;
  if (name == "finetune") return Phase::kFinetune;
  if (name == "stage2") return Phase::kStage2;
  throw ValidationError("unknown phase '" + name + "' (expected pretrain, finetune or stage2)");
}

void PhaseConfig::validate() const {
  auto fail = [&](const std::string& m) { throw ValidationError("phase '" + name + "': " + m); };
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) fail("peak_lr must be positive");
  if (warmup_steps < 1) fail("warmup_steps must be at least 1");
  if (batch_tokens == 0) fail("batch_tokens must be positive");
  if (batch_tokens > total_tokens) fail("batch_tokens exceeds total_tokens");
  if (total_steps() < warmup_steps) {
    fail("total steps " + std::to_string(total_steps()) + " is below warmup_steps " + std::to_string(warmup_steps));
  }
  if (weight_decay < 0.0) fail("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be positive");
  if (grad_clip < 0.0) fail("grad_clip must be non-negative");
}

PhaseConfig PhaseConfig::desk(Phase phase) {
  PhaseConfig c;
  c.name = phase_name(phase);
  c.phase = phase;
  if (phase == Phase::kPretrain) {
    c.peak_lr = 1e-3;
    c.warmup_steps = 50;
    c.total_tokens = 2'000'000;
    c.batch_tokens = 4096;
  } else {
    c.peak_lr = 5e-4;
    c.warmup_steps = 20;
    c.total_tokens = 400'000;
    c.batch_tokens = 2048;
  }
  return c;
}

PhaseConfig PhaseConfig::full_scale(Phase phase) {
  PhaseConfig c;
  c.name = phase_name(phase);
  c.phase = phase;
  c.peak_lr = 1e-5;
  c.weight_decay = 0.01;
  if (phase == Phase::kPretrain) {
    c.warmup_steps = 1000;
    c.total_tokens = 200'000'000'000ULL;
    c.batch_tokens = 2'000'000;
  } else {
    c.warmup_steps = 400;
    c.total_tokens = 200'000'000ULL;
    c.batch_tokens = 32768;
  }
  return c;
}

nlohmann::json to_json(const PhaseConfig& c) {
  return {{"name", c.name},
          {"phase", phase_name(c.phase)},
          {"datasets", c.datasets},
          {"peak_lr", c.peak_lr},
          {"warmup_steps", c.warmup_steps},
          {"total_tokens", c.total_tokens},
          {"batch_tokens", c.batch_tokens},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"grad_clip", c.grad_clip},
          {"checkpoint_every", c.checkpoint_every}};
}

PhaseConfig phase_config_from_json(const nlohmann::json& j) {
  try {
    const Phase phase = parse_phase(j.value("phase", "pretrain"));
    PhaseConfig c = PhaseConfig::desk(phase);
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "phase" || k == "model") continue;
      if (k == "name") c.name = v.get<std::string>();
      else if (k == "datasets") c.datasets = v.get<std::vector<std::string>>();
      else if (k == "peak_lr") c.peak_lr = v.get<double>();
      else if (k == "warmup_steps") c.warmup_steps = v.get<std::size_t>();
      else if (k == "total_tokens") c.total_tokens = v.get<std::uint64_t>();
      else if (k == "batch_tokens") c.batch_tokens = v.get<std::uint64_t>();
      else if (k == "weight_decay") c.weight_decay = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "beta1") c.beta1 = v.get<double>();
      else if (k == "beta2") c.beta2 = v.get<double>();
      else if (k == "eps") c.eps = v.get<double>();
      else if (k == "grad_clip") c.grad_clip = v.get<double>();
      else if (k == "checkpoint_every") c.checkpoint_every = v.get<std::size_t>();
      else throw ValidationError("phase config: unknown field '" + k + "'");
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("phase config: ") + e.what());
  }
}

PhaseConfig load_phase_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return phase_config_from_json(j);
}

double lr_at(const PhaseConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (total_steps < cfg.warmup_steps) {
    throw ValidationError("total_steps " + std::to_string(total_steps) + " is below warmup_steps " +
                          std::to_string(cfg.warmup_steps));
  }
  if (step > total_steps) {
    throw ValidationError("step " + std::to_string(step) + " is past total_steps " + std::to_string(total_steps));
  }
  const double s = static_cast<double>(step);
  if (step < cfg.warmup_steps) return cfg.peak_lr * s / static_cast<double>(cfg.warmup_steps);
  if (total_steps == cfg.warmup_steps) return cfg.peak_lr;
  return cfg.peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - cfg.warmup_steps);
}

}  // namespace kdial::training
