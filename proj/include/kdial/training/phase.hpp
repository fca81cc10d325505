#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kdial::training {

enum class Phase { kPretrain, kFinetune, kStage2 };

const char* phase_name(Phase p);
Phase parse_phase(const std::string& name);

struct PhaseConfig {
  std::string name = "pretrain";
  Phase phase = Phase::kPretrain;
  std::vector<std::string> datasets;  // sample JSON-lines files
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 50;
  std::uint64_t total_tokens = 2'000'000;
  std::uint64_t batch_tokens = 4096;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;            // global L2 norm; 0 disables
  std::size_t checkpoint_every = 0;  // steps; 0 = only at the end

  // Throws ValidationError.
  void validate() const;
  std::size_t total_steps() const { return static_cast<std::size_t>(total_tokens / batch_tokens); }

  // Small-model presets used by the CLI and tests.
  static PhaseConfig desk(Phase phase);
  // Published large-scale recipe; documentation constants, too big to run here.
  static PhaseConfig full_scale(Phase phase);
};

nlohmann::json to_json(const PhaseConfig& c);
PhaseConfig phase_config_from_json(const nlohmann::json& j);
PhaseConfig load_phase_config(const std::string& path);

/// Linear warmup to peak_lr at `warmup_steps`, then linear decay to 0 at
/// `total_steps`. Throws ValidationError when total_steps < warmup_steps or
/// step is outside [0, total_steps].
double lr_at(const PhaseConfig& cfg, std::size_t step, std::size_t total_steps);

}  // namespace kdial::training
