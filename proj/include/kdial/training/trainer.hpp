#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kdial/model/config.hpp"
#include "kdial/model/sequence.hpp"
#include "kdial/numerics/graph.hpp"
#include "kdial/training/optimizer.hpp"
#include "kdial/training/phase.hpp"

namespace kdial::training {

struct LossRecord {
  std::size_t step = 0;
  std::uint64_t tokens_seen = 0;
  double lr = 0.0;
  double loss = 0.0;
};

// Progress counters; with the weights and moments this is everything a
// resumed run needs to continue exactly where it stopped.
struct TrainerState {
  std::size_t step = 0;
  std::uint64_t tokens_seen = 0;
  std::size_t epoch = 0;
  std::size_t cursor = 0;            // position in the epoch's shuffled order
  std::vector<std::string> lineage;  // phases completed or started, oldest first
};

struct TrainingRun {
  model::ModelConfig model;
  numerics::ParameterSet<float> params;
  OptimizerState<float> optimizer;
  TrainerState state;
  PhaseConfig phase;
};

/// Starts a phase. With `init_checkpoint` the weights come from that file and
/// the optimizer and counters start fresh; otherwise weights are random,
/// which stage2 refuses unless `force` is set.
TrainingRun start_run(const PhaseConfig& phase, const model::ModelConfig& model_cfg,
                      const std::string& init_checkpoint, bool force);

void save_training_checkpoint(const std::string& path, const TrainingRun& run);
// Restores weights, moments, counters and the phase config.
TrainingRun load_training_checkpoint(const std::string& path, const model::ModelConfig* expected = nullptr);

struct TrainOptions {
  std::string checkpoint_path;  // written every checkpoint_every steps and at the end; empty disables
  std::string loss_csv;         // step,tokens_seen,lr,loss; appended when resuming
  std::size_t stop_after = 0;   // stop once state.step reaches this (0: run to total_steps)
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  std::vector<LossRecord> curve;
  bool aborted = false;  // non-finite loss; `run` holds the last good checkpoint
  std::string message;
};

/// Packs whole sequences greedily into batches of at most batch_tokens
/// (each batch holds at least one sequence), visiting the data in a seeded
/// per-epoch shuffle. The step loss is the masked NLL averaged over every
/// target token in the batch.
TrainResult train_phase(TrainingRun& run, const std::vector<model::Sequence>& data, const TrainOptions& options = {});

// Masked NLL of one batch, token-weighted, with gradients left in run.params.
double batch_loss_and_gradients(TrainingRun& run, const std::vector<const model::Sequence*>& batch,
                                std::uint64_t dropout_seed);

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve, bool append);
std::vector<LossRecord> read_loss_csv(const std::string& path);

}  // namespace kdial::training
