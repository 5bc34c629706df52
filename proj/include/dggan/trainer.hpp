#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dggan/checkpoint.hpp"
#include "dggan/dataset.hpp"
#include "dggan/networks.hpp"

namespace dggan {

/// Linear interpolation start -> end; step 0 gives start, step total_steps gives end.
double lr_schedule(int64_t step, int64_t total_steps, double start, double end);

/// Builds CFG, DGG, RN and DISC from the config with seed-derived initializations.
ModelSet build_models(const TrainConfig& config, Resolution resolution);

/// One row of the training log:
/// `step=<n> stage=<I|II> cf=<v> dg=<v> d_loss=<v> gp=<v> rn_adv=<v> lr=<v>`.
/// Terms that a stage does not compute print as `na`.
struct LogRow {
  int64_t step = 0;
  Stage stage = Stage::I;
  std::optional<double> cf, dg, d_loss, gp, rn_adv;
  double lr = 0.0;

  std::string format() const;
};

struct EpochSummary {
  int epoch = 0;
  double mean_cf = 0.0;
  double mean_dg = 0.0;
  double mean_d_loss = 0.0;
  double mean_rn_adv = 0.0;
  int64_t disc_updates = 0;
  int64_t gen_updates = 0;
};

enum class SubStep { stage1, disc, gen };

struct TrainHooks {
  /// Called around every optimizer update (before == true, then false) with
  /// the live networks of the run.
  std::function<void(SubStep, bool before, const ModelSet& models)> on_substep;
  /// Called with the state at the end of every epoch.
  std::function<void(const Checkpoint&)> on_epoch_end;
  /// Receives one formatted LogRow per step plus per-epoch summary lines.
  std::ostream* log = nullptr;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
  std::vector<EpochSummary> epochs;
};

/// Pixel-loss training of CFG and DGG with one Adam over both. `resume` must
/// be a stage-I checkpoint produced by an earlier call with the same config.
TrainResult train_stage1(const TrainConfig& config, std::span<const SampleWindow> train,
                         const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

/// Adversarial training of RN against DISC with CFG/DGG frozen from `stage1`.
TrainResult train_stage2(const TrainConfig& config, std::span<const SampleWindow> train,
                         const Checkpoint& stage1, const TrainHooks& hooks = {},
                         const Checkpoint* resume = nullptr);

/// CFGAN ablation: the stage-II loop with a freshly initialized CFG in the
/// generator slot (trainable, no guide, no RN).
TrainResult train_cfgan(const TrainConfig& config, std::span<const SampleWindow> train,
                        const TrainHooks& hooks = {});

}  // namespace dggan
