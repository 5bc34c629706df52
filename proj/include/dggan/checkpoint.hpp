#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "dggan/frame.hpp"
#include "dggan/networks.hpp"

namespace dggan {

enum class Stage { I, II };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& text);

struct LrRange {
  double start = 1e-3;
  double end = 1e-4;
};

struct TrainConfig {
  int history = 4;
  int batch_size = 8;
  LrRange stage1_lr{1e-3, 1e-4};
  LrRange stage2_lr{1e-4, 1e-5};
  int stage1_epochs = 30;
  int stage2_epochs = 60;
  double lambda = 10.0;
  int disc_steps_per_gen_step = 5;
  uint64_t seed = 0;
  std::pair<double, double> adam_betas{0.5, 0.9};
  int64_t base_width = 32;
  double leaky_slope = 0.2;
  // Optional L1 term on the generator output during adversarial training.
  bool aux_pixel_loss = false;
  double aux_pixel_weight = 1.0;
  bool deterministic = false;

  /// Throws ConfigError on an invalid field.
  void validate() const;

  /// The published budget: 100 stage-I and 200 stage-II epochs at width 32.
  static TrainConfig paper_preset();
};

/// Resumable training state. `variant` is "dggan" or "cfgan".
struct Checkpoint {
  Stage stage = Stage::I;
  std::string variant = "dggan";
  int epoch = 0;
  int64_t step = 0;
  TrainConfig config;
  Resolution resolution;
  ModelSet models;
  std::string generator_optimizer;  // serialized Adam state
  std::string critic_optimizer;
  std::string rng_state;
};

/// Writes `dir` atomically (temp directory, then rename).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Standard checkpoint directory name, e.g. ckpt_stageI_30.
std::string checkpoint_dir_name(Stage stage, int epoch);

/// Serialized bytes of a module's parameters and buffers.
std::string module_bytes(const torch::nn::Module& module);

}  // namespace dggan
