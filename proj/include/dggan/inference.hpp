#pragma once

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

#include "dggan/frame.hpp"
#include "dggan/networks.hpp"

namespace dggan {

enum class Variant { COPY, CFGAN, DGN, DGGAN };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& text);

struct Prediction {
  Frame coarse;         // G_c (undefined for COPY/DGN)
  torch::Tensor guide;  // G_d (undefined for COPY/CFGAN)
  Frame guided;         // 2 * G_d + I_T, clamped
  Frame refined;        // the variant's final prediction
  Variant variant = Variant::DGGAN;
};

/// clamp(2 * guide + last, -1, 1). Works on single frames or batches.
torch::Tensor fuse_guide(const torch::Tensor& guide, const torch::Tensor& last);
Frame fuse_guide(const torch::Tensor& guide, const Frame& last);

/// Full model: coarse and guide from the stacked inputs, guided fusion, refine.
/// Networks run in eval mode without gradient tracking.
Prediction predict_one(Generator cfg, Generator dgg, RefineNet rn, const std::vector<Frame>& inputs);

Prediction baseline_copy(const std::vector<Frame>& inputs);
Prediction baseline_cfgan(Generator cfg, const std::vector<Frame>& inputs);
Prediction baseline_dgn(Generator dgg, const std::vector<Frame>& inputs);

/// Batched final prediction for `variant` from (B, 3T, H, W) stacked inputs.
torch::Tensor predict_batch(Variant variant, const ModelSet& models, const torch::Tensor& stacked);

using FramePredictor = std::function<Frame(const std::vector<Frame>& window)>;

struct Rollout {
  std::vector<Frame> frames;
  int horizon = 0;
};

/// Autoregressive generation: predict, append, drop the oldest frame, repeat n times.
Rollout rollout(const FramePredictor& predictor, const std::vector<Frame>& inputs, int n);
Rollout rollout(Generator cfg, Generator dgg, RefineNet rn, const std::vector<Frame>& inputs, int n);

/// Batched rollout: `window` is (B, 3T, H, W); returns (B, n, 3, H, W).
torch::Tensor rollout_batch(Variant variant, const ModelSet& models, const torch::Tensor& window, int n);

/// Difference guide in (-1, 1) shown as an intensity in (0, 1).
torch::Tensor visualize_guide(const torch::Tensor& guide);

/// Side-by-side panel: inputs row, then ground truth | G_c | guided | G_r | (G_d+1)/2.
/// Returns a (3, rows*H + gutters, cols*W + gutters) tensor in [-1, 1].
torch::Tensor render_grid(const std::vector<Frame>& inputs, const Frame& truth,
                          const Prediction& prediction);
inline constexpr int64_t kGridGutter = 2;

}  // namespace dggan
