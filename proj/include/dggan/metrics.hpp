#pragma once

#include <torch/torch.h>

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dggan/frame.hpp"
#include "dggan/inference.hpp"

namespace dggan {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// The *_unit functions take (C, H, W) images already in [0, 1]; the Frame
// overloads map [-1, 1] to [0, 1] first.
double mse_unit(const torch::Tensor& a, const torch::Tensor& b);
/// 10 log10(1 / mse); +infinity for identical images.
double psnr_from_mse(double mse);
double psnr_unit(const torch::Tensor& a, const torch::Tensor& b);
/// Gaussian-window SSIM per channel over all valid window positions,
/// averaged over positions and channels. Images smaller than the window use
/// one global window.
double ssim_unit(const torch::Tensor& a, const torch::Tensor& b, const SsimParams& params = {});

double mse(const Frame& a, const Frame& b);
double psnr(const Frame& a, const Frame& b);
double ssim(const Frame& a, const Frame& b, const SsimParams& params = {});

/// Normalized 2-D Gaussian kernel (size x size), as double.
torch::Tensor gaussian_window(int size, double sigma);

struct EvalItem {
  Variant variant = Variant::DGGAN;
  int horizon = 1;
  Frame prediction;
  Frame truth;
};

struct MetricRow {
  Variant variant = Variant::DGGAN;
  int horizon = 1;
  double ssim = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
};

struct AggregateRow {
  Variant variant = Variant::DGGAN;
  int horizon = 1;
  std::size_t count = 0;
  double ssim = 0.0;
  double psnr = 0.0;  // mean over finite rows
  std::size_t psnr_infinite = 0;
  double mse = 0.0;
};

struct MetricsReport {
  std::vector<MetricRow> per_frame;
  std::vector<AggregateRow> aggregates;
  SsimParams ssim_params;

  const AggregateRow* find(Variant variant, int horizon) const;
};

MetricsReport evaluate(std::span<const EvalItem> items, const SsimParams& params = {});
/// Per-frame rows from batched (N, 3, H, W) predictions and truths.
void append_rows(MetricsReport& report, Variant variant, int horizon,
                 const torch::Tensor& predictions, const torch::Tensor& truths);
/// Recomputes the aggregates from per_frame, grouped in first-seen order.
void aggregate(MetricsReport& report);

/// Evaluation windows of a video: inputs at start, start + stride, ...,
/// keeping only windows with `max_horizon` future frames available.
struct EvalWindowSet {
  torch::Tensor inputs;  // (N, 3T, H, W)
  torch::Tensor future;  // (N, max_horizon, 3, H, W)
};
EvalWindowSet eval_windows(std::span<const Video> videos, int history, int stride, int max_horizon);

struct VariantModels {
  Variant variant = Variant::COPY;
  const ModelSet* models = nullptr;  // unused for COPY
};

/// Rolls every variant out to the largest horizon and scores each requested
/// horizon against the ground truth.
MetricsReport evaluate_variants(const EvalWindowSet& windows, std::span<const int> horizons,
                                std::span<const VariantModels> variants, const SsimParams& params = {});

/// One `name=value` line per (variant, horizon); MSE in units of 1e-3.
void write_report(const MetricsReport& report, std::ostream& out);
std::string format_table(const MetricsReport& report);

}  // namespace dggan
