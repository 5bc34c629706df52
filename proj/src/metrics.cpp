#include "dggan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "dggan/errors.hpp"

namespace dggan {

namespace {

torch::Tensor as_unit_double(const torch::Tensor& t) {
  require(t.dim() == 3, "metrics: expected (C, H, W) image");
  return t.to(torch::kFloat64).contiguous();
}

torch::Tensor to_unit(const Frame& f) { return (f.pixels().to(torch::kFloat64) + 1.0) * 0.5; }

std::vector<double> gaussian_1d(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-((i - center) * (i - center)) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of an H x W plane.
std::vector<double> filter_valid(const double* src, int64_t H, int64_t W, const std::vector<double>& k) {
  const auto n = static_cast<int64_t>(k.size());
  const int64_t OW = W - n + 1, OH = H - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(H * OW));
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[i] * src[y * W + x + i];
      rows[y * OW + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(OH * OW));
  for (int64_t y = 0; y < OH; ++y) {
    for (int64_t x = 0; x < OW; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[i] * rows[(y + i) * OW + x];
      out[y * OW + x] = acc;
    }
  }
  return out;
}

double ssim_formula(double mu_a, double mu_b, double var_a, double var_b, double cov, double c1,
                    double c2) {
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double ssim_plane_global(const double* a, const double* b, int64_t n, double c1, double c2) {
  double ma = 0, mb = 0;
  for (int64_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cov = 0;
  for (int64_t i = 0; i < n; ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cov += (a[i] - ma) * (b[i] - mb);
  }
  return ssim_formula(ma, mb, va / n, vb / n, cov / n, c1, c2);
}

}  // namespace

torch::Tensor gaussian_window(int size, double sigma) {
  const auto g = gaussian_1d(size, sigma);
  auto t = torch::tensor(g, torch::kFloat64);
  return torch::outer(t, t);
}

double mse_unit(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.sizes() == b.sizes(), "mse: shape mismatch");
  return (as_unit_double(a) - as_unit_double(b)).pow(2).mean().item<double>();
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr_unit(const torch::Tensor& a, const torch::Tensor& b) { return psnr_from_mse(mse_unit(a, b)); }

double ssim_unit(const torch::Tensor& a, const torch::Tensor& b, const SsimParams& params) {
  require(a.sizes() == b.sizes(), "ssim: shape mismatch");
  const auto A = as_unit_double(a), B = as_unit_double(b);
  const int64_t C = A.size(0), H = A.size(1), W = A.size(2);
  const double c1 = params.k1 * params.k1, c2 = params.k2 * params.k2;
  const double* pa = A.data_ptr<double>();
  const double* pb = B.data_ptr<double>();

  double total = 0.0;
  if (H < params.window || W < params.window) {
    static bool noted = false;
    if (!noted) {
      std::cerr << "note: image " << H << "x" << W << " is smaller than the " << params.window
                << "x" << params.window << " SSIM window; using one global window\n";
      noted = true;
    }
    for (int64_t c = 0; c < C; ++c) total += ssim_plane_global(pa + c * H * W, pb + c * H * W, H * W, c1, c2);
    return total / static_cast<double>(C);
  }

  const auto k = gaussian_1d(params.window, params.sigma);
  std::vector<double> aa(static_cast<std::size_t>(H * W)), bb(aa.size()), ab(aa.size());
  for (int64_t c = 0; c < C; ++c) {
    const double* x = pa + c * H * W;
    const double* y = pb + c * H * W;
    for (int64_t i = 0; i < H * W; ++i) {
      aa[i] = x[i] * x[i];
      bb[i] = y[i] * y[i];
      ab[i] = x[i] * y[i];
    }
    const auto mu_a = filter_valid(x, H, W, k);
    const auto mu_b = filter_valid(y, H, W, k);
    const auto e_aa = filter_valid(aa.data(), H, W, k);
    const auto e_bb = filter_valid(bb.data(), H, W, k);
    const auto e_ab = filter_valid(ab.data(), H, W, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      sum += ssim_formula(ma, mb, e_aa[i] - ma * ma, e_bb[i] - mb * mb, e_ab[i] - ma * mb, c1, c2);
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(C);
}

double mse(const Frame& a, const Frame& b) { return mse_unit(to_unit(a), to_unit(b)); }
double psnr(const Frame& a, const Frame& b) { return psnr_unit(to_unit(a), to_unit(b)); }
double ssim(const Frame& a, const Frame& b, const SsimParams& params) {
  return ssim_unit(to_unit(a), to_unit(b), params);
}

const AggregateRow* MetricsReport::find(Variant variant, int horizon) const {
  for (const auto& row : aggregates) {
    if (row.variant == variant && row.horizon == horizon) return &row;
  }
  return nullptr;
}

void aggregate(MetricsReport& report) {
  report.aggregates.clear();
  for (const auto& row : report.per_frame) {
    AggregateRow* agg = nullptr;
    for (auto& a : report.aggregates) {
      if (a.variant == row.variant && a.horizon == row.horizon) agg = &a;
    }
    if (!agg) {
      report.aggregates.push_back({row.variant, row.horizon});
      agg = &report.aggregates.back();
    }
    ++agg->count;
    agg->ssim += row.ssim;
    agg->mse += row.mse;
    if (std::isfinite(row.psnr)) {
      agg->psnr += row.psnr;
    } else {
      ++agg->psnr_infinite;
    }
  }
  for (auto& a : report.aggregates) {
    a.ssim /= static_cast<double>(a.count);
    a.mse /= static_cast<double>(a.count);
    const auto finite = a.count - a.psnr_infinite;
    a.psnr = finite > 0 ? a.psnr / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
  }
}

MetricsReport evaluate(std::span<const EvalItem> items, const SsimParams& params) {
  MetricsReport report;
  report.ssim_params = params;
  for (const auto& item : items) {
    require(item.prediction.defined(), "evaluate: missing prediction");
    require(item.truth.defined(), "evaluate: missing ground truth");
    const auto p = to_unit(item.prediction), t = to_unit(item.truth);
    const double m = mse_unit(p, t);
    report.per_frame.push_back({item.variant, item.horizon, ssim_unit(p, t, params), psnr_from_mse(m), m});
  }
  aggregate(report);
  return report;
}

void append_rows(MetricsReport& report, Variant variant, int horizon, const torch::Tensor& predictions,
                 const torch::Tensor& truths) {
  require(predictions.sizes() == truths.sizes() && predictions.dim() == 4,
          "append_rows: expected matching (N, 3, H, W) tensors");
  for (int64_t i = 0; i < predictions.size(0); ++i) {
    const auto p = (predictions[i].to(torch::kFloat64) + 1.0) * 0.5;
    const auto t = (truths[i].to(torch::kFloat64) + 1.0) * 0.5;
    const double m = mse_unit(p, t);
    report.per_frame.push_back({variant, horizon, ssim_unit(p, t, report.ssim_params), psnr_from_mse(m), m});
  }
}

EvalWindowSet eval_windows(std::span<const Video> videos, int history, int stride, int max_horizon) {
  require(history >= 1 && stride >= 1 && max_horizon >= 1, "eval_windows: invalid arguments");
  std::vector<torch::Tensor> inputs, future;
  const auto span = static_cast<std::size_t>(history + max_horizon);
  for (const auto& video : videos) {
    for (std::size_t start = 0; start + span <= video.size(); start += static_cast<std::size_t>(stride)) {
      std::vector<Frame> in(video.begin() + static_cast<std::ptrdiff_t>(start),
                            video.begin() + static_cast<std::ptrdiff_t>(start + history));
      inputs.push_back(stack_channels(in));
      std::vector<torch::Tensor> fut;
      for (int h = 0; h < max_horizon; ++h) fut.push_back(video[start + history + h].pixels());
      future.push_back(torch::stack(fut));
    }
  }
  if (inputs.empty()) return {};
  return {torch::stack(inputs), torch::stack(future)};
}

MetricsReport evaluate_variants(const EvalWindowSet& windows, std::span<const int> horizons,
                                std::span<const VariantModels> variants, const SsimParams& params) {
  require(windows.inputs.defined() && windows.inputs.size(0) > 0, "evaluate_variants: no windows");
  require(!horizons.empty(), "evaluate_variants: no horizons");
  int max_h = 0;
  for (const int h : horizons) {
    require(h >= 1, "evaluate_variants: horizons must be >= 1");
    max_h = std::max(max_h, h);
  }
  require(windows.future.size(1) >= max_h, "evaluate_variants: ground truth shorter than horizon");
  MetricsReport report;
  report.ssim_params = params;
  static const ModelSet kNone;
  for (const auto& v : variants) {
    const ModelSet& models = v.models ? *v.models : kNone;
    std::vector<torch::Tensor> chunks;
    for (int64_t i = 0; i < windows.inputs.size(0); i += 256) {
      const auto in = windows.inputs.slice(0, i, std::min<int64_t>(i + 256, windows.inputs.size(0)));
      chunks.push_back(rollout_batch(v.variant, models, in, max_h));
    }
    const auto predicted = torch::cat(chunks);
    for (const int h : horizons) {
      append_rows(report, v.variant, h, predicted.select(1, h - 1), windows.future.select(1, h - 1));
    }
  }
  aggregate(report);
  return report;
}

namespace {

std::string num(double v, const char* format = "%.6f") {
  if (std::isinf(v)) return "inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

}  // namespace

void write_report(const MetricsReport& report, std::ostream& out) {
  const auto& p = report.ssim_params;
  out << "# ssim_window=" << p.window << " ssim_sigma=" << p.sigma << " ssim_k1=" << p.k1
      << " ssim_k2=" << p.k2 << " range=0..1 mse_unit=1e-3\n";
  for (const auto& a : report.aggregates) {
    out << "variant=" << to_string(a.variant) << " horizon=" << a.horizon << " count=" << a.count
        << " ssim=" << num(a.ssim) << " psnr=" << num(a.psnr, "%.4f")
        << " psnr_infinite=" << a.psnr_infinite << " mse_e3=" << num(a.mse * 1e3, "%.4f") << "\n";
  }
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %7s %8s %9s %12s\n", "Model", "Horizon", "SSIM", "PSNR",
                "MSE(x1e-3)");
  out << line;
  for (const auto& a : report.aggregates) {
    std::snprintf(line, sizeof(line), "%-8s %7d %8s %9s %12s\n", to_string(a.variant).c_str(),
                  a.horizon, num(a.ssim, "%.4f").c_str(), num(a.psnr, "%.2f").c_str(),
                  num(a.mse * 1e3, "%.3f").c_str());
    out << line;
  }
  return out.str();
}

}  // namespace dggan
