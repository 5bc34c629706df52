#include "dggan/inference.hpp"

#include "dggan/errors.hpp"

namespace dggan {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::COPY: return "COPY";
    case Variant::CFGAN: return "CFGAN";
    case Variant::DGN: return "DGN";
    case Variant::DGGAN: return "DGGAN";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string upper = text;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (upper == "COPY") return Variant::COPY;
  if (upper == "CFGAN") return Variant::CFGAN;
  if (upper == "DGN") return Variant::DGN;
  if (upper == "DGGAN") return Variant::DGGAN;
  throw ConfigError("unknown variant '" + text + "' (expected copy, cfgan, dgn or dggan)");
}

torch::Tensor fuse_guide(const torch::Tensor& guide, const torch::Tensor& last) {
  require(guide.sizes() == last.sizes(), "fuse_guide: shape mismatch");
  return torch::clamp(guide * 2.0 + last, -1.0, 1.0);
}

Frame fuse_guide(const torch::Tensor& guide, const Frame& last) {
  return Frame(fuse_guide(guide, last.pixels()));
}

namespace {

// Runs a network on one stacked example in eval mode, restoring its mode.
template <typename Net>
torch::Tensor run_single(Net& net, const torch::Tensor& chw) {
  const bool was_training = net->is_training();
  net->eval();
  torch::Tensor out;
  {
    torch::NoGradGuard no_grad;
    out = net->forward(chw.unsqueeze(0)).squeeze(0);
  }
  if (was_training) net->train();
  return out;
}

template <typename Net>
torch::Tensor run_batch(Net net, const torch::Tensor& batch) {
  const bool was_training = net->is_training();
  net->eval();
  torch::Tensor out;
  {
    torch::NoGradGuard no_grad;
    out = net->forward(batch);
  }
  if (was_training) net->train();
  return out;
}

void require_history(const std::vector<Frame>& inputs, int64_t in_channels) {
  require(!inputs.empty(), "prediction: no input frames");
  require(static_cast<int64_t>(inputs.size()) * 3 == in_channels,
          "prediction: number of input frames does not match the network spec");
}

}  // namespace

Prediction predict_one(Generator cfg, Generator dgg, RefineNet rn, const std::vector<Frame>& inputs) {
  require(cfg && dgg && rn, "predict_one: missing network");
  require_history(inputs, cfg->spec().in_channels);
  const auto stacked = stack_channels(inputs);
  Prediction p;
  p.variant = Variant::DGGAN;
  p.coarse = Frame(run_single(cfg, stacked));
  p.guide = run_single(dgg, stacked);
  p.guided = fuse_guide(p.guide, inputs.back());
  p.refined = Frame(run_single(rn, torch::cat({p.coarse.pixels(), p.guided.pixels()}, 0)));
  return p;
}

Prediction baseline_copy(const std::vector<Frame>& inputs) {
  require(!inputs.empty(), "baseline_copy: no input frames");
  Prediction p;
  p.variant = Variant::COPY;
  p.guided = inputs.back();
  p.refined = inputs.back();
  return p;
}

Prediction baseline_cfgan(Generator cfg, const std::vector<Frame>& inputs) {
  require(static_cast<bool>(cfg), "baseline_cfgan: missing CFG");
  require_history(inputs, cfg->spec().in_channels);
  Prediction p;
  p.variant = Variant::CFGAN;
  p.coarse = Frame(run_single(cfg, stack_channels(inputs)));
  p.refined = p.coarse;
  return p;
}

Prediction baseline_dgn(Generator dgg, const std::vector<Frame>& inputs) {
  require(static_cast<bool>(dgg), "baseline_dgn: missing DGG");
  require_history(inputs, dgg->spec().in_channels);
  Prediction p;
  p.variant = Variant::DGN;
  p.guide = run_single(dgg, stack_channels(inputs));
  p.guided = fuse_guide(p.guide, inputs.back());
  p.refined = p.guided;
  return p;
}

torch::Tensor predict_batch(Variant variant, const ModelSet& models, const torch::Tensor& stacked) {
  require(stacked.dim() == 4 && stacked.size(1) % 3 == 0, "predict_batch: expected (B, 3T, H, W)");
  const int64_t c = stacked.size(1);
  auto last = stacked.slice(1, c - 3, c);
  switch (variant) {
    case Variant::COPY:
      return last.clone();
    case Variant::CFGAN:
      require(static_cast<bool>(models.cfg), "predict_batch: CFGAN needs a CFG");
      return run_batch(models.cfg, stacked);
    case Variant::DGN:
      require(static_cast<bool>(models.dgg), "predict_batch: DGN needs a DGG");
      return fuse_guide(run_batch(models.dgg, stacked), last);
    case Variant::DGGAN: {
      require(models.cfg && models.dgg && models.rn, "predict_batch: DGGAN needs CFG, DGG and RN");
      auto coarse = run_batch(models.cfg, stacked);
      auto guided = fuse_guide(run_batch(models.dgg, stacked), last);
      return run_batch(models.rn, torch::cat({coarse, guided}, 1));
    }
  }
  throw ContractViolation("predict_batch: unknown variant");
}

Rollout rollout(const FramePredictor& predictor, const std::vector<Frame>& inputs, int n) {
  require(n >= 1, "rollout: n must be >= 1");
  require(!inputs.empty(), "rollout: no input frames");
  Rollout r;
  r.horizon = n;
  std::vector<Frame> window = inputs;
  for (int k = 0; k < n; ++k) {
    Frame next = predictor(window);
    r.frames.push_back(next);
    window.erase(window.begin());
    window.push_back(std::move(next));
  }
  return r;
}

Rollout rollout(Generator cfg, Generator dgg, RefineNet rn, const std::vector<Frame>& inputs, int n) {
  return rollout(
      [&](const std::vector<Frame>& window) { return predict_one(cfg, dgg, rn, window).refined; },
      inputs, n);
}

torch::Tensor rollout_batch(Variant variant, const ModelSet& models, const torch::Tensor& window, int n) {
  require(n >= 1, "rollout_batch: n must be >= 1");
  torch::Tensor current = window;
  std::vector<torch::Tensor> frames;
  for (int k = 0; k < n; ++k) {
    auto next = predict_batch(variant, models, current);
    frames.push_back(next);
    current = torch::cat({current.slice(1, 3, current.size(1)), next}, 1);
  }
  return torch::stack(frames, 1);
}

torch::Tensor visualize_guide(const torch::Tensor& guide) { return (guide + 1.0) / 2.0; }

torch::Tensor render_grid(const std::vector<Frame>& inputs, const Frame& truth,
                          const Prediction& prediction) {
  require(!inputs.empty(), "render_grid: no inputs");
  const int64_t H = truth.height(), W = truth.width();
  const int64_t panels = 5;
  const int64_t cols = std::max<int64_t>(static_cast<int64_t>(inputs.size()), panels);
  const int64_t rows = 2;
  const int64_t g = kGridGutter;
  auto canvas = torch::full({3, rows * H + (rows + 1) * g, cols * W + (cols + 1) * g}, 1.0f);

  auto place = [&](int64_t row, int64_t col, const torch::Tensor& img) {
    const int64_t y = g + row * (H + g), x = g + col * (W + g);
    canvas.slice(1, y, y + H).slice(2, x, x + W).copy_(img.to(torch::kFloat32));
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) place(0, static_cast<int64_t>(i), inputs[i].pixels());

  auto black = torch::full({3, H, W}, -1.0f);
  const auto& coarse = prediction.coarse.defined() ? prediction.coarse.pixels() : black;
  const auto& guided = prediction.guided.defined() ? prediction.guided.pixels() : black;
  const auto& refined = prediction.refined.defined() ? prediction.refined.pixels() : black;
  // the canvas is in [-1, 1]; map the [0, 1] visualization back
  auto guide_vis = prediction.guide.defined() ? visualize_guide(prediction.guide) * 2.0 - 1.0 : black;
  place(1, 0, truth.pixels());
  place(1, 1, coarse);
  place(1, 2, guided);
  place(1, 3, refined);
  place(1, 4, guide_vis);
  return canvas;
}

}  // namespace dggan
