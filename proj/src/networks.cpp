#include "dggan/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "dggan/errors.hpp"

namespace dggan {

namespace nn = torch::nn;

std::string to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::CFG: return "CFG";
    case NetworkKind::DGG: return "DGG";
    case NetworkKind::RN: return "RN";
    case NetworkKind::DISC: return "DISC";
  }
  return "?";
}

void NetworkSpec::validate() const {
  const int64_t H = input_resolution.height, W = input_resolution.width;
  const int64_t divisor = kind == NetworkKind::DISC ? 32 : 8;
  if (H <= 0 || W <= 0 || H % divisor != 0 || W % divisor != 0) {
    throw ConfigError(to_string(kind) + ": input resolution " + std::to_string(H) + "x" +
                      std::to_string(W) + " must be divisible by " + std::to_string(divisor));
  }
  if (base_width < 1) throw ConfigError(to_string(kind) + ": base_width must be >= 1");
  if (leaky_slope < 0.0) throw ConfigError(to_string(kind) + ": leaky_slope must be >= 0");
  switch (kind) {
    case NetworkKind::CFG:
    case NetworkKind::DGG:
      if (in_channels < 3 || in_channels % 3 != 0) {
        throw ConfigError(to_string(kind) + ": in_channels must be 3*T");
      }
      break;
    case NetworkKind::RN:
    case NetworkKind::DISC:
      if (in_channels != 6) throw ConfigError(to_string(kind) + ": in_channels must be 6");
      break;
  }
}

NetworkSpec generator_spec(NetworkKind kind, int history, int64_t base_width, Resolution resolution,
                           double leaky_slope) {
  return {kind, 3 * static_cast<int64_t>(history), base_width, resolution, leaky_slope};
}

NetworkSpec refine_spec(int64_t base_width, Resolution resolution, double leaky_slope) {
  return {NetworkKind::RN, 6, base_width, resolution, leaky_slope};
}

NetworkSpec critic_spec(int64_t base_width, Resolution resolution, double leaky_slope) {
  return {NetworkKind::DISC, 6, base_width, resolution, leaky_slope};
}

namespace {

nn::Conv2d down(int64_t in, int64_t out) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
}

nn::ConvTranspose2d up(int64_t in, int64_t out) {
  return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1));
}

nn::LeakyReLU leaky(double slope) { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(slope)); }

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
  nn::Sequential body;
  for (int i = 0; i < 3; ++i) {
    body->push_back(nn::Conv2d(nn::Conv2dOptions(channels, channels, 1).stride(1)));
    body->push_back(nn::BatchNorm2d(channels));
    body->push_back(nn::ReLU());
  }
  body_ = register_module("body", body);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return body_->forward(x) + x; }

GeneratorImpl::GeneratorImpl(const NetworkSpec& spec) : spec_(spec) {
  require(spec.kind == NetworkKind::CFG || spec.kind == NetworkKind::DGG,
          "generator: spec kind must be CFG or DGG");
  spec.validate();
  const int64_t b = spec.base_width;
  const double slope = spec.leaky_slope;

  nn::Sequential enc;
  enc->push_back(down(spec.in_channels, b));
  enc->push_back(nn::BatchNorm2d(b));
  enc->push_back(leaky(slope));
  enc->push_back(down(b, 2 * b));
  enc->push_back(nn::BatchNorm2d(2 * b));
  enc->push_back(leaky(slope));
  enc->push_back(down(2 * b, 4 * b));
  enc->push_back(nn::BatchNorm2d(4 * b));
  enc->push_back(leaky(slope));
  encoder_ = register_module("encoder", enc);

  nn::Sequential res;
  for (int i = 0; i < 3; ++i) res->push_back(ResidualBlock(4 * b));
  residual_ = register_module("residual", res);

  // The 3T -> 3 channel reduction happens in the last decoder layer.
  nn::Sequential dec;
  dec->push_back(up(4 * b, 2 * b));
  dec->push_back(nn::BatchNorm2d(2 * b));
  dec->push_back(leaky(slope));
  dec->push_back(up(2 * b, b));
  dec->push_back(nn::BatchNorm2d(b));
  dec->push_back(leaky(slope));
  dec->push_back(up(b, 3));
  dec->push_back(nn::Tanh());
  decoder_ = register_module("decoder", dec);
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor& stacked) { return encoder_->forward(stacked); }

torch::Tensor GeneratorImpl::forward(const torch::Tensor& stacked) {
  require(stacked.dim() == 4 && stacked.size(1) == spec_.in_channels &&
              stacked.size(2) == spec_.input_resolution.height &&
              stacked.size(3) == spec_.input_resolution.width,
          to_string(spec_.kind) + ": input shape does not match spec");
  return decoder_->forward(residual_->forward(encoder_->forward(stacked)));
}

RefineNetImpl::RefineNetImpl(const NetworkSpec& spec) : spec_(spec) {
  require(spec.kind == NetworkKind::RN, "refine net: spec kind must be RN");
  spec.validate();
  const int64_t b = spec.base_width;
  const double slope = spec.leaky_slope;

  nn::Sequential enc;
  enc->push_back(down(spec.in_channels, b));
  enc->push_back(nn::BatchNorm2d(b));
  enc->push_back(leaky(slope));
  enc->push_back(down(b, 2 * b));
  enc->push_back(nn::BatchNorm2d(2 * b));
  enc->push_back(leaky(slope));
  enc->push_back(down(2 * b, 4 * b));
  enc->push_back(nn::BatchNorm2d(4 * b));
  enc->push_back(leaky(slope));
  encoder_ = register_module("encoder", enc);

  nn::Sequential dec;
  dec->push_back(up(4 * b, 2 * b));
  dec->push_back(nn::BatchNorm2d(2 * b));
  dec->push_back(leaky(slope));
  dec->push_back(up(2 * b, b));
  dec->push_back(nn::BatchNorm2d(b));
  dec->push_back(leaky(slope));
  dec->push_back(up(b, 3));
  dec->push_back(nn::Tanh());
  decoder_ = register_module("decoder", dec);
}

torch::Tensor RefineNetImpl::encode(const torch::Tensor& pair) { return encoder_->forward(pair); }

torch::Tensor RefineNetImpl::forward(const torch::Tensor& pair) {
  require(pair.dim() == 4 && pair.size(1) == 6 && pair.size(2) == spec_.input_resolution.height &&
              pair.size(3) == spec_.input_resolution.width,
          "RN: input shape does not match spec");
  return decoder_->forward(encoder_->forward(pair));
}

CriticImpl::CriticImpl(const NetworkSpec& spec) : spec_(spec) {
  require(spec.kind == NetworkKind::DISC, "critic: spec kind must be DISC");
  spec.validate();
  const int64_t b = spec.base_width;
  const std::array<int64_t, 5> widths{b, 2 * b, 4 * b, 8 * b, 8 * b};
  int64_t h = spec.input_resolution.height, w = spec.input_resolution.width;
  int64_t in = spec.in_channels;

  nn::Sequential convs;
  for (const int64_t out : widths) {
    h /= 2;
    w /= 2;
    convs->push_back(down(in, out));
    convs->push_back(nn::LayerNorm(nn::LayerNormOptions({out, h, w})));
    convs->push_back(leaky(spec.leaky_slope));
    in = out;
  }
  convs_ = register_module("convs", convs);
  score_ = register_module("score", nn::Linear(nn::LinearOptions(in * h * w, 1).bias(true)));
}

torch::Tensor CriticImpl::features(const torch::Tensor& pair) { return convs_->forward(pair); }

torch::Tensor CriticImpl::forward(const torch::Tensor& pair) {
  require(pair.dim() == 4 && pair.size(1) == 6 && pair.size(2) == spec_.input_resolution.height &&
              pair.size(3) == spec_.input_resolution.width,
          "DISC: input shape does not match spec");
  return score_->forward(convs_->forward(pair).flatten(1)).squeeze(1);
}

void initialize_weights(nn::Module& module, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/true)) {
    auto init_affine = [&](torch::Tensor& weight, torch::Tensor& bias) {
      weight.normal_(0.0, 0.02, gen);
      if (bias.defined()) bias.zero_();
    };
    if (auto* conv = m->as<nn::Conv2d>()) {
      init_affine(conv->weight, conv->bias);
    } else if (auto* deconv = m->as<nn::ConvTranspose2d>()) {
      init_affine(deconv->weight, deconv->bias);
    } else if (auto* linear = m->as<nn::Linear>()) {
      init_affine(linear->weight, linear->bias);
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->reset_running_stats();
    } else if (auto* ln = m->as<nn::LayerNorm>()) {
      ln->weight.fill_(1.0);
      ln->bias.zero_();
    }
  }
}

void zero_parameters(nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.zero_();
}

Generator build_cfg(const NetworkSpec& spec, uint64_t seed) {
  require(spec.kind == NetworkKind::CFG, "build_cfg: spec kind must be CFG");
  Generator net(spec);
  initialize_weights(*net, seed);
  return net;
}

Generator build_dgg(const NetworkSpec& spec, uint64_t seed) {
  require(spec.kind == NetworkKind::DGG, "build_dgg: spec kind must be DGG");
  Generator net(spec);
  initialize_weights(*net, seed);
  return net;
}

RefineNet build_rn(const NetworkSpec& spec, uint64_t seed) {
  RefineNet net(spec);
  initialize_weights(*net, seed);
  return net;
}

Critic build_disc(const NetworkSpec& spec, uint64_t seed) {
  Critic net(spec);
  initialize_weights(*net, seed);
  return net;
}

int64_t parameter_count(const nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

uint64_t parameter_hash(const nn::Module& module, bool include_buffers) {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const torch::Tensor& t) {
    auto c = t.detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const auto n = static_cast<std::size_t>(c.numel()) * c.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : module.parameters()) feed(p);
  if (include_buffers) {
    for (const auto& b : module.buffers()) feed(b);
  }
  return h;
}

bool parameters_finite(const nn::Module& module) {
  for (const auto& p : module.parameters()) {
    if (!torch::isfinite(p).all().item<bool>()) return false;
  }
  return true;
}

}  // namespace dggan
