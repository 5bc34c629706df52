#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "dggan/frame.hpp"

namespace dggan {

enum class NetworkKind { CFG, DGG, RN, DISC };

std::string to_string(NetworkKind kind);

struct NetworkSpec {
  NetworkKind kind = NetworkKind::CFG;
  int64_t in_channels = 12;
  int64_t base_width = 32;
  Resolution input_resolution{32, 32};
  double leaky_slope = 0.2;

  /// Throws ConfigError when the spec cannot be built.
  void validate() const;
};

/// Canonical specs: generators take 3*history channels, RN and DISC take 6.
NetworkSpec generator_spec(NetworkKind kind, int history, int64_t base_width,
                           Resolution resolution, double leaky_slope = 0.2);
NetworkSpec refine_spec(int64_t base_width, Resolution resolution, double leaky_slope = 0.2);
NetworkSpec critic_spec(int64_t base_width, Resolution resolution, double leaky_slope = 0.2);

// Residual block of three 1x1 conv + batch-norm + ReLU layers with an
// additive skip around the whole block.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Coarse frame generator / difference guide generator: a 3-layer stride-2
/// encoder, three residual blocks and a 3-layer transposed-conv decoder with
/// a tanh output. Input (B, 3T, H, W), output (B, 3, H, W).
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const NetworkSpec& spec);

  torch::Tensor forward(const torch::Tensor& stacked);
  /// Encoder output O_1, shape (B, 4*base, H/8, W/8).
  torch::Tensor encode(const torch::Tensor& stacked);

  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Sequential residual_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
};
TORCH_MODULE(Generator);

/// Refine network: 3 conv + 3 transposed conv, no residual blocks.
/// Input (B, 6, H, W) = (coarse, guided), output (B, 3, H, W).
class RefineNetImpl : public torch::nn::Module {
 public:
  explicit RefineNetImpl(const NetworkSpec& spec);

  torch::Tensor forward(const torch::Tensor& pair);
  torch::Tensor encode(const torch::Tensor& pair);

  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
};
TORCH_MODULE(RefineNet);

/// Conditional Wasserstein critic: five stride-2 convs with layer-norm and
/// leaky ReLU, then one fully connected layer to an unbounded score.
/// Input (B, 6, H, W) = (candidate, condition), output (B).
class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const NetworkSpec& spec);

  torch::Tensor forward(const torch::Tensor& pair);
  /// Feature map entering the fully connected layer.
  torch::Tensor features(const torch::Tensor& pair);

  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  torch::nn::Sequential convs_{nullptr};
  torch::nn::Linear score_{nullptr};
};
TORCH_MODULE(Critic);

Generator build_cfg(const NetworkSpec& spec, uint64_t seed);
Generator build_dgg(const NetworkSpec& spec, uint64_t seed);
RefineNet build_rn(const NetworkSpec& spec, uint64_t seed);
Critic build_disc(const NetworkSpec& spec, uint64_t seed);

/// Gaussian(0, 0.02) for conv/linear weights, zero biases, unit norm scales.
void initialize_weights(torch::nn::Module& module, uint64_t seed);
inline constexpr const char* kInitScheme = "normal(0,0.02) conv/linear weights; zero biases; unit norm gains";

/// Zeroes every parameter (not the running statistics).
void zero_parameters(torch::nn::Module& module);

int64_t parameter_count(const torch::nn::Module& module);
/// FNV-1a over the bytes of every parameter (and, optionally, every buffer
/// such as batch-norm running statistics), in registration order.
uint64_t parameter_hash(const torch::nn::Module& module, bool include_buffers = true);
bool parameters_finite(const torch::nn::Module& module);

/// The four networks of the full model. Unused slots stay null (a CFGAN
/// ablation holds only cfg and disc).
struct ModelSet {
  Generator cfg{nullptr};
  Generator dgg{nullptr};
  RefineNet rn{nullptr};
  Critic disc{nullptr};
};

}  // namespace dggan
