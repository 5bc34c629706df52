#pragma once

#include <torch/torch.h>

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dggan/networks.hpp"

namespace dggan {

/// A scalar loss tensor plus named components that sum to it.
struct LossValue {
  torch::Tensor value;
  std::map<std::string, double> breakdown;

  double item() const { return value.item<double>(); }
};

/// A critic as seen by the adversarial losses: a scoring function over
/// (B, 6, H, W) pairs and the parameters it owns.
struct CriticFn {
  std::function<torch::Tensor(const torch::Tensor&)> score;
  std::vector<torch::Tensor> parameters;
};

CriticFn critic_fn(Critic critic);

/// Mean squared error between the coarse prediction and the next frame.
LossValue coarse_loss(const torch::Tensor& coarse, const torch::Tensor& next);

/// Mean absolute error between the guide and half the true difference.
LossValue difference_loss(const torch::Tensor& guide, const torch::Tensor& diff_target);

/// coarse_loss + difference_loss, breakdown {cf, dg}.
LossValue stage1_loss(const torch::Tensor& coarse, const torch::Tensor& next,
                      const torch::Tensor& guide, const torch::Tensor& diff_target);

/// lambda * mean_b (||grad_x D(x_hat_b)||_2 - 1)^2 at x_hat = eps*real + (1-eps)*fake,
/// one eps per example drawn from `rng` unless `forced_eps` is given. The
/// result stays differentiable with respect to the critic parameters.
LossValue gradient_penalty(const CriticFn& critic, const torch::Tensor& real_pair,
                           const torch::Tensor& fake_pair, double lambda, std::mt19937_64& rng,
                           std::optional<double> forced_eps = std::nullopt);

/// mean D(fake|cond) - mean D(real|cond) + gradient penalty.
/// Breakdown {wass_fake, wass_real, gp} where wass_real = -mean D(real|cond).
LossValue disc_loss(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                    const torch::Tensor& cond, double lambda, std::mt19937_64& rng,
                    std::optional<double> forced_eps = std::nullopt);

/// -mean D(refined|cond). Critic parameters are excluded from the graph.
LossValue rn_adv_loss(const CriticFn& critic, const torch::Tensor& refined,
                      const torch::Tensor& cond);

/// Channel-stacks (candidate, condition) into the critic's input.
torch::Tensor make_pair(const torch::Tensor& candidate, const torch::Tensor& cond);

}  // namespace dggan
