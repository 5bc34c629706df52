#include "dggan/losses.hpp"

#include <cmath>

#include "dggan/errors.hpp"

namespace dggan {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  require(a.sizes() == b.sizes(), std::string(what) + ": shape mismatch");
}

// Turns off gradient tracking for a parameter list for the guard's lifetime.
class FrozenParameters {
 public:
  explicit FrozenParameters(const std::vector<torch::Tensor>& params) : params_(params) {
    flags_.reserve(params_.size());
    for (auto& p : params_) {
      flags_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~FrozenParameters() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(flags_[i]);
  }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> flags_;
};

}  // namespace

CriticFn critic_fn(Critic critic) {
  return {[critic](const torch::Tensor& x) mutable { return critic->forward(x); }, critic->parameters()};
}

torch::Tensor make_pair(const torch::Tensor& candidate, const torch::Tensor& cond) {
  require_same_shape(candidate, cond, "make_pair");
  return torch::cat({candidate, cond}, candidate.dim() == 4 ? 1 : 0);
}

LossValue coarse_loss(const torch::Tensor& coarse, const torch::Tensor& next) {
  require_same_shape(coarse, next, "coarse_loss");
  auto value = (coarse - next).pow(2).mean();
  return {value, {{"cf", value.item<double>()}}};
}

LossValue difference_loss(const torch::Tensor& guide, const torch::Tensor& diff_target) {
  require_same_shape(guide, diff_target, "difference_loss");
  auto value = (guide - diff_target / 2.0).abs().mean();
  return {value, {{"dg", value.item<double>()}}};
}

LossValue stage1_loss(const torch::Tensor& coarse, const torch::Tensor& next,
                      const torch::Tensor& guide, const torch::Tensor& diff_target) {
  auto cf = coarse_loss(coarse, next);
  auto dg = difference_loss(guide, diff_target);
  return {cf.value + dg.value, {{"cf", cf.breakdown.at("cf")}, {"dg", dg.breakdown.at("dg")}}};
}

LossValue gradient_penalty(const CriticFn& critic, const torch::Tensor& real_pair,
                           const torch::Tensor& fake_pair, double lambda, std::mt19937_64& rng,
                           std::optional<double> forced_eps) {
  require(lambda >= 0.0, "gradient_penalty: lambda must be >= 0");
  require_same_shape(real_pair, fake_pair, "gradient_penalty");
  require(real_pair.dim() == 4, "gradient_penalty: expected (B, C, H, W) pairs");
  const int64_t batch = real_pair.size(0);

  torch::Tensor eps;
  if (forced_eps) {
    eps = torch::full({batch, 1, 1, 1}, *forced_eps, real_pair.options());
  } else {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> draws(static_cast<std::size_t>(batch));
    for (auto& d : draws) d = unit(rng);
    eps = torch::tensor(draws, torch::kFloat64).to(real_pair.dtype()).view({batch, 1, 1, 1});
  }
  auto x_hat = (eps * real_pair.detach() + (1.0 - eps) * fake_pair.detach()).requires_grad_(true);
  auto scores = critic.score(x_hat);

  torch::Tensor grads;
  if (scores.requires_grad()) {
    auto result = torch::autograd::grad({scores}, {x_hat}, {torch::ones_like(scores)},
                                        /*retain_graph=*/true, /*create_graph=*/true,
                                        /*allow_unused=*/true);
    grads = result[0];
  }
  if (!grads.defined()) grads = torch::zeros_like(x_hat);

  auto norms = grads.flatten(1).norm(2, 1);
  auto value = lambda * (norms - 1.0).pow(2).mean();
  const double v = value.item<double>();
  if (!std::isfinite(v)) {
    throw TrainingFailure("gradient penalty is not finite (max input-gradient norm " +
                          std::to_string(norms.max().item<double>()) + ")");
  }
  return {value, {{"gp", v}}};
}

LossValue disc_loss(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                    const torch::Tensor& cond, double lambda, std::mt19937_64& rng,
                    std::optional<double> forced_eps) {
  require_same_shape(real, fake, "disc_loss");
  auto real_pair = make_pair(real, cond);
  auto fake_pair = make_pair(fake, cond);
  auto wass_fake = critic.score(fake_pair).mean();
  auto wass_real = -critic.score(real_pair).mean();
  auto gp = gradient_penalty(critic, real_pair, fake_pair, lambda, rng, forced_eps);
  auto value = wass_fake + wass_real + gp.value;
  return {value,
          {{"wass_fake", wass_fake.item<double>()},
           {"wass_real", wass_real.item<double>()},
           {"gp", gp.breakdown.at("gp")}}};
}

LossValue rn_adv_loss(const CriticFn& critic, const torch::Tensor& refined,
                      const torch::Tensor& cond) {
  require_same_shape(refined, cond, "rn_adv_loss");
  FrozenParameters frozen(critic.parameters);
  auto value = -critic.score(make_pair(refined, cond)).mean();
  return {value, {{"rn_adv", value.item<double>()}}};
}

}  // namespace dggan
