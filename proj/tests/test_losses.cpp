#include <doctest.h>

#include <cmath>
#include <limits>

#include "dggan/errors.hpp"
#include "dggan/losses.hpp"
#include "oracles.hpp"

using namespace dggan;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

CriticFn mean_critic() {
  return {[](const torch::Tensor& x) { return x.flatten(1).mean(1); }, {}};
}
CriticFn sum_critic() {
  return {[](const torch::Tensor& x) { return x.flatten(1).sum(1); }, {}};
}
CriticFn constant_critic(double c) {
  return {[c](const torch::Tensor& x) { return torch::full({x.size(0)}, c, x.options()); }, {}};
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("coarse loss examples") {
  const auto a = torch::rand({2, 3, 8, 8}, kF64);
  CHECK(coarse_loss(a, a).item() == 0.0);
  CHECK(std::abs(coarse_loss(torch::full({3, 5, 7}, 0.5, kF64), torch::zeros({3, 5, 7}, kF64)).item() - 0.25) <= 1e-12);
  CHECK(std::abs(coarse_loss(torch::ones({4, 3, 4, 4}, kF64), -torch::ones({4, 3, 4, 4}, kF64)).item() - 4.0) <= 1e-12);
  CHECK_THROWS_AS(coarse_loss(a, torch::rand({2, 3, 8, 4}, kF64)), ContractViolation);
}

TEST_CASE("difference loss examples") {
  const auto d = torch::rand({2, 3, 8, 8}, kF64) * 4.0 - 2.0;
  CHECK(difference_loss(d / 2.0, d).item() == 0.0);
  CHECK(std::abs(difference_loss(torch::zeros({3, 6, 6}, kF64), torch::full({3, 6, 6}, 2.0, kF64)).item() - 1.0) <= 1e-12);
  CHECK(difference_loss(torch::zeros({3, 6, 6}, kF64), torch::zeros({3, 6, 6}, kF64)).item() == 0.0);
  CHECK_THROWS_AS(difference_loss(d, d.slice(0, 0, 1)), ContractViolation);
}

TEST_CASE("stage-I loss is the sum of its parts") {
  const auto zero = torch::zeros({1, 3, 4, 4}, kF64);
  const auto half = torch::full({1, 3, 4, 4}, 0.5, kF64);
  const auto two = torch::full({1, 3, 4, 4}, 2.0, kF64);
  CHECK(stage1_loss(half, half, zero, zero).item() == 0.0);
  const auto l = stage1_loss(half, zero, zero, two);
  CHECK(std::abs(l.item() - 1.25) <= 1e-12);
  CHECK(std::abs(l.breakdown.at("cf") - 0.25) <= 1e-12);
  CHECK(std::abs(l.breakdown.at("dg") - 1.0) <= 1e-12);
  // perfect fits stay zero when the operand pairs are swapped
  const auto t = torch::rand({1, 3, 4, 4}, kF64);
  CHECK(stage1_loss(t / 2.0, t / 2.0, t / 2.0, t).item() == 0.0);
}

TEST_CASE("pixel losses are non-negative and vanish only on equal operands") {
  torch::manual_seed(3);
  for (int i = 0; i < 50; ++i) {
    const auto a = torch::rand({2, 3, 4, 4}, kF64) * 2 - 1;
    const auto b = torch::rand({2, 3, 4, 4}, kF64) * 2 - 1;
    CHECK(coarse_loss(a, b).item() > 0.0);
    CHECK(difference_loss(a, b).item() > 0.0);
    CHECK(coarse_loss(a, a).item() == 0.0);
  }
}

TEST_CASE("gradient penalty of hand-built linear critics") {
  std::mt19937_64 rng(0);
  const auto real = torch::rand({3, 6, 4, 4}, kF64);
  const auto fake = torch::rand({3, 6, 4, 4}, kF64);
  // analytic: the input gradient of mean(x) is 1/n everywhere, of sum(x) is 1
  const double n = 6.0 * 4 * 4;
  const double mean_expected = 10.0 * std::pow(1.0 / std::sqrt(n) - 1.0, 2);
  const double sum_expected = 1.0 * std::pow(std::sqrt(n) - 1.0, 2);
  CHECK(std::abs(mean_expected - 8.062925) < 1e-6);
  CHECK(std::abs(sum_expected - 77.404082) < 1e-6);
  const double gp_mean = gradient_penalty(mean_critic(), real, fake, 10.0, rng).item();
  const double gp_sum = gradient_penalty(sum_critic(), real, fake, 1.0, rng).item();
  CHECK(std::abs(gp_mean - mean_expected) <= 1e-6 * mean_expected);
  CHECK(std::abs(gp_sum - sum_expected) <= 1e-6 * sum_expected);
  CHECK(gradient_penalty(sum_critic(), real, fake, 0.0, rng).item() == 0.0);
  CHECK_THROWS_AS(gradient_penalty(sum_critic(), real, fake, -1.0, rng), ContractViolation);
}

TEST_CASE("gradient penalty matches finite differences of the critic's input gradient") {
  auto disc = build_disc(critic_spec(4, {32, 32}), 5);
  disc->to(torch::kFloat64);
  torch::manual_seed(2);
  const auto x = torch::rand({1, 6, 32, 32}, kF64) * 2 - 1;
  auto xg = x.clone().requires_grad_(true);
  const auto grad = torch::autograd::grad({disc->forward(xg).sum()}, {xg})[0].view({-1});
  auto probe = x.clone();
  auto score = [&] {
    torch::NoGradGuard g;
    return disc->forward(probe).sum().item<double>();
  };
  for (int64_t idx = 0; idx < probe.numel(); idx += 97) {
    const double fd = oracle::central_difference(score, probe, idx, 1e-6);
    CHECK(oracle::close_rel(grad[idx].item<double>(), fd, 1e-3, 1e-8));
  }
  // and the penalty built from that gradient equals the oracle norm
  std::mt19937_64 rng(0);
  const double gp = gradient_penalty(critic_fn(disc), x, x, 10.0, rng).item();
  const double norm = grad.norm().item<double>();
  CHECK(std::abs(gp - 10.0 * (norm - 1.0) * (norm - 1.0)) <= 1e-9 * std::max(1.0, gp));
}

TEST_CASE("gradient penalty differentiates to critic parameters like finite differences") {
  auto disc = build_disc(critic_spec(4, {32, 32}), 6);
  disc->to(torch::kFloat64);
  torch::manual_seed(4);
  const auto real = torch::rand({2, 6, 32, 32}, kF64) * 2 - 1;
  const auto fake = torch::rand({2, 6, 32, 32}, kF64) * 2 - 1;
  std::mt19937_64 rng(0);
  auto penalty = [&] { return gradient_penalty(critic_fn(disc), real, fake, 10.0, rng, 0.3).value; };
  disc->zero_grad();
  penalty().backward();
  // the final bias cannot influence an input gradient, so take the weight before it
  const auto params = disc->parameters();
  auto w = params[params.size() - 2];  // final linear weight
  auto c = params.front();             // first conv weight
  for (auto* p : {&w, &c}) {
    const auto g = p->grad().view({-1});
    for (const int64_t idx : {int64_t{0}, p->numel() / 3}) {
      const double fd = oracle::central_difference([&] { return penalty().item<double>(); }, *p, idx, 1e-6);
      INFO("analytic " << g[idx].item<double>() << " fd " << fd);
      CHECK(oracle::close_rel(g[idx].item<double>(), fd, 1e-3, 1e-7));
    }
  }
}

TEST_CASE("forced epsilon selects the fake or the real pair") {
  const auto real = torch::rand({2, 6, 4, 4}, kF64);
  const auto fake = torch::rand({2, 6, 4, 4}, kF64);
  torch::Tensor seen;
  CriticFn spy{[&](const torch::Tensor& x) {
                 seen = x.detach().clone();
                 return x.flatten(1).sum(1);
               },
               {}};
  std::mt19937_64 rng(0);
  gradient_penalty(spy, real, fake, 1.0, rng, 0.0);
  CHECK(torch::equal(seen, fake));
  gradient_penalty(spy, real, fake, 1.0, rng, 1.0);
  CHECK(torch::equal(seen, real));
  // one epsilon per example: each interpolate lies on its own real-fake segment
  gradient_penalty(spy, real, fake, 1.0, rng);
  for (int b = 0; b < 2; ++b) {
    const auto eps = ((seen[b] - fake[b]) / (real[b] - fake[b])).flatten();
    CHECK((eps - eps[0]).abs().max().item<double>() < 1e-9);
    CHECK(eps[0].item<double>() >= 0.0);
    CHECK(eps[0].item<double>() <= 1.0);
  }
}

TEST_CASE("non-finite penalty is a training failure") {
  CriticFn bad{[](const torch::Tensor& x) {
                 return x.flatten(1).sum(1) * std::numeric_limits<double>::infinity();
               },
               {}};
  std::mt19937_64 rng(0);
  const auto a = torch::rand({2, 6, 4, 4}, kF64);
  CHECK_THROWS_AS(gradient_penalty(bad, a, a, 10.0, rng), TrainingFailure);
}

TEST_CASE("critic loss examples") {
  std::mt19937_64 rng(0);
  const auto real = torch::rand({2, 3, 4, 4}, kF64);
  const auto fake = torch::rand({2, 3, 4, 4}, kF64);
  const auto cond = torch::rand({2, 3, 4, 4}, kF64);
  SUBCASE("constant critic leaves only the penalty") {
    const auto l = disc_loss(constant_critic(2.5), real, fake, cond, 10.0, rng);
    // zero input gradient -> penalty lambda * (0 - 1)^2
    CHECK(std::abs(l.item() - 10.0) <= 1e-12);
    CHECK(l.breakdown.at("wass_fake") + l.breakdown.at("wass_real") == 0.0);
  }
  SUBCASE("real == fake with a linear critic cancels the Wasserstein terms") {
    const auto l = disc_loss(mean_critic(), real, real, cond, 10.0, rng);
    CHECK(l.breakdown.at("wass_fake") + l.breakdown.at("wass_real") == 0.0);
    CHECK(std::abs(l.item() - l.breakdown.at("gp")) <= 1e-12);
  }
  SUBCASE("components sum to the value") {
    const auto l = disc_loss(mean_critic(), real, fake, cond, 10.0, rng);
    double s = 0.0;
    for (const auto& [k, v] : l.breakdown) s += v;
    CHECK(std::abs(s - l.item()) <= 1e-12);
  }
}

TEST_CASE("generator adversarial loss examples") {
  const auto zero = torch::zeros({2, 3, 4, 4}, kF64);
  const auto one = torch::ones({2, 3, 4, 4}, kF64);
  CHECK(rn_adv_loss(constant_critic(1.75), torch::rand({2, 3, 4, 4}, kF64), zero).item() == -1.75);
  CHECK(rn_adv_loss(mean_critic(), zero, zero).item() == 0.0);
  CHECK(rn_adv_loss(mean_critic(), one, one).item() == -1.0);
}

TEST_CASE("generator adversarial loss leaves critic gradients zero") {
  auto disc = build_disc(critic_spec(4, {32, 32}), 8);
  auto refined = (torch::rand({2, 3, 32, 32}) * 2 - 1).requires_grad_(true);
  const auto cond = torch::rand({2, 3, 32, 32}) * 2 - 1;
  disc->zero_grad();
  rn_adv_loss(critic_fn(disc), refined, cond).value.backward();
  for (const auto& p : disc->parameters()) {
    CHECK(p.requires_grad());  // restored afterwards
    if (p.grad().defined()) CHECK(torch::count_nonzero(p.grad()).item<int64_t>() == 0);
  }
  REQUIRE(refined.grad().defined());
  CHECK(refined.grad().abs().sum().item<double>() > 0.0);
}

}  // TEST_SUITE
