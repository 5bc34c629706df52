#include <doctest.h>

#include "dggan/errors.hpp"
#include "dggan/networks.hpp"
#include "oracles.hpp"

using namespace dggan;

namespace {

torch::Tensor uniform_input(std::vector<int64_t> shape, uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand(shape) * 2.0 - 1.0;
}

// Compares autograd parameter gradients of sum(out * weights) against central
// finite differences for a few entries of every parameter tensor.
template <typename Net>
void check_parameter_gradients(Net net, const torch::Tensor& input_f32) {
  net->to(torch::kFloat64);
  net->train();
  const auto input = input_f32.to(torch::kFloat64);
  torch::manual_seed(7);
  const auto probe = torch::randn_like(net->forward(input).detach());
  auto objective = [&] { return (net->forward(input) * probe).sum(); };

  net->zero_grad();
  objective().backward();
  int checked = 0;
  for (auto& p : net->parameters()) {
    const auto grad = p.grad().view({-1});
    const int64_t n = p.numel();
    for (const int64_t idx : {int64_t{0}, n / 2, n - 1}) {
      const double fd = oracle::central_difference([&] { return objective().template item<double>(); }, p, idx, 1e-6);
      const double ad = grad[idx].template item<double>();
      INFO("param entry " << idx << " of " << n << ": autograd " << ad << " vs fd " << fd);
      CHECK(oracle::close_rel(ad, fd, 1e-3, 1e-6));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("generator shapes at 64x64, T=4") {
  auto cfg = build_cfg(generator_spec(NetworkKind::CFG, 4, 8, {64, 64}), 1);
  const auto x = uniform_input({2, 12, 64, 64}, 1);
  CHECK(cfg->forward(x).sizes() == torch::IntArrayRef({2, 3, 64, 64}));
  CHECK(cfg->encode(x).sizes() == torch::IntArrayRef({2, 32, 8, 8}));
  // batch size one works too
  CHECK(cfg->forward(x.slice(0, 0, 1)).sizes() == torch::IntArrayRef({1, 3, 64, 64}));
}

TEST_CASE("output shapes and ranges for all four networks at 32x32 and 64x64") {
  for (const Resolution res : {Resolution{32, 32}, Resolution{64, 64}}) {
    CAPTURE(res.height);
    const int64_t H = res.height, W = res.width;
    auto cfg = build_cfg(generator_spec(NetworkKind::CFG, 4, 8, res), 1);
    auto dgg = build_dgg(generator_spec(NetworkKind::DGG, 4, 8, res), 2);
    auto rn = build_rn(refine_spec(8, res), 3);
    auto disc = build_disc(critic_spec(8, res), 4);
    const auto x = uniform_input({3, 12, H, W}, 5);
    const auto pair = uniform_input({3, 6, H, W}, 6);
    for (bool training : {true, false}) {
      cfg->train(training);
      dgg->train(training);
      rn->train(training);
      for (const auto& out : {cfg->forward(x), dgg->forward(x), rn->forward(pair)}) {
        CHECK(out.sizes() == torch::IntArrayRef({3, 3, H, W}));
        CHECK(out.abs().max().item<double>() < 1.0);
      }
    }
    CHECK(rn->encode(pair).sizes() == torch::IntArrayRef({3, 32, H / 8, W / 8}));
    const auto scores = disc->forward(pair);
    CHECK(scores.sizes() == torch::IntArrayRef({3}));
    CHECK(torch::isfinite(scores).all().item<bool>());
    CHECK(disc->features(pair).sizes() == torch::IntArrayRef({3, 64, H / 32, W / 32}));
  }
}

TEST_CASE("critic at 64x64, batch 8") {
  auto disc = build_disc(critic_spec(8, {64, 64}), 4);
  const auto pair = uniform_input({8, 6, 64, 64}, 9);
  CHECK(disc->forward(pair).sizes() == torch::IntArrayRef({8}));
  CHECK(disc->features(pair).size(2) == 2);
  CHECK(disc->features(pair).size(3) == 2);
}

TEST_CASE("zero-weighted generators output exactly zero") {
  auto cfg = build_cfg(generator_spec(NetworkKind::CFG, 4, 8, {32, 32}), 1);
  auto rn = build_rn(refine_spec(8, {32, 32}), 3);
  auto disc = build_disc(critic_spec(8, {32, 32}), 4);
  zero_parameters(*cfg);
  zero_parameters(*rn);
  zero_parameters(*disc);
  CHECK(torch::count_nonzero(cfg->forward(uniform_input({2, 12, 32, 32}, 1))).item<int64_t>() == 0);
  CHECK(torch::count_nonzero(rn->forward(uniform_input({2, 6, 32, 32}, 1))).item<int64_t>() == 0);
  CHECK(torch::count_nonzero(disc->forward(uniform_input({2, 6, 32, 32}, 1))).item<int64_t>() == 0);
}

TEST_CASE("CFG and DGG are architecturally identical") {
  auto cfg = build_cfg(generator_spec(NetworkKind::CFG, 4, 8, {32, 32}), 1);
  auto dgg = build_dgg(generator_spec(NetworkKind::DGG, 4, 8, {32, 32}), 1);
  CHECK(parameter_count(*cfg) == parameter_count(*dgg));
  // same seed, same architecture -> same initialization
  CHECK(parameter_hash(*cfg) == parameter_hash(*dgg));
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(generator_spec(NetworkKind::CFG, 4, 8, {30, 30}).validate(), ConfigError);
  CHECK_THROWS_AS(build_cfg(generator_spec(NetworkKind::CFG, 4, 8, {30, 30}), 0), ConfigError);
  CHECK_THROWS_AS(build_disc(critic_spec(8, {48, 48}), 0), ConfigError);
  CHECK_NOTHROW(build_rn(refine_spec(8, {48, 48}), 0));
  CHECK_THROWS_AS(build_cfg(generator_spec(NetworkKind::CFG, 4, 0, {32, 32}), 0), ConfigError);
  NetworkSpec bad = refine_spec(8, {32, 32});
  bad.in_channels = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  // a spec of the wrong kind is a programming error
  CHECK_THROWS_AS(build_cfg(refine_spec(8, {32, 32}), 0), ContractViolation);
  auto cfg = build_cfg(generator_spec(NetworkKind::CFG, 4, 8, {32, 32}), 0);
  CHECK_THROWS_AS(cfg->forward(torch::zeros({1, 9, 32, 32})), ContractViolation);
}

TEST_CASE("initialization is a deterministic function of the seed") {
  const auto spec = critic_spec(8, {32, 32});
  CHECK(parameter_hash(*build_disc(spec, 11)) == parameter_hash(*build_disc(spec, 11)));
  CHECK(parameter_hash(*build_disc(spec, 11)) != parameter_hash(*build_disc(spec, 12)));
  // initial weights follow N(0, 0.02)
  auto big = build_cfg(generator_spec(NetworkKind::CFG, 4, 32, {32, 32}), 3);
  torch::Tensor w;
  for (const auto& item : big->named_parameters()) {
    if (item.key().find("residual.0.body.0.weight") != std::string::npos) w = item.value();
  }
  REQUIRE(w.defined());
  CHECK(std::abs(w.std().item<double>() - 0.02) < 0.002);
  CHECK(std::abs(w.mean().item<double>()) < 0.002);
}

TEST_CASE("parameter gradients match central finite differences (float64, base 4)") {
  const Resolution res{32, 32};
  SUBCASE("CFG") {
    check_parameter_gradients(build_cfg(generator_spec(NetworkKind::CFG, 4, 4, res), 1),
                              uniform_input({2, 12, 32, 32}, 1));
  }
  SUBCASE("DGG") {
    check_parameter_gradients(build_dgg(generator_spec(NetworkKind::DGG, 4, 4, res), 2),
                              uniform_input({2, 12, 32, 32}, 2));
  }
  SUBCASE("RN") { check_parameter_gradients(build_rn(refine_spec(4, res), 3), uniform_input({2, 6, 32, 32}, 3)); }
  SUBCASE("DISC") { check_parameter_gradients(build_disc(critic_spec(4, res), 4), uniform_input({2, 6, 32, 32}, 4)); }
}

TEST_CASE("critic supports the second-order gradient path") {
  auto disc = build_disc(critic_spec(4, {32, 32}), 4);
  auto x = uniform_input({2, 6, 32, 32}, 8).requires_grad_(true);
  const auto grads = torch::autograd::grad({disc->forward(x).sum()}, {x}, {}, true, true);
  const auto norm = grads[0].flatten(1).norm(2, 1).sum();
  disc->zero_grad();
  norm.backward();
  double total = 0.0;
  for (const auto& p : disc->parameters()) {
    if (!p.grad().defined()) continue;
    CHECK(torch::isfinite(p.grad()).all().item<bool>());
    total += p.grad().abs().sum().item<double>();
  }
  CHECK(total > 0.0);
}

TEST_CASE("parameter hash tracks changes") {
  auto rn = build_rn(refine_spec(4, {32, 32}), 3);
  const auto before = parameter_hash(*rn, false);
  {
    torch::NoGradGuard g;
    rn->parameters()[0].view({-1})[0] += 1.0;
  }
  CHECK(parameter_hash(*rn, false) != before);
  CHECK(parameters_finite(*rn));
  {
    torch::NoGradGuard g;
    rn->parameters()[0].view({-1})[0] = std::numeric_limits<float>::quiet_NaN();
  }
  CHECK_FALSE(parameters_finite(*rn));
}

}  // TEST_SUITE
