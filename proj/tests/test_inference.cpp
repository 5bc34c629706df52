#include <doctest.h>

#include "dggan/dataset.hpp"
#include "dggan/errors.hpp"
#include "dggan/inference.hpp"
#include "dggan/metrics.hpp"
#include "dggan/trainer.hpp"

using namespace dggan;

namespace {

Frame random_frame(int64_t H = 32, int64_t W = 32) {
  return Frame(quantize_pixels(torch::rand({3, H, W}) * 2 - 1));
}

std::vector<Frame> random_inputs(int T = 4) {
  std::vector<Frame> v;
  for (int i = 0; i < T; ++i) v.push_back(random_frame());
  return v;
}

ModelSet small_models() {
  TrainConfig c;
  c.base_width = 4;
  return build_models(c, {32, 32});
}

ModelSet zero_models() {
  auto m = small_models();
  zero_parameters(*m.cfg);
  zero_parameters(*m.dgg);
  zero_parameters(*m.rn);
  return m;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("fuse_guide examples") {
  const auto f = random_frame();
  CHECK(torch::equal(fuse_guide(torch::zeros({3, 32, 32}), f).pixels(), f.pixels()));
  const auto full = fuse_guide(torch::full({3, 4, 4}, 0.9f), torch::full({3, 4, 4}, 0.9f));
  CHECK(torch::equal(full, torch::ones({3, 4, 4})));
  CHECK_THROWS_AS(fuse_guide(torch::zeros({3, 4, 4}), torch::zeros({3, 4, 5})), ContractViolation);
}

TEST_CASE("fuse_guide inverts the difference definition on dataset frames") {
  DatasetManifest m;
  m.num_sequences = 3;
  for (const auto& w : window_all(generate_synthetic(m), 4, 5)) {
    CHECK(torch::equal(fuse_guide(w.diff_target / 2.0, w.inputs.back()).pixels(), w.target.pixels()));
  }
}

TEST_CASE("fuse_guide identities on random in-range pairs") {
  torch::manual_seed(1);
  for (int i = 0; i < 200; ++i) {
    const auto f = random_frame(8, 8), g = random_frame(8, 8);
    CHECK(torch::equal(fuse_guide(torch::zeros_like(f.pixels()), f).pixels(), f.pixels()));
    CHECK(torch::equal(fuse_guide((g.pixels() - f.pixels()) / 2.0, f).pixels(), g.pixels()));
  }
}

TEST_CASE("predict_one with zero-weighted networks") {
  const auto m = zero_models();
  const auto inputs = random_inputs();
  const auto p = predict_one(m.cfg, m.dgg, m.rn, inputs);
  CHECK(p.variant == Variant::DGGAN);
  CHECK(torch::count_nonzero(p.coarse.pixels()).item<int64_t>() == 0);
  CHECK(torch::count_nonzero(p.guide).item<int64_t>() == 0);
  CHECK(torch::equal(p.guided.pixels(), inputs.back().pixels()));
  CHECK(torch::count_nonzero(p.refined.pixels()).item<int64_t>() == 0);
}

TEST_CASE("predict_one shapes, invariant and mode restoration") {
  auto m = small_models();
  m.cfg->train();
  const auto inputs = random_inputs();
  const auto p = predict_one(m.cfg, m.dgg, m.rn, inputs);
  for (const auto* f : {&p.coarse, &p.guided, &p.refined}) {
    CHECK(f->pixels().sizes() == torch::IntArrayRef({3, 32, 32}));
    CHECK(f->in_range());
  }
  CHECK(torch::equal(p.guided.pixels(), torch::clamp(2 * p.guide + inputs.back().pixels(), -1, 1)));
  CHECK(m.cfg->is_training());
  CHECK_FALSE(p.refined.pixels().requires_grad());
  CHECK_THROWS_AS(predict_one(m.cfg, m.dgg, m.rn, random_inputs(3)), ContractViolation);
}

TEST_CASE("baselines") {
  const auto inputs = random_inputs();
  SUBCASE("copy repeats the last frame") {
    const auto p = baseline_copy(inputs);
    CHECK(p.variant == Variant::COPY);
    CHECK(torch::equal(p.refined.pixels(), inputs.back().pixels()));
    std::vector<Frame> still(4, inputs[0]);
    CHECK(ssim(baseline_copy(still).refined, inputs[0]) == 1.0);
  }
  SUBCASE("zero-weighted CFG predicts zeros") {
    const auto m = zero_models();
    const auto p = baseline_cfgan(m.cfg, inputs);
    CHECK(p.variant == Variant::CFGAN);
    CHECK(p.refined.pixels().sizes() == torch::IntArrayRef({3, 32, 32}));
    CHECK(torch::count_nonzero(p.refined.pixels()).item<int64_t>() == 0);
  }
  SUBCASE("zero-weighted DGG degenerates to copy") {
    const auto m = zero_models();
    const auto p = baseline_dgn(m.dgg, inputs);
    CHECK(p.variant == Variant::DGN);
    CHECK(torch::equal(p.refined.pixels(), baseline_copy(inputs).refined.pixels()));
  }
}

TEST_CASE("batched prediction agrees with single prediction") {
  const auto m = small_models();
  std::vector<std::vector<Frame>> samples{random_inputs(), random_inputs()};
  const auto stacked = torch::stack({stack_channels(samples[0]), stack_channels(samples[1])});
  const auto dggan = predict_batch(Variant::DGGAN, m, stacked);
  const auto dgn = predict_batch(Variant::DGN, m, stacked);
  const auto cfgan = predict_batch(Variant::CFGAN, m, stacked);
  const auto copy = predict_batch(Variant::COPY, m, stacked);
  for (int b = 0; b < 2; ++b) {
    const auto p = predict_one(m.cfg, m.dgg, m.rn, samples[b]);
    CHECK(torch::allclose(dggan[b], p.refined.pixels(), 1e-5, 1e-6));
    CHECK(torch::allclose(dgn[b], baseline_dgn(m.dgg, samples[b]).refined.pixels(), 1e-5, 1e-6));
    CHECK(torch::allclose(cfgan[b], baseline_cfgan(m.cfg, samples[b]).refined.pixels(), 1e-5, 1e-6));
    CHECK(torch::equal(copy[b], samples[b].back().pixels()));
  }
  ModelSet empty;
  CHECK_THROWS_AS(predict_batch(Variant::DGGAN, empty, stacked), ContractViolation);
}

TEST_CASE("rollout window mechanics with a stub predictor") {
  const auto inputs = random_inputs();
  std::vector<std::vector<Frame>> windows;
  int calls = 0;
  FramePredictor stub = [&](const std::vector<Frame>& w) {
    windows.push_back(w);
    return Frame(torch::full({3, 32, 32}, 0.5f + 0.01f * static_cast<float>(calls++)));
  };
  const auto r = rollout(stub, inputs, 5);
  REQUIRE(r.frames.size() == 5);
  CHECK(r.horizon == 5);
  std::vector<Frame> history = inputs;
  for (int k = 0; k < 5; ++k) {
    REQUIRE(windows[k].size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(torch::equal(windows[k][i].pixels(), history[history.size() - 4 + i].pixels()));
    }
    history.push_back(r.frames[k]);
  }
  // n = 2: second window is {I2, I3, I4, stub output}
  CHECK(torch::equal(windows[1][0].pixels(), inputs[1].pixels()));
  CHECK(torch::equal(windows[1][3].pixels(), r.frames[0].pixels()));
  CHECK_THROWS_AS(rollout(stub, inputs, 0), ContractViolation);
}

TEST_CASE("rollout of the full model") {
  const auto m = small_models();
  const auto inputs = random_inputs();
  CHECK(torch::equal(rollout(m.cfg, m.dgg, m.rn, inputs, 1).frames[0].pixels(),
                     predict_one(m.cfg, m.dgg, m.rn, inputs).refined.pixels()));
  CHECK(rollout(m.cfg, m.dgg, m.rn, inputs, 5).frames.size() == 5);
  const auto batch = rollout_batch(Variant::COPY, m, stack_channels(inputs).unsqueeze(0), 3);
  CHECK(batch.sizes() == torch::IntArrayRef({1, 3, 3, 32, 32}));
  for (int k = 0; k < 3; ++k) CHECK(torch::equal(batch[0][k], inputs.back().pixels()));
  const auto full = rollout_batch(Variant::DGGAN, m, stack_channels(inputs).unsqueeze(0), 2);
  CHECK(torch::allclose(full[0][1], rollout(m.cfg, m.dgg, m.rn, inputs, 2).frames[1].pixels(), 1e-5, 1e-6));
}

TEST_CASE("prediction grid layout") {
  const auto m = zero_models();
  const auto inputs = random_inputs();
  const auto truth = random_frame();
  const auto p = predict_one(m.cfg, m.dgg, m.rn, inputs);
  const auto grid = render_grid(inputs, truth, p);
  const int64_t g = kGridGutter;
  CHECK(grid.sizes() == torch::IntArrayRef({3, 2 * 32 + 3 * g, 5 * 32 + 6 * g}));
  auto panel = [&](int row, int col) {
    const int64_t y = g + row * (32 + g), x = g + col * (32 + g);
    return grid.slice(1, y, y + 32).slice(2, x, x + 32);
  };
  CHECK(torch::equal(panel(0, 3), inputs[3].pixels()));
  CHECK(torch::equal(panel(1, 0), truth.pixels()));
  CHECK(torch::count_nonzero(panel(1, 1)).item<int64_t>() == 0);   // G_c of a zero network
  CHECK(torch::equal(panel(1, 2), inputs.back().pixels()));         // guided frame == I_T
  // G_d == 0 is shown as 0.5 intensity, which is 0 on the [-1, 1] canvas
  CHECK(torch::count_nonzero(panel(1, 4)).item<int64_t>() == 0);
  CHECK(torch::allclose(visualize_guide(torch::tensor({-1.0, 0.0, 1.0})), torch::tensor({0.0, 0.5, 1.0})));
  // more inputs than panels widens the grid
  std::vector<Frame> six(6, inputs[0]);
  CHECK(render_grid(six, truth, p).size(2) == 6 * 32 + 7 * g);
}

TEST_CASE("variant names") {
  for (auto v : {Variant::COPY, Variant::CFGAN, Variant::DGN, Variant::DGGAN}) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("dggan") == Variant::DGGAN);
  CHECK_THROWS_AS(parse_variant("gan"), ConfigError);
}

}  // TEST_SUITE
