#include "dggan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "dggan/errors.hpp"
#include "dggan/losses.hpp"

namespace dggan {

void TrainConfig::validate() const {
  if (history < 1) throw ConfigError("history must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (const auto* lr : {&stage1_lr, &stage2_lr}) {
    if (!(lr->start > 0.0) || !(lr->end > 0.0)) throw ConfigError("learning rates must be > 0");
    if (lr->start < lr->end) throw ConfigError("learning rate start must be >= end");
  }
  if (stage1_epochs < 0 || stage2_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (disc_steps_per_gen_step < 1) throw ConfigError("disc_steps_per_gen_step must be >= 1");
  if (adam_betas.first < 0.0 || adam_betas.first >= 1.0 || adam_betas.second < 0.0 ||
      adam_betas.second >= 1.0) {
    throw ConfigError("adam_betas must lie in [0, 1)");
  }
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (aux_pixel_weight < 0.0) throw ConfigError("aux_pixel_weight must be >= 0");
}

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.stage1_epochs = 100;
  c.stage2_epochs = 200;
  c.base_width = 32;
  return c;
}

double lr_schedule(int64_t step, int64_t total_steps, double start, double end) {
  require(total_steps >= 1, "lr_schedule: total_steps must be >= 1");
  require(step >= 0 && step <= total_steps, "lr_schedule: step out of range");
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return (1.0 - t) * start + t * end;  // exact at both endpoints
}

ModelSet build_models(const TrainConfig& config, Resolution resolution) {
  config.validate();
  const auto b = config.base_width;
  const auto slope = config.leaky_slope;
  ModelSet m;
  m.cfg = build_cfg(generator_spec(NetworkKind::CFG, config.history, b, resolution, slope),
                    mix_seed(config.seed, 1));
  m.dgg = build_dgg(generator_spec(NetworkKind::DGG, config.history, b, resolution, slope),
                    mix_seed(config.seed, 2));
  m.rn = build_rn(refine_spec(b, resolution, slope), mix_seed(config.seed, 3));
  m.disc = build_disc(critic_spec(b, resolution, slope), mix_seed(config.seed, 4));
  return m;
}

namespace {

std::string fmt_value(const std::optional<double>& v) {
  if (!v) return "na";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

template <typename Holder>
Holder clone_net(const Holder& source) {
  Holder copy(source->spec());
  std::istringstream bytes(module_bytes(*source));
  torch::serialize::InputArchive archive;
  archive.load_from(bytes);
  copy->load(archive);
  return copy;
}

std::string optimizer_bytes(const torch::optim::Optimizer& opt) {
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void load_optimizer(torch::optim::Optimizer& opt, const std::string& bytes) {
  if (bytes.empty()) return;
  std::istringstream in(bytes);
  torch::serialize::InputArchive archive;
  archive.load_from(in);
  opt.load(archive);
}

std::string rng_bytes(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, double lr,
                             const TrainConfig& config) {
  return torch::optim::Adam(
      params, torch::optim::AdamOptions(lr).betas({config.adam_betas.first, config.adam_betas.second}));
}

void apply_determinism(const TrainConfig& config) {
  if (config.deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  }
}

// Batches of a shuffled permutation; the trailing partial batch is dropped
// unless it is the only one.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto bs = static_cast<std::size_t>(batch_size);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i + bs <= n; i += bs) batches.emplace_back(perm.begin() + i, perm.begin() + i + bs);
  if (batches.empty() && n > 0) batches.push_back(perm);
  return batches;
}

std::size_t batches_per_epoch(std::size_t n, int batch_size) {
  const auto full = n / static_cast<std::size_t>(batch_size);
  return full > 0 ? full : (n > 0 ? 1 : 0);
}

void emit(const TrainHooks& hooks, const LogRow& row) {
  if (hooks.log) *hooks.log << row.format() << "\n";
}

void notify(const TrainHooks& hooks, SubStep kind, bool before, const ModelSet& models) {
  if (hooks.on_substep) hooks.on_substep(kind, before, models);
}

void check_finite(double value, const char* what, int64_t step) {
  if (!std::isfinite(value)) {
    throw TrainingFailure(std::string(what) + " became non-finite at step " + std::to_string(step));
  }
}

torch::Tensor index_rows(const torch::Tensor& all, const std::vector<std::size_t>& idx) {
  std::vector<int64_t> rows(idx.begin(), idx.end());
  return all.index_select(0, torch::tensor(rows, torch::kInt64));
}

}  // namespace

std::string LogRow::format() const {
  std::ostringstream s;
  s << "step=" << step << " stage=" << to_string(stage) << " cf=" << fmt_value(cf)
    << " dg=" << fmt_value(dg) << " d_loss=" << fmt_value(d_loss) << " gp=" << fmt_value(gp)
    << " rn_adv=" << fmt_value(rn_adv) << " lr=" << fmt_value(lr);
  return s.str();
}

TrainResult train_stage1(const TrainConfig& config, std::span<const SampleWindow> train,
                         const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  if (train.empty()) throw DataError("stage I: training set is empty");
  apply_determinism(config);
  const Resolution res = train.front().target.resolution();

  ModelSet models = build_models(config, res);
  std::mt19937_64 rng(mix_seed(config.seed, 100));
  int start_epoch = 0;
  int64_t step = 0;
  if (resume) {
    require(resume->stage == Stage::I && resume->variant == "dggan",
            "stage I: resume checkpoint must be a stage-I checkpoint");
    models.cfg = clone_net(resume->models.cfg);
    models.dgg = clone_net(resume->models.dgg);
    start_epoch = resume->epoch;
    step = resume->step;
    std::istringstream(resume->rng_state) >> rng;
  }
  Generator cfg = models.cfg, dgg = models.dgg;
  cfg->train();
  dgg->train();

  std::vector<torch::Tensor> params = cfg->parameters();
  for (auto& p : dgg->parameters()) params.push_back(p);
  auto opt = make_adam(params, config.stage1_lr.start, config);
  if (resume) load_optimizer(opt, resume->generator_optimizer);

  const auto per_epoch = static_cast<int64_t>(batches_per_epoch(train.size(), config.batch_size));
  const int64_t total_steps = std::max<int64_t>(per_epoch * config.stage1_epochs - 1, 1);

  TrainResult result;
  auto snapshot = [&](int epoch) {
    Checkpoint c;
    c.stage = Stage::I;
    c.epoch = epoch;
    c.step = step;
    c.config = config;
    c.resolution = res;
    c.models = models;
    c.generator_optimizer = optimizer_bytes(opt);
    c.rng_state = rng_bytes(rng);
    return c;
  };

  for (int epoch = start_epoch; epoch < config.stage1_epochs; ++epoch) {
    EpochSummary summary;
    summary.epoch = epoch;
    const auto batches = epoch_batches(train.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      const double lr = lr_schedule(std::min(step, total_steps), total_steps, config.stage1_lr.start,
                                    config.stage1_lr.end);
      set_lr(opt, lr);
      notify(hooks, SubStep::stage1, true, models);
      const WindowBatch batch = stack_windows(train, idx);
      opt.zero_grad();
      auto coarse = cfg->forward(batch.inputs);
      auto guide = dgg->forward(batch.inputs);
      auto loss = stage1_loss(coarse, batch.target, guide, batch.diff_target);
      check_finite(loss.breakdown.at("cf") + loss.breakdown.at("dg"), "stage-I loss", step);
      loss.value.backward();
      opt.step();
      notify(hooks, SubStep::stage1, false, models);

      LogRow row;
      row.step = step;
      row.stage = Stage::I;
      row.cf = loss.breakdown.at("cf");
      row.dg = loss.breakdown.at("dg");
      row.lr = lr;
      emit(hooks, row);
      result.log.push_back(row);
      summary.mean_cf += *row.cf;
      summary.mean_dg += *row.dg;
      ++summary.gen_updates;
      ++step;
    }
    if (summary.gen_updates > 0) {
      summary.mean_cf /= static_cast<double>(summary.gen_updates);
      summary.mean_dg /= static_cast<double>(summary.gen_updates);
    }
    if (!parameters_finite(*cfg) || !parameters_finite(*dgg)) {
      throw TrainingFailure("stage I: non-finite parameters after epoch " + std::to_string(epoch));
    }
    if (hooks.log) {
      *hooks.log << "epoch=" << epoch << " stage=I cf_mean=" << fmt_value(summary.mean_cf)
                 << " dg_mean=" << fmt_value(summary.mean_dg) << "\n";
    }
    result.epochs.push_back(summary);
    if (hooks.on_epoch_end) hooks.on_epoch_end(snapshot(epoch + 1));
  }
  result.checkpoint = snapshot(std::max(start_epoch, config.stage1_epochs));
  return result;
}

namespace {

// Shared WGAN-GP loop: the critic sees (candidate | I_T) pairs; the generator
// is whatever `generate` evaluates for a set of sample rows.
struct AdversarialSetup {
  std::function<torch::Tensor(const std::vector<std::size_t>&)> generate;
  std::vector<torch::Tensor> generator_params;
  torch::nn::Module* generator = nullptr;
  ModelSet models;  // everything the loop touches, for the hooks
  torch::Tensor target;  // (N, 3, H, W)
  torch::Tensor last;    // (N, 3, H, W)
};

struct AdversarialState {
  int start_epoch = 0;
  int64_t step = 0;
  std::string generator_optimizer;
  std::string critic_optimizer;
  std::string rng_state;
};

TrainResult adversarial_loop(const TrainConfig& config, AdversarialSetup& setup, Critic disc,
                             const TrainHooks& hooks, const AdversarialState& state,
                             const std::function<Checkpoint(int, int64_t, const std::string&,
                                                            const std::string&, const std::string&)>& snapshot) {
  const auto n = static_cast<std::size_t>(setup.target.size(0));
  std::mt19937_64 rng(mix_seed(config.seed, 200));
  if (!state.rng_state.empty()) std::istringstream(state.rng_state) >> rng;

  auto opt_gen = make_adam(setup.generator_params, config.stage2_lr.start, config);
  auto opt_disc = make_adam(disc->parameters(), config.stage2_lr.start, config);
  load_optimizer(opt_gen, state.generator_optimizer);
  load_optimizer(opt_disc, state.critic_optimizer);
  const CriticFn critic = critic_fn(disc);

  const auto per_epoch = static_cast<int64_t>(batches_per_epoch(n, config.batch_size));
  const int64_t total_steps = std::max<int64_t>(per_epoch * config.stage2_epochs - 1, 1);
  const int64_t k = config.disc_steps_per_gen_step;
  int64_t step = state.step;

  setup.generator->train();
  disc->train();
  TrainResult result;
  for (int epoch = state.start_epoch; epoch < config.stage2_epochs; ++epoch) {
    EpochSummary summary;
    summary.epoch = epoch;
    const auto batches = epoch_batches(n, config.batch_size, rng);
    for (const auto& idx : batches) {
      const double lr = lr_schedule(std::min(step, total_steps), total_steps, config.stage2_lr.start,
                                    config.stage2_lr.end);
      set_lr(opt_gen, lr);
      set_lr(opt_disc, lr);
      const auto target = index_rows(setup.target, idx);
      const auto last = index_rows(setup.last, idx);

      notify(hooks, SubStep::disc, true, setup.models);
      torch::Tensor fake;
      {
        torch::NoGradGuard no_grad;
        fake = setup.generate(idx);
      }
      opt_disc.zero_grad();
      auto d = disc_loss(critic, target, fake, last, config.lambda, rng);
      check_finite(d.item(), "critic loss", step);
      d.value.backward();
      opt_disc.step();
      notify(hooks, SubStep::disc, false, setup.models);
      ++summary.disc_updates;

      LogRow row;
      row.step = step;
      row.stage = Stage::II;
      row.d_loss = d.item();
      row.gp = d.breakdown.at("gp");
      row.lr = lr;
      summary.mean_d_loss += *row.d_loss;

      if (step % k == k - 1) {
        notify(hooks, SubStep::gen, true, setup.models);
        opt_gen.zero_grad();
        auto refined = setup.generate(idx);
        auto adv = rn_adv_loss(critic, refined, last);
        auto total = adv.value;
        if (config.aux_pixel_loss) {
          total = total + config.aux_pixel_weight * (refined - target).abs().mean();
        }
        check_finite(total.item<double>(), "generator loss", step);
        total.backward();
        opt_gen.step();
        notify(hooks, SubStep::gen, false, setup.models);
        row.rn_adv = adv.item();
        summary.mean_rn_adv += *row.rn_adv;
        ++summary.gen_updates;
      }
      emit(hooks, row);
      result.log.push_back(row);
      ++step;
    }
    if (summary.disc_updates > 0) summary.mean_d_loss /= static_cast<double>(summary.disc_updates);
    if (summary.gen_updates > 0) summary.mean_rn_adv /= static_cast<double>(summary.gen_updates);
    if (!parameters_finite(*setup.generator) || !parameters_finite(*disc)) {
      throw TrainingFailure("stage II: non-finite parameters after epoch " + std::to_string(epoch));
    }
    if (hooks.log) {
      *hooks.log << "epoch=" << epoch << " stage=II d_loss_mean=" << fmt_value(summary.mean_d_loss)
                 << " rn_adv_mean=" << fmt_value(summary.mean_rn_adv)
                 << " disc_updates=" << summary.disc_updates << " gen_updates=" << summary.gen_updates
                 << "\n";
    }
    result.epochs.push_back(summary);
    if (hooks.on_epoch_end) {
      hooks.on_epoch_end(snapshot(epoch + 1, step, optimizer_bytes(opt_gen), optimizer_bytes(opt_disc),
                                  rng_bytes(rng)));
    }
  }
  result.checkpoint = snapshot(std::max(state.start_epoch, config.stage2_epochs), step,
                               optimizer_bytes(opt_gen), optimizer_bytes(opt_disc), rng_bytes(rng));
  return result;
}

torch::Tensor stack_targets(std::span<const SampleWindow> train) {
  std::vector<torch::Tensor> t;
  t.reserve(train.size());
  for (const auto& w : train) t.push_back(w.target.pixels());
  return torch::stack(t);
}

torch::Tensor stack_last(std::span<const SampleWindow> train) {
  std::vector<torch::Tensor> t;
  t.reserve(train.size());
  for (const auto& w : train) t.push_back(w.inputs.back().pixels());
  return torch::stack(t);
}

torch::Tensor stack_inputs(std::span<const SampleWindow> train) {
  std::vector<torch::Tensor> t;
  t.reserve(train.size());
  for (const auto& w : train) t.push_back(stack_channels(w.inputs));
  return torch::stack(t);
}

}  // namespace

TrainResult train_stage2(const TrainConfig& config, std::span<const SampleWindow> train,
                         const Checkpoint& stage1, const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  require(stage1.stage == Stage::I && stage1.variant == "dggan",
          "stage II requires a stage-I checkpoint");
  require(stage1.models.cfg && stage1.models.dgg, "stage II: stage-I checkpoint lacks CFG/DGG");
  if (train.empty()) throw DataError("stage II: training set is empty");
  apply_determinism(config);
  const Resolution res = train.front().target.resolution();
  require(res == stage1.resolution, "stage II: dataset resolution differs from stage-I checkpoint");

  Generator cfg = clone_net(stage1.models.cfg);
  Generator dgg = clone_net(stage1.models.dgg);
  for (auto* net : {&cfg, &dgg}) {
    (*net)->eval();
    for (auto& p : (*net)->parameters()) p.set_requires_grad(false);
  }

  // The stage-I networks are frozen, so their outputs are computed once.
  const auto inputs = stack_inputs(train);
  const auto target = stack_targets(train);
  const auto last = stack_last(train);
  torch::Tensor coarse, guided;
  {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> c, g;
    for (int64_t i = 0; i < inputs.size(0); i += 256) {
      const auto chunk = inputs.slice(0, i, std::min<int64_t>(i + 256, inputs.size(0)));
      c.push_back(cfg->forward(chunk));
      g.push_back(dgg->forward(chunk));
    }
    coarse = torch::cat(c);
    guided = torch::clamp(2.0 * torch::cat(g) + last, -1.0, 1.0);
  }

  ModelSet fresh = build_models(config, res);
  RefineNet rn = fresh.rn;
  Critic disc = fresh.disc;
  AdversarialState state;
  if (resume) {
    require(resume->stage == Stage::II && resume->variant == "dggan",
            "stage II: resume checkpoint must be a stage-II checkpoint");
    rn = clone_net(resume->models.rn);
    disc = clone_net(resume->models.disc);
    state = {resume->epoch, resume->step, resume->generator_optimizer, resume->critic_optimizer,
             resume->rng_state};
  }

  AdversarialSetup setup;
  setup.generate = [&](const std::vector<std::size_t>& idx) {
    return rn->forward(torch::cat({index_rows(coarse, idx), index_rows(guided, idx)}, 1));
  };
  setup.generator_params = rn->parameters();
  setup.generator = rn.ptr().get();
  setup.models = {cfg, dgg, rn, disc};
  setup.target = target;
  setup.last = last;

  auto snapshot = [&](int epoch, int64_t step, const std::string& og, const std::string& od,
                      const std::string& rs) {
    Checkpoint c;
    c.stage = Stage::II;
    c.epoch = epoch;
    c.step = step;
    c.config = config;
    c.resolution = res;
    c.models = {cfg, dgg, rn, disc};
    c.generator_optimizer = og;
    c.critic_optimizer = od;
    c.rng_state = rs;
    return c;
  };
  return adversarial_loop(config, setup, disc, hooks, state, snapshot);
}

TrainResult train_cfgan(const TrainConfig& config, std::span<const SampleWindow> train,
                        const TrainHooks& hooks) {
  config.validate();
  if (train.empty()) throw DataError("CFGAN: training set is empty");
  apply_determinism(config);
  const Resolution res = train.front().target.resolution();
  ModelSet fresh = build_models(config, res);
  Generator cfg = fresh.cfg;
  Critic disc = fresh.disc;
  const auto inputs = stack_inputs(train);

  AdversarialSetup setup;
  setup.generate = [&](const std::vector<std::size_t>& idx) {
    return cfg->forward(index_rows(inputs, idx));
  };
  setup.generator_params = cfg->parameters();
  setup.generator = cfg.ptr().get();
  setup.models.cfg = cfg;
  setup.models.disc = disc;
  setup.target = stack_targets(train);
  setup.last = stack_last(train);

  auto snapshot = [&](int epoch, int64_t step, const std::string& og, const std::string& od,
                      const std::string& rs) {
    Checkpoint c;
    c.stage = Stage::II;
    c.variant = "cfgan";
    c.epoch = epoch;
    c.step = step;
    c.config = config;
    c.resolution = res;
    c.models.cfg = cfg;
    c.models.disc = disc;
    c.generator_optimizer = og;
    c.critic_optimizer = od;
    c.rng_state = rs;
    return c;
  };
  return adversarial_loop(config, setup, disc, hooks, AdversarialState{}, snapshot);
}

}  // namespace dggan
