#include "dggan/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "dggan/config.hpp"
#include "dggan/dataset.hpp"
#include "dggan/errors.hpp"
#include "dggan/image_io.hpp"
#include "dggan/inference.hpp"
#include "dggan/metrics.hpp"
#include "dggan/trainer.hpp"

namespace dggan {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  bool deterministic = false;
  std::string stage1_ckpt;
  std::string ckpt;
  std::string cfgan_ckpt;
  std::string horizons;
  std::string variant;
  std::vector<std::string> settings;
  int index = 0;
  int frames = 0;
};

class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

fs::path runs_root() {
  if (const char* env = std::getenv("DGGAN_RUNS_DIR"); env && *env) return env;
  return "runs";
}

RunConfig resolve_config(const Options& o) {
  RunConfig rc = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_setting(rc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) {
    rc.train.seed = *o.seed;
    rc.data.seed = *o.seed;
  }
  if (o.deterministic) rc.train.deterministic = true;
  if (!o.horizons.empty()) rc.horizons = parse_int_list(o.horizons);
  rc.data.validate();
  rc.train.validate();
  return rc;
}

fs::path prepare_output(const Options& o, const RunConfig& rc, const std::string& command) {
  fs::path out = o.out_dir;
  if (out.empty()) {
    // run id = timestamp + seed, with a counter when two runs share a second
    const std::string id = timestamp() + "-s" + std::to_string(rc.train.seed);
    out = runs_root() / id;
    for (int n = 1; fs::exists(out); ++n) out = runs_root() / (id + "-" + std::to_string(n));
  }
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "resolved_config.txt");
    cfg << serialize_config(rc);
  }
  std::ofstream manifest(out / "run_manifest.txt");
  manifest << "command = " << command << "\n";
  manifest << "created = " << timestamp() << "\n";
  manifest << "config_path = " << o.config_path << "\n";
  manifest << "output_dir = " << out.string() << "\n";
  if (!o.stage1_ckpt.empty()) manifest << "stage1_ckpt = " << o.stage1_ckpt << "\n";
  if (!o.ckpt.empty()) manifest << "ckpt = " << o.ckpt << "\n";
  if (!o.cfgan_ckpt.empty()) manifest << "cfgan_ckpt = " << o.cfgan_ckpt << "\n";
  if (!rc.data_dir.empty()) manifest << "data_dir = " << rc.data_dir.string() << "\n";
  for (const auto& kv : o.settings) manifest << "set = " << kv << "\n";
  return out;
}

std::vector<Video> load_videos(const RunConfig& rc) {
  if (rc.data_dir.empty()) return generate_synthetic(rc.data);
  if (rc.data.source == DataSource::frame_directory) return load_frame_directory(rc.data_dir, rc.data);
  return read_dataset_cache(rc.data_dir);
}

struct SplitVideos {
  std::vector<Video> train;
  std::vector<Video> test;
};

SplitVideos split_videos(std::vector<Video> videos, uint64_t seed) {
  const auto split = split_sequences(videos.size(), seed);
  SplitVideos s;
  for (auto i : split.train) s.train.push_back(std::move(videos[i]));
  for (auto i : split.test) s.test.push_back(std::move(videos[i]));
  return s;
}

std::vector<SampleWindow> training_windows(const RunConfig& rc) {
  auto split = split_videos(load_videos(rc), rc.data.seed);
  auto windows = window_all(split.train, rc.train.history, rc.data.window_stride);
  if (windows.empty()) throw DataError("training split produced no windows");
  return windows;
}

// Writes a checkpoint per epoch under `out`, keeping only the newest one.
TrainHooks checkpoint_hooks(const fs::path& out, Stage stage, std::ostream& log, fs::path& latest) {
  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_epoch_end = [&out, stage, &latest](const Checkpoint& c) {
    const fs::path dir = out / checkpoint_dir_name(stage, c.epoch);
    save_checkpoint(c, dir);
    if (!latest.empty() && latest != dir) fs::remove_all(latest);
    latest = dir;
  };
  return hooks;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  if (rc.data.source != DataSource::synthetic) throw ConfigError("gen-data requires source = synthetic");
  const fs::path dir = prepare_output(o, rc, "gen-data");
  const auto videos = generate_synthetic(rc.data);
  write_dataset_cache(dir / "data", rc.data, videos);
  out << "wrote " << videos.size() << " sequences to " << (dir / "data").string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, const std::string& command, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  if (command == "train-stage2" && o.stage1_ckpt.empty()) {
    throw UsageError("train-stage2 requires --stage1-ckpt PATH");
  }
  std::optional<Checkpoint> stage1;
  if (command == "train-stage2") {
    if (!fs::exists(fs::path(o.stage1_ckpt) / "meta.txt")) {
      throw UsageError("--stage1-ckpt: no checkpoint at " + o.stage1_ckpt);
    }
    stage1 = load_checkpoint(o.stage1_ckpt);
  }
  const fs::path dir = prepare_output(o, rc, command);
  const auto windows = training_windows(rc);
  std::ofstream log(dir / "train.log");
  fs::path latest;
  const Stage stage = command == "train-stage1" ? Stage::I : Stage::II;
  const TrainHooks hooks = checkpoint_hooks(dir, stage, log, latest);

  TrainResult result;
  try {
    if (command == "train-stage1") {
      result = train_stage1(rc.train, windows, hooks);
    } else if (command == "train-stage2") {
      result = train_stage2(rc.train, windows, *stage1, hooks);
    } else {
      result = train_cfgan(rc.train, windows, hooks);
    }
  } catch (const TrainingFailure& e) {
    log.flush();
    throw TrainingFailure(std::string(e.what()) +
                          (latest.empty() ? "" : "; last good checkpoint: " + latest.string()));
  }
  const fs::path final_dir = dir / checkpoint_dir_name(stage, result.checkpoint.epoch);
  if (latest != final_dir) save_checkpoint(result.checkpoint, final_dir);
  out << "checkpoint: " << final_dir.string() << "\n";
  return kExitOk;
}

Checkpoint require_checkpoint(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string("missing ") + flag + " PATH");
  if (!fs::exists(fs::path(path) / "meta.txt")) {
    throw UsageError(std::string(flag) + ": no checkpoint at " + path);
  }
  return load_checkpoint(path);
}

std::vector<Video> test_videos(const RunConfig& rc) {
  auto split = split_videos(load_videos(rc), rc.data.seed);
  if (split.test.empty()) throw DataError("test split is empty");
  return std::move(split.test);
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  if (rc.horizons.empty()) throw UsageError("--horizons must list at least one horizon");
  for (const int h : rc.horizons) {
    if (h < 1) throw UsageError("--horizons: every horizon must be >= 1");
  }
  std::optional<Variant> only;
  if (!o.variant.empty()) only = parse_variant(o.variant);

  std::optional<Checkpoint> main_ckpt, cfgan_ckpt;
  if (!o.ckpt.empty()) main_ckpt = require_checkpoint(o.ckpt, "--ckpt");
  if (!o.cfgan_ckpt.empty()) {
    cfgan_ckpt = require_checkpoint(o.cfgan_ckpt, "--cfgan-ckpt");
    if (cfgan_ckpt->variant != "cfgan") throw UsageError("--cfgan-ckpt is not a CFGAN checkpoint");
  }
  std::vector<VariantModels> variants;
  auto wanted = [&](Variant v) { return !only || *only == v; };
  if (wanted(Variant::COPY)) variants.push_back({Variant::COPY, nullptr});
  if (wanted(Variant::CFGAN) && cfgan_ckpt) variants.push_back({Variant::CFGAN, &cfgan_ckpt->models});
  if (main_ckpt && main_ckpt->variant == "dggan") {
    if (wanted(Variant::DGN)) variants.push_back({Variant::DGN, &main_ckpt->models});
    if (wanted(Variant::DGGAN)) {
      if (main_ckpt->stage != Stage::II) {
        if (only) throw UsageError("DGGAN evaluation needs a stage-II checkpoint");
      } else {
        variants.push_back({Variant::DGGAN, &main_ckpt->models});
      }
    }
  }
  if (variants.empty()) throw UsageError("no variant can be evaluated with the given checkpoints");

  const fs::path dir = prepare_output(o, rc, "evaluate");
  const auto videos = test_videos(rc);
  const int max_h = *std::max_element(rc.horizons.begin(), rc.horizons.end());
  const auto windows = eval_windows(videos, rc.train.history, rc.data.window_stride, max_h);
  if (!windows.inputs.defined()) throw DataError("test split has no window long enough for horizon " + std::to_string(max_h));
  const auto report = evaluate_variants(windows, rc.horizons, variants);
  std::ofstream file(dir / "report.txt");
  write_report(report, file);
  out << format_table(report);
  out << "report: " << (dir / "report.txt").string() << "\n";
  return kExitOk;
}

struct SampleSource {
  std::vector<Frame> inputs;
  std::vector<Frame> future;
};

SampleSource pick_sample(const RunConfig& rc, int index, int future_frames) {
  const auto videos = test_videos(rc);
  std::vector<SampleSource> all;
  const auto span = static_cast<std::size_t>(rc.train.history + future_frames);
  for (const auto& v : videos) {
    for (std::size_t s = 0; s + span <= v.size(); s += static_cast<std::size_t>(rc.data.window_stride)) {
      if (static_cast<int>(all.size()) > index) break;
      SampleSource src;
      src.inputs.assign(v.begin() + static_cast<std::ptrdiff_t>(s),
                        v.begin() + static_cast<std::ptrdiff_t>(s + rc.train.history));
      src.future.assign(v.begin() + static_cast<std::ptrdiff_t>(s + rc.train.history),
                        v.begin() + static_cast<std::ptrdiff_t>(s + span));
      all.push_back(std::move(src));
    }
  }
  if (index < 0 || index >= static_cast<int>(all.size())) {
    throw UsageError("--index " + std::to_string(index) + " out of range (test split has " +
                     std::to_string(all.size()) + " samples)");
  }
  return all[static_cast<std::size_t>(index)];
}

int cmd_render_grid(const Options& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  const Checkpoint ckpt = require_checkpoint(o.ckpt, "--ckpt");
  if (ckpt.variant != "dggan" || ckpt.stage != Stage::II || !ckpt.models.rn) throw UsageError("render-grid needs a stage-II DGGAN checkpoint");
  const auto sample = pick_sample(rc, o.index, 1);
  const fs::path dir = prepare_output(o, rc, "render-grid");
  const auto prediction = predict_one(ckpt.models.cfg, ckpt.models.dgg, ckpt.models.rn, sample.inputs);
  const auto grid = render_grid(sample.inputs, sample.future.front(), prediction);
  const fs::path file = dir / ("grid_" + std::to_string(o.index) + ".png");
  write_image(file, grid);
  out << "grid: " << file.string() << "\n";
  return kExitOk;
}

int cmd_rollout(const Options& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o);
  const Checkpoint ckpt = require_checkpoint(o.ckpt, "--ckpt");
  if (ckpt.variant != "dggan" || ckpt.stage != Stage::II || !ckpt.models.rn) throw UsageError("rollout needs a stage-II DGGAN checkpoint");
  const int n = o.frames > 0 ? o.frames
                             : (rc.horizons.empty() ? 1 : *std::max_element(rc.horizons.begin(), rc.horizons.end()));
  if (n < 1) throw UsageError("--frames must be >= 1");
  const auto sample = pick_sample(rc, o.index, n);
  const fs::path dir = prepare_output(o, rc, "rollout");
  const auto r = rollout(ckpt.models.cfg, ckpt.models.dgg, ckpt.models.rn, sample.inputs, n);
  for (int k = 0; k < n; ++k) {
    write_image(dir / ("pred_" + std::to_string(k + 1) + ".png"), r.frames[k].pixels());
    write_image(dir / ("truth_" + std::to_string(k + 1) + ".png"), sample.future[k].pixels());
    out << "horizon=" << (k + 1) << " ssim=" << ssim(r.frames[k], sample.future[k])
        << " psnr=" << psnr(r.frames[k], sample.future[k]) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Difference-guided GAN for next-frame video prediction", "dggan"};
  app.require_subcommand(1);
  Options o;
  std::string seed_text;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Config file (key = value lines)");
    sub->add_option("--out", o.out_dir, "Output directory (default: $DGGAN_RUNS_DIR or runs/<run-id>)");
    sub->add_option("--seed", seed_text, "Seed for data and training");
    sub->add_flag("--deterministic", o.deterministic, "Single-threaded deterministic kernels");
    sub->add_option("--set", o.settings, "Override one config key (key=value)");
  };
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset");
  common(gen);
  auto* s1 = app.add_subcommand("train-stage1", "Train CFG and DGG on pixel losses");
  common(s1);
  auto* s2 = app.add_subcommand("train-stage2", "Train RN adversarially with CFG/DGG frozen");
  common(s2);
  s2->add_option("--stage1-ckpt", o.stage1_ckpt, "Stage-I checkpoint directory");
  auto* cf = app.add_subcommand("train-cfgan", "Train the CFGAN ablation");
  common(cf);
  auto* ev = app.add_subcommand("evaluate", "Score Copy/CFGAN/DGN/DGGAN on the test split");
  common(ev);
  ev->add_option("--ckpt", o.ckpt, "Stage-I or stage-II checkpoint directory");
  ev->add_option("--cfgan-ckpt", o.cfgan_ckpt, "CFGAN checkpoint directory");
  ev->add_option("--horizons", o.horizons, "Comma-separated horizons, e.g. 1,2");
  ev->add_option("--variant", o.variant, "Evaluate one variant only (copy, cfgan, dgn, dggan)");
  auto* ro = app.add_subcommand("rollout", "Autoregressive multi-frame prediction for one test sample");
  common(ro);
  ro->add_option("--ckpt", o.ckpt, "Stage-II checkpoint directory");
  ro->add_option("--index", o.index, "Test sample index");
  ro->add_option("--frames", o.frames, "Number of frames to generate");
  ro->add_option("--horizons", o.horizons, "Comma-separated horizons (largest is generated)");
  auto* rg = app.add_subcommand("render-grid", "Render the prediction panel for one test sample");
  common(rg);
  rg->add_option("--ckpt", o.ckpt, "Stage-II checkpoint directory");
  rg->add_option("--index", o.index, "Test sample index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (!seed_text.empty()) {
      try {
        o.seed = std::stoull(seed_text);
      } catch (const std::exception&) {
        throw UsageError("--seed expects a non-negative integer");
      }
    }
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (s1->parsed()) return cmd_train(o, "train-stage1", out);
    if (s2->parsed()) return cmd_train(o, "train-stage2", out);
    if (cf->parsed()) return cmd_train(o, "train-cfgan", out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (ro->parsed()) return cmd_rollout(o, out);
    if (rg->parsed()) return cmd_render_grid(o, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingFailure& e) {
    err << "training failure: " << e.what() << "\n";
    return kExitTraining;
  }
  return kExitUsage;
}

}  // namespace dggan
