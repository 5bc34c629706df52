#include "dggan/checkpoint.hpp"

#include <unistd.h>

#include <fstream>
#include <map>
#include <sstream>

#include "dggan/config.hpp"
#include "dggan/errors.hpp"
#include "dggan/trainer.hpp"

namespace dggan {

namespace fs = std::filesystem;

std::string to_string(Stage stage) { return stage == Stage::I ? "I" : "II"; }

Stage parse_stage(const std::string& text) {
  if (text == "I") return Stage::I;
  if (text == "II") return Stage::II;
  throw ConfigError("unknown stage '" + text + "'");
}

std::string checkpoint_dir_name(Stage stage, int epoch) {
  return "ckpt_stage" + to_string(stage) + "_" + std::to_string(epoch);
}

std::string module_bytes(const torch::nn::Module& module) {
  torch::serialize::OutputArchive archive;
  module.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

namespace {

std::string describe(const NetworkSpec& spec) {
  std::ostringstream s;
  s << "kind=" << to_string(spec.kind) << " in_channels=" << spec.in_channels
    << " base_width=" << spec.base_width << " resolution=" << spec.input_resolution.height << "x"
    << spec.input_resolution.width << " leaky_slope=" << spec.leaky_slope;
  return s.str();
}

void save_module(const torch::nn::Module& module, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  out << module_bytes(module);
  if (!out) throw DataError("cannot write " + file.string());
}

void load_module(torch::nn::Module& module, const fs::path& file) {
  torch::serialize::InputArchive archive;
  archive.load_from(file.string());
  module.load(archive);
}

void write_blob(const fs::path& file, const std::string& bytes) {
  std::ofstream out(file, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + file.string());
}

std::string read_blob(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return {};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  const fs::path tmp = dir.string() + ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  {
    std::ofstream meta(tmp / "meta.txt");
    meta << "stage = " << to_string(ckpt.stage) << "\n";
    meta << "variant = " << ckpt.variant << "\n";
    meta << "epoch = " << ckpt.epoch << "\n";
    meta << "step = " << ckpt.step << "\n";
    meta << "resolution = " << ckpt.resolution.height << "x" << ckpt.resolution.width << "\n";
    meta << "init_scheme = " << kInitScheme << "\n";
    const auto& m = ckpt.models;
    if (m.cfg) meta << "net.cfg = " << describe(m.cfg->spec()) << "\n";
    if (m.dgg) meta << "net.dgg = " << describe(m.dgg->spec()) << "\n";
    if (m.rn) meta << "net.rn = " << describe(m.rn->spec()) << "\n";
    if (m.disc) meta << "net.disc = " << describe(m.disc->spec()) << "\n";
    meta << "[config]\n";
    meta << serialize_train_config(ckpt.config);
    if (!meta) throw DataError("cannot write checkpoint metadata in " + tmp.string());
  }
  const auto& m = ckpt.models;
  if (m.cfg) save_module(*m.cfg, tmp / "cfg.pt");
  if (m.dgg) save_module(*m.dgg, tmp / "dgg.pt");
  if (m.rn) save_module(*m.rn, tmp / "rn.pt");
  if (m.disc) save_module(*m.disc, tmp / "disc.pt");
  if (!ckpt.generator_optimizer.empty()) write_blob(tmp / "opt_gen.pt", ckpt.generator_optimizer);
  if (!ckpt.critic_optimizer.empty()) write_blob(tmp / "opt_disc.pt", ckpt.critic_optimizer);
  write_blob(tmp / "rng.txt", ckpt.rng_state);

  fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream meta(dir / "meta.txt");
  if (!meta) throw DataError("not a checkpoint directory: " + dir.string());
  std::map<std::string, std::string> header;
  std::ostringstream config_text;
  bool in_config = false;
  for (std::string line; std::getline(meta, line);) {
    if (line == "[config]") {
      in_config = true;
      continue;
    }
    if (in_config) {
      config_text << line << "\n";
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) header[line.substr(0, eq)] = line.substr(eq + 3);
  }
  std::istringstream config_in(config_text.str());
  const RunConfig rc = parse_config(config_in);

  Checkpoint ckpt;
  try {
    ckpt.stage = parse_stage(header.at("stage"));
    ckpt.variant = header.at("variant");
    ckpt.epoch = std::stoi(header.at("epoch"));
    ckpt.step = std::stoll(header.at("step"));
    const auto& res = header.at("resolution");
    const auto x = res.find('x');
    ckpt.resolution = {std::stoll(res.substr(0, x)), std::stoll(res.substr(x + 1))};
  } catch (const std::exception& e) {
    throw DataError("malformed checkpoint metadata in " + dir.string() + ": " + e.what());
  }
  ckpt.config = rc.train;

  ModelSet full = build_models(ckpt.config, ckpt.resolution);
  auto restore = [&](auto& slot, auto& built, const char* file) {
    if (fs::exists(dir / file)) {
      load_module(*built, dir / file);
      slot = built;
    }
  };
  restore(ckpt.models.cfg, full.cfg, "cfg.pt");
  restore(ckpt.models.dgg, full.dgg, "dgg.pt");
  restore(ckpt.models.rn, full.rn, "rn.pt");
  restore(ckpt.models.disc, full.disc, "disc.pt");
  ckpt.generator_optimizer = read_blob(dir / "opt_gen.pt");
  ckpt.critic_optimizer = read_blob(dir / "opt_disc.pt");
  ckpt.rng_state = read_blob(dir / "rng.txt");
  return ckpt;
}

}  // namespace dggan
