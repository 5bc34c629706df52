#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "dggan/checkpoint.hpp"
#include "dggan/dataset.hpp"

namespace dggan {

/// Resolved configuration of one run: dataset manifest, training
/// hyperparameters and evaluation horizons.
struct RunConfig {
  DatasetManifest data;
  TrainConfig train;
  std::filesystem::path data_dir;  // cached dataset or frame directory; empty = generate in memory
  std::vector<int> horizons{1, 2};
};

/// Flat `key = value` document; `#` starts a comment.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& file);
std::string serialize_config(const RunConfig& config);
/// Only the TrainConfig keys, as stored in checkpoint metadata.
std::string serialize_train_config(const TrainConfig& train);

/// Sets one key; throws ConfigError naming the valid keys for an unknown one.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
const std::vector<std::string>& config_keys();

std::vector<int> parse_int_list(const std::string& text);

}  // namespace dggan
