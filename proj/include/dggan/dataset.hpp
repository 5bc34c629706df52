#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dggan/frame.hpp"

namespace dggan {

enum class DataSource { synthetic, frame_directory };

std::string to_string(DataSource source);
DataSource parse_data_source(const std::string& text);

/// Everything needed to reproduce a dataset. For the synthetic source the
/// videos are a pure function of these fields.
struct DatasetManifest {
  DataSource source = DataSource::synthetic;
  uint64_t seed = 0;
  int num_sequences = 2000;
  int frames_per_sequence = 10;
  Resolution resolution{32, 32};
  int window_stride = 5;

  // Motion knobs of the synthetic generator, in pixels per frame. Raising
  // min_speed/max_speed widens the gap between copying the last frame and
  // any motion-aware predictor; below ~2 px/frame the two are hard to tell
  // apart at 32x32.
  double min_speed = 2.0;
  double max_speed = 4.0;
  int min_shapes = 1;
  int max_shapes = 3;
  double scroll_probability = 0.5;
  double max_scroll_speed = 0.25;

  /// Throws ConfigError on an invalid field.
  void validate() const;
};

struct SampleWindow {
  std::vector<Frame> inputs;  // I_1 .. I_T
  Frame target;               // I_{T+1}
  torch::Tensor diff_target;  // I_{T+1} - I_T, entries in [-2, 2]
};

/// A batch of windows stacked for the networks.
struct WindowBatch {
  torch::Tensor inputs;       // (B, 3T, H, W)
  torch::Tensor last;         // (B, 3, H, W), I_T
  torch::Tensor target;       // (B, 3, H, W), I_{T+1}
  torch::Tensor diff_target;  // (B, 3, H, W)

  int64_t size() const { return inputs.size(0); }
};

/// One synthetic video; `index` selects the sequence within the manifest.
Video generate_synthetic_video(const DatasetManifest& manifest, int index);
std::vector<Video> generate_synthetic(const DatasetManifest& manifest);

/// floor((L - T) / stride) + 1 for L >= T + 1, else 0.
std::size_t window_count(std::size_t video_length, int history, int stride);

/// Sliding windows starting at 0, stride, 2*stride, ...; overrunning windows are dropped.
std::vector<SampleWindow> window_samples(const Video& video, int history, int stride);
std::vector<SampleWindow> window_all(std::span<const Video> videos, int history, int stride);

WindowBatch stack_windows(std::span<const SampleWindow> windows,
                          std::span<const std::size_t> indices);
WindowBatch stack_windows(std::span<const SampleWindow> windows);

/// Reads per-video subdirectories of 8-bit RGB images (lexicographic order).
/// Unreadable images skip their video with a warning; an empty root is a DataError.
std::vector<Video> load_frame_directory(const std::filesystem::path& root,
                                        const DatasetManifest& manifest);

/// Binary cache: one little-endian float32 file per video plus manifest.json.
void write_dataset_cache(const std::filesystem::path& dir, const DatasetManifest& manifest,
                         std::span<const Video> videos);
std::vector<Video> read_dataset_cache(const std::filesystem::path& dir,
                                      DatasetManifest* manifest = nullptr);

/// Sequence-level 90/10 split decided by a seed-stable hash of the index.
struct SequenceSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
bool is_test_sequence(uint64_t seed, std::size_t index);
SequenceSplit split_sequences(std::size_t count, uint64_t seed);

uint64_t mix_seed(uint64_t seed, uint64_t salt);

}  // namespace dggan
