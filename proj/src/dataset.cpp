#include "dggan/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "dggan/errors.hpp"
#include "dggan/image_io.hpp"

namespace dggan {

namespace fs = std::filesystem;

std::string to_string(DataSource source) {
  return source == DataSource::synthetic ? "synthetic" : "frame_directory";
}

DataSource parse_data_source(const std::string& text) {
  if (text == "synthetic") return DataSource::synthetic;
  if (text == "frame_directory") return DataSource::frame_directory;
  throw ConfigError("unknown data source '" + text + "' (expected synthetic or frame_directory)");
}

void DatasetManifest::validate() const {
  if (resolution.height <= 0 || resolution.width <= 0 || resolution.height % 8 != 0 ||
      resolution.width % 8 != 0) {
    throw ConfigError("resolution " + std::to_string(resolution.height) + "x" +
                      std::to_string(resolution.width) + " must be positive and divisible by 8");
  }
  if (window_stride < 1) throw ConfigError("window_stride must be >= 1");
  if (num_sequences < 0) throw ConfigError("num_sequences must be >= 0");
  if (frames_per_sequence < 1) throw ConfigError("frames_per_sequence must be >= 1");
  if (min_speed < 0.0 || max_speed < min_speed) {
    throw ConfigError("speeds must satisfy 0 <= min_speed <= max_speed");
  }
  if (min_shapes < 1 || max_shapes < min_shapes) {
    throw ConfigError("shape counts must satisfy 1 <= min_shapes <= max_shapes");
  }
  if (scroll_probability < 0.0 || scroll_probability > 1.0) {
    throw ConfigError("scroll_probability must lie in [0, 1]");
  }
  if (max_scroll_speed < 0.0) throw ConfigError("max_scroll_speed must be >= 0");
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  // splitmix64 finalizer over the combined value
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

enum class ShapeKind { square, circle };

struct Shape {
  ShapeKind kind;
  double half_size;
  double x, y;
  double vx, vy;
  std::array<double, 3> color;
};

struct Background {
  std::array<double, 3> base;
  std::array<double, 3> amplitude;
  std::array<double, 3> phase;
  int freq_x, freq_y;
  double scroll_x, scroll_y;
};

double overlap(double lo_a, double hi_a, double lo_b, double hi_b) {
  return std::max(0.0, std::min(hi_a, hi_b) - std::max(lo_a, lo_b));
}

// Fraction of pixel (row, col) covered by the shape.
double coverage(const Shape& s, int row, int col) {
  if (s.kind == ShapeKind::square) {
    return overlap(col, col + 1.0, s.x - s.half_size, s.x + s.half_size) *
           overlap(row, row + 1.0, s.y - s.half_size, s.y + s.half_size);
  }
  constexpr int kSub = 4;
  int inside = 0;
  const double r2 = s.half_size * s.half_size;
  for (int i = 0; i < kSub; ++i) {
    for (int j = 0; j < kSub; ++j) {
      const double px = col + (j + 0.5) / kSub - s.x;
      const double py = row + (i + 0.5) / kSub - s.y;
      inside += (px * px + py * py <= r2) ? 1 : 0;
    }
  }
  return static_cast<double>(inside) / (kSub * kSub);
}

// Moves one coordinate by one frame, reflecting elastically off [lo, hi].
void advance(double& p, double& v, double lo, double hi) {
  p += v;
  for (int guard = 0; guard < 4 && (p < lo || p > hi); ++guard) {
    if (p < lo) {
      p = 2.0 * lo - p;
      v = -v;
    } else if (p > hi) {
      p = 2.0 * hi - p;
      v = -v;
    }
  }
  p = std::clamp(p, lo, hi);
}

}  // namespace

Video generate_synthetic_video(const DatasetManifest& manifest, int index) {
  manifest.validate();
  const int H = static_cast<int>(manifest.resolution.height);
  const int W = static_cast<int>(manifest.resolution.width);
  std::mt19937_64 rng(mix_seed(manifest.seed, static_cast<uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Background bg{};
  for (int c = 0; c < 3; ++c) {
    bg.base[c] = uniform(-0.9, -0.35);
    bg.amplitude[c] = uniform(0.03, 0.2);
    bg.phase[c] = uniform(0.0, 2.0 * std::numbers::pi);
  }
  bg.freq_x = 1 + static_cast<int>(rng() % 2);
  bg.freq_y = 1 + static_cast<int>(rng() % 2);
  const bool scrolls = unit(rng) < manifest.scroll_probability;
  bg.scroll_x = scrolls ? uniform(-manifest.max_scroll_speed, manifest.max_scroll_speed) : 0.0;
  bg.scroll_y = scrolls ? uniform(-manifest.max_scroll_speed, manifest.max_scroll_speed) : 0.0;

  const int shape_count =
      manifest.min_shapes + static_cast<int>(rng() % (manifest.max_shapes - manifest.min_shapes + 1));
  std::vector<Shape> shapes;
  for (int k = 0; k < shape_count; ++k) {
    Shape s{};
    s.kind = (rng() % 2 == 0) ? ShapeKind::square : ShapeKind::circle;
    s.half_size = uniform(H / 12.0, H / 6.0);
    s.x = uniform(s.half_size, W - s.half_size);
    s.y = uniform(s.half_size, H - s.half_size);
    const double angle = uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = uniform(manifest.min_speed, manifest.max_speed);
    s.vx = speed * std::cos(angle);
    s.vy = speed * std::sin(angle);
    for (int c = 0; c < 3; ++c) s.color[c] = uniform(-0.1, 1.0);
    shapes.push_back(s);
  }

  Video video;
  video.reserve(manifest.frames_per_sequence);
  std::vector<float> pixels(static_cast<std::size_t>(3 * H * W));
  std::vector<double> plane(static_cast<std::size_t>(3 * H * W));
  for (int t = 0; t < manifest.frames_per_sequence; ++t) {
    for (int c = 0; c < 3; ++c) {
      for (int row = 0; row < H; ++row) {
        for (int col = 0; col < W; ++col) {
          const double u = (col + 0.5 - bg.scroll_x * t) / W;
          const double v = (row + 0.5 - bg.scroll_y * t) / H;
          const double wave =
              std::sin(2.0 * std::numbers::pi * (bg.freq_x * u + bg.freq_y * v) + bg.phase[c]);
          plane[(c * H + row) * W + col] = bg.base[c] + bg.amplitude[c] * wave;
        }
      }
    }
    for (const auto& s : shapes) {
      const int row_lo = std::max(0, static_cast<int>(std::floor(s.y - s.half_size)));
      const int row_hi = std::min(H - 1, static_cast<int>(std::ceil(s.y + s.half_size)));
      const int col_lo = std::max(0, static_cast<int>(std::floor(s.x - s.half_size)));
      const int col_hi = std::min(W - 1, static_cast<int>(std::ceil(s.x + s.half_size)));
      for (int row = row_lo; row <= row_hi; ++row) {
        for (int col = col_lo; col <= col_hi; ++col) {
          const double a = coverage(s, row, col);
          if (a <= 0.0) continue;
          for (int c = 0; c < 3; ++c) {
            double& p = plane[(c * H + row) * W + col];
            p = (1.0 - a) * p + a * s.color[c];
          }
        }
      }
    }
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const double clamped = std::clamp(plane[i], -1.0, 1.0);
      pixels[i] = static_cast<float>(std::round(clamped / kPixelQuantum) * kPixelQuantum);
    }
    video.emplace_back(torch::from_blob(pixels.data(), {3, H, W}, torch::kFloat32).clone());

    for (auto& s : shapes) {
      advance(s.x, s.vx, s.half_size, W - s.half_size);
      advance(s.y, s.vy, s.half_size, H - s.half_size);
    }
  }
  return video;
}

std::vector<Video> generate_synthetic(const DatasetManifest& manifest) {
  manifest.validate();
  if (manifest.source != DataSource::synthetic) {
    throw ConfigError("generate_synthetic requires source = synthetic");
  }
  std::vector<Video> videos;
  videos.reserve(manifest.num_sequences);
  for (int i = 0; i < manifest.num_sequences; ++i) {
    videos.push_back(generate_synthetic_video(manifest, i));
  }
  return videos;
}

std::size_t window_count(std::size_t video_length, int history, int stride) {
  require(history >= 1 && stride >= 1, "window_count: history and stride must be >= 1");
  const auto span = static_cast<std::size_t>(history) + 1;
  if (video_length < span) return 0;
  return (video_length - span) / static_cast<std::size_t>(stride) + 1;
}

std::vector<SampleWindow> window_samples(const Video& video, int history, int stride) {
  const std::size_t count = window_count(video.size(), history, stride);
  std::vector<SampleWindow> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * static_cast<std::size_t>(stride);
    SampleWindow sample;
    sample.inputs.assign(video.begin() + static_cast<std::ptrdiff_t>(start),
                         video.begin() + static_cast<std::ptrdiff_t>(start + history));
    sample.target = video[start + history];
    sample.diff_target = sample.target.pixels() - sample.inputs.back().pixels();
    windows.push_back(std::move(sample));
  }
  return windows;
}

std::vector<SampleWindow> window_all(std::span<const Video> videos, int history, int stride) {
  std::vector<SampleWindow> all;
  for (const auto& v : videos) {
    auto w = window_samples(v, history, stride);
    std::move(w.begin(), w.end(), std::back_inserter(all));
  }
  return all;
}

WindowBatch stack_windows(std::span<const SampleWindow> windows,
                          std::span<const std::size_t> indices) {
  require(!indices.empty(), "stack_windows: empty batch");
  std::vector<torch::Tensor> inputs, last, target, diff;
  for (const std::size_t i : indices) {
    require(i < windows.size(), "stack_windows: index out of range");
    const auto& w = windows[i];
    inputs.push_back(stack_channels(w.inputs));
    last.push_back(w.inputs.back().pixels());
    target.push_back(w.target.pixels());
    diff.push_back(w.diff_target);
  }
  return {torch::stack(inputs), torch::stack(last), torch::stack(target), torch::stack(diff)};
}

WindowBatch stack_windows(std::span<const SampleWindow> windows) {
  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return stack_windows(windows, all);
}

std::vector<Video> load_frame_directory(const fs::path& root, const DatasetManifest& manifest) {
  manifest.validate();
  if (!fs::is_directory(root)) throw DataError("frame directory not found: " + root.string());
  std::vector<fs::path> video_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) video_dirs.push_back(entry.path());
  }
  std::sort(video_dirs.begin(), video_dirs.end());

  std::vector<Video> videos;
  for (const auto& dir : video_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) continue;
    Video video;
    bool ok = true;
    for (const auto& file : files) {
      auto frame = read_frame(file, manifest.resolution);
      if (!frame) {
        std::cerr << "warning: skipping video " << dir.string() << ": cannot read " << file.string()
                  << "\n";
        ok = false;
        break;
      }
      video.push_back(std::move(*frame));
    }
    if (ok) videos.push_back(std::move(video));
  }
  if (videos.empty()) throw DataError("no readable videos under " + root.string());
  return videos;
}

namespace {

std::string video_file_name(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "video_%05zu.f32", index);
  return name;
}

void write_le_floats(std::ofstream& out, const torch::Tensor& t) {
  auto c = t.contiguous().to(torch::kFloat32);
  const float* data = c.data_ptr<float>();
  const auto n = static_cast<std::size_t>(c.numel());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto bits = __builtin_bswap32(std::bit_cast<uint32_t>(data[i]));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

}  // namespace

void write_dataset_cache(const fs::path& dir, const DatasetManifest& manifest,
                         std::span<const Video> videos) {
  fs::create_directories(dir);
  nlohmann::json meta;
  meta["source"] = to_string(manifest.source);
  meta["seed"] = manifest.seed;
  meta["num_sequences"] = videos.size();
  meta["frames_per_sequence"] = manifest.frames_per_sequence;
  meta["height"] = manifest.resolution.height;
  meta["width"] = manifest.resolution.width;
  meta["window_stride"] = manifest.window_stride;
  meta["min_speed"] = manifest.min_speed;
  meta["max_speed"] = manifest.max_speed;
  meta["min_shapes"] = manifest.min_shapes;
  meta["max_shapes"] = manifest.max_shapes;
  meta["scroll_probability"] = manifest.scroll_probability;
  meta["max_scroll_speed"] = manifest.max_scroll_speed;
  meta["dtype"] = "float32-le";
  meta["layout"] = "frames x 3 x height x width";
  std::vector<int64_t> lengths;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    std::ofstream out(dir / video_file_name(i), std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / video_file_name(i)).string());
    for (const auto& f : videos[i]) write_le_floats(out, f.pixels());
    lengths.push_back(static_cast<int64_t>(videos[i].size()));
  }
  meta["frames"] = lengths;
  std::ofstream side(dir / "manifest.json");
  side << meta.dump(2) << "\n";
}

std::vector<Video> read_dataset_cache(const fs::path& dir, DatasetManifest* manifest) {
  std::ifstream side(dir / "manifest.json");
  if (!side) throw DataError("no dataset manifest in " + dir.string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.source = parse_data_source(meta.at("source").get<std::string>());
  m.seed = meta.at("seed").get<uint64_t>();
  m.num_sequences = meta.at("num_sequences").get<int>();
  m.frames_per_sequence = meta.at("frames_per_sequence").get<int>();
  m.resolution = {meta.at("height").get<int64_t>(), meta.at("width").get<int64_t>()};
  m.window_stride = meta.at("window_stride").get<int>();
  m.min_speed = meta.value("min_speed", m.min_speed);
  m.max_speed = meta.value("max_speed", m.max_speed);
  m.min_shapes = meta.value("min_shapes", m.min_shapes);
  m.max_shapes = meta.value("max_shapes", m.max_shapes);
  m.scroll_probability = meta.value("scroll_probability", m.scroll_probability);
  m.max_scroll_speed = meta.value("max_scroll_speed", m.max_scroll_speed);
  const auto lengths = meta.at("frames").get<std::vector<int64_t>>();
  const int64_t H = m.resolution.height, W = m.resolution.width;

  std::vector<Video> videos;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    std::ifstream in(dir / video_file_name(i), std::ios::binary);
    if (!in) throw DataError("missing cache file " + (dir / video_file_name(i)).string());
    auto all = torch::empty({lengths[i], 3, H, W}, torch::kFloat32);
    const auto bytes = static_cast<std::streamsize>(all.numel() * sizeof(float));
    in.read(reinterpret_cast<char*>(all.data_ptr<float>()), bytes);
    if (in.gcount() != bytes) throw DataError("truncated cache file " + video_file_name(i));
    if constexpr (std::endian::native != std::endian::little) {
      auto* p = reinterpret_cast<uint32_t*>(all.data_ptr<float>());
      for (int64_t k = 0; k < all.numel(); ++k) p[k] = __builtin_bswap32(p[k]);
    }
    Video v;
    for (int64_t t = 0; t < lengths[i]; ++t) v.emplace_back(all[t].clone());
    videos.push_back(std::move(v));
  }
  if (manifest) *manifest = m;
  return videos;
}

bool is_test_sequence(uint64_t seed, std::size_t index) {
  return mix_seed(seed ^ 0x5EEDC0DEULL, index) % 10 == 0;
}

SequenceSplit split_sequences(std::size_t count, uint64_t seed) {
  SequenceSplit split;
  for (std::size_t i = 0; i < count; ++i) {
    (is_test_sequence(seed, i) ? split.test : split.train).push_back(i);
  }
  return split;
}

}  // namespace dggan
