#include "dggan/frame.hpp"

#include <algorithm>
#include <cmath>

#include "dggan/errors.hpp"

namespace dggan {

Frame::Frame(torch::Tensor pixels) : pixels_(std::move(pixels)) {
  require(pixels_.defined(), "frame: undefined tensor");
  require(pixels_.dim() == 3 && pixels_.size(0) == 3,
          "frame: expected shape (3, H, W), got " + std::to_string(pixels_.dim()) + "-d tensor");
  require(pixels_.is_floating_point(), "frame: pixels must be floating point");
}

bool Frame::in_range() const {
  return pixels_.ge(-1.0).all().item<bool>() && pixels_.le(1.0).all().item<bool>();
}

torch::Tensor quantize_pixels(const torch::Tensor& values) {
  return values.mul(1.0 / kPixelQuantum).round_().mul_(kPixelQuantum);
}

float normalize_u8(uint8_t value) {
  const double scaled = static_cast<double>(value) / 255.0 * 2.0 - 1.0;
  return static_cast<float>(std::round(scaled / kPixelQuantum) * kPixelQuantum);
}

uint8_t denormalize_u8(float value) {
  const double unit = (static_cast<double>(value) + 1.0) * 0.5 * 255.0;
  return static_cast<uint8_t>(std::clamp(std::round(unit), 0.0, 255.0));
}

torch::Tensor normalize_image(const torch::Tensor& u8) {
  auto scaled = u8.to(torch::kFloat64).div(255.0).mul(2.0).sub(1.0);
  return quantize_pixels(scaled).to(torch::kFloat32);
}

torch::Tensor denormalize_image(const torch::Tensor& normalized) {
  return normalized.to(torch::kFloat64)
      .add(1.0)
      .mul(0.5 * 255.0)
      .round()
      .clamp(0.0, 255.0)
      .to(torch::kUInt8);
}

torch::Tensor stack_channels(const std::vector<Frame>& frames) {
  require(!frames.empty(), "stack_channels: no frames");
  std::vector<torch::Tensor> parts;
  parts.reserve(frames.size());
  for (const auto& f : frames) {
    require(f.resolution() == frames.front().resolution(), "stack_channels: resolution mismatch");
    parts.push_back(f.pixels());
  }
  return torch::cat(parts, 0);
}

}  // namespace dggan
