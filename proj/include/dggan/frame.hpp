#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace dggan {

struct Resolution {
  int64_t height = 32;
  int64_t width = 32;

  bool operator==(const Resolution&) const = default;
};

/// One RGB image with values in [-1, 1], stored as a float tensor of shape (3, H, W).
class Frame {
 public:
  Frame() = default;
  /// Throws ContractViolation unless `pixels` is a (3, H, W) floating tensor.
  explicit Frame(torch::Tensor pixels);

  const torch::Tensor& pixels() const { return pixels_; }
  int64_t height() const { return pixels_.size(1); }
  int64_t width() const { return pixels_.size(2); }
  Resolution resolution() const { return {height(), width()}; }
  bool defined() const { return pixels_.defined(); }

  /// True when every value lies in the closed interval [-1, 1].
  bool in_range() const;

 private:
  torch::Tensor pixels_;
};

using Video = std::vector<Frame>;

// Pixel values produced by the dataset module sit on a dyadic grid of this
// spacing, so that differences and sums of two frames are exact in float32.
inline constexpr double kPixelQuantum = 1.0 / 65536.0;

/// Rounds every value to the nearest multiple of kPixelQuantum.
torch::Tensor quantize_pixels(const torch::Tensor& values);

/// 8-bit value -> [-1, 1].
float normalize_u8(uint8_t value);
/// [-1, 1] -> nearest 8-bit value (clamped).
uint8_t denormalize_u8(float value);

/// uint8 tensor (any shape) -> quantized float tensor in [-1, 1].
torch::Tensor normalize_image(const torch::Tensor& u8);
/// float tensor in [-1, 1] -> uint8 tensor of the same shape.
torch::Tensor denormalize_image(const torch::Tensor& normalized);

/// Stacks frames along the channel axis: T frames -> (3T, H, W).
torch::Tensor stack_channels(const std::vector<Frame>& frames);

}  // namespace dggan
