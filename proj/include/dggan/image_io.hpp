#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>

#include "dggan/frame.hpp"

namespace dggan {

/// Decodes an 8-bit image as RGB, center-crops it to the aspect ratio of
/// `resolution` and resizes it. Returns nullopt when the file cannot be decoded.
std::optional<Frame> read_frame(const std::filesystem::path& file, Resolution resolution);

/// Writes a [-1, 1] RGB tensor of shape (3, H, W) as an 8-bit image.
void write_image(const std::filesystem::path& file, const torch::Tensor& normalized);

/// Largest centered window of `width` x `height` whose aspect matches target.
struct CropRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};
CropRect center_crop(int width, int height, Resolution target);

}  // namespace dggan
