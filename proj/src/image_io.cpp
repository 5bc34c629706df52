#include "dggan/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dggan/errors.hpp"

namespace dggan {

CropRect center_crop(int width, int height, Resolution target) {
  // Largest window with width/height == target.width/target.height.
  const int64_t lhs = static_cast<int64_t>(width) * target.height;
  const int64_t rhs = static_cast<int64_t>(height) * target.width;
  CropRect r;
  if (lhs > rhs) {  // too wide
    r.height = height;
    r.width = static_cast<int>(rhs / target.height);
  } else {
    r.width = width;
    r.height = static_cast<int>(lhs / target.width);
  }
  r.x = (width - r.width) / 2;
  r.y = (height - r.height) / 2;
  return r;
}

std::optional<Frame> read_frame(const std::filesystem::path& file, Resolution resolution) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty() || bgr.depth() != CV_8U) return std::nullopt;
  const CropRect crop = center_crop(bgr.cols, bgr.rows, resolution);
  cv::Mat cropped = bgr(cv::Rect(crop.x, crop.y, crop.width, crop.height));
  cv::Mat resized;
  if (cropped.cols != resolution.width || cropped.rows != resolution.height) {
    cv::resize(cropped, resized,
               cv::Size(static_cast<int>(resolution.width), static_cast<int>(resolution.height)), 0,
               0, cv::INTER_AREA);
  } else {
    resized = cropped;
  }
  cv::Mat rgb;
  cv::cvtColor(resized, rgb, cv::COLOR_BGR2RGB);
  auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return Frame(normalize_image(hwc.permute({2, 0, 1}).contiguous()));
}

void write_image(const std::filesystem::path& file, const torch::Tensor& normalized) {
  require(normalized.dim() == 3 && normalized.size(0) == 3, "write_image: expected (3, H, W)");
  auto hwc = denormalize_image(normalized).permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
              hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(file.string(), bgr)) throw DataError("cannot write image " + file.string());
}

}  // namespace dggan
