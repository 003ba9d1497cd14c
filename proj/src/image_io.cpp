#include "napa/image_io.hpp"

#include "napa/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstring>

namespace napa {

namespace {

cv::Mat to_mat_rgb32f(const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 3 && image.size(0) == 3, "expected a [3, H, W] image");
  const auto hwc = image.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  cv::Mat m(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3);
  std::memcpy(m.data, hwc.data_ptr<float>(), hwc.numel() * sizeof(float));
  return m;
}

torch::Tensor from_mat_rgb32f(const cv::Mat& m) {
  auto t = torch::empty({m.rows, m.cols, 3}, torch::kFloat32);
  const cv::Mat c = m.isContinuous() ? m : m.clone();
  std::memcpy(t.data_ptr<float>(), c.data, t.numel() * sizeof(float));
  return t.permute({2, 0, 1}).contiguous();
}

void write_rgb8(const std::filesystem::path& path, int h, int w, const std::uint8_t* rgb) {
  cv::Mat m(h, w, CV_8UC3);
  for (int i = 0; i < h * w; ++i) {
    m.data[3 * i] = rgb[3 * i + 2];
    m.data[3 * i + 1] = rgb[3 * i + 1];
    m.data[3 * i + 2] = rgb[3 * i];
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw Error("could not write image " + path.string());
}

}  // namespace

torch::Tensor load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("not a readable image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  return from_mat_rgb32f(f);
}

std::vector<std::uint8_t> to_bytes(const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 3 && image.size(0) == 3, "expected a [3, H, W] image");
  const auto hwc = (image.detach().to(torch::kCPU, torch::kFloat64).clamp(0.0, 1.0) * 255.0)
                       .round()
                       .to(torch::kUInt8)
                       .permute({1, 2, 0})
                       .contiguous();
  const auto* p = hwc.data_ptr<std::uint8_t>();
  return {p, p + hwc.numel()};
}

void save_png(const std::filesystem::path& path, const torch::Tensor& image) {
  const auto bytes = to_bytes(image);
  write_rgb8(path, static_cast<int>(image.size(1)), static_cast<int>(image.size(2)), bytes.data());
}

void save_png(const std::filesystem::path& path, const BoneMap& map) {
  write_rgb8(path, map.height, map.width, map.pixels.data());
}

torch::Tensor to_tensor(const BoneMap& map) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(map.pixels.data()), {map.height, map.width, 3},
                            torch::kUInt8)
               .to(torch::kFloat32)
               .div(255.0);
  return t.permute({2, 0, 1}).contiguous();
}

torch::Tensor resize_image(const torch::Tensor& image, int height, int width) {
  if (image.size(1) == height && image.size(2) == width) return image;
  cv::Mat out;
  cv::resize(to_mat_rgb32f(image), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return from_mat_rgb32f(out).clamp(0.0, 1.0);
}

Preprocessed preprocess(const torch::Tensor& image, const Pose2D& pose, int size) {
  Preprocessed out;
  const double h = static_cast<double>(image.size(1));
  const double w = static_cast<double>(image.size(2));
  out.scale_x = size / w;
  out.scale_y = size / h;
  out.image = resize_image(image, size, size);
  out.pose = pose;
  for (auto& c : out.pose.coords) c = Vec2(c.x() * out.scale_x, c.y() * out.scale_y);
  return out;
}

}  // namespace napa
