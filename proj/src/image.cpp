#include "cc2d/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace cc2d {

cv::Mat1f load_gray(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (raw.empty()) throw std::runtime_error("failed to load image: " + path);
  cv::Mat1f out;
  const double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  raw.convertTo(out, CV_32F, scale);
  return out;
}

void save_gray(const cv::Mat1f& img, const std::string& path) {
  cv::Mat1b u8;
  img.convertTo(u8, CV_8U, 255.0);
  if (!cv::imwrite(path, u8)) throw std::runtime_error("failed to write image: " + path);
}

cv::Mat1f resize_to_network(const cv::Mat1f& img, const ImageGeometry& geom) {
  if (img.cols != geom.original_width || img.rows != geom.original_height)
    throw std::invalid_argument("resize_to_network: image does not match geometry");
  cv::Mat1f out;
  cv::resize(img, out, cv::Size(geom.network_size, geom.network_size), 0, 0, cv::INTER_LINEAR);
  return out;
}

Tensor to_input_tensor(const cv::Mat1f& img, float mean, float stddev) {
  Tensor t(3, img.rows, img.cols);
  const float inv = 1.0f / stddev;
  float* p0 = t.chan(0);
  for (int y = 0; y < img.rows; ++y) {
    const float* row = img.ptr<float>(y);
    float* dst = p0 + static_cast<size_t>(y) * img.cols;
    for (int x = 0; x < img.cols; ++x) dst[x] = (row[x] - mean) * inv;
  }
  const size_t plane = t.plane();
  std::copy(p0, p0 + plane, t.chan(1));
  std::copy(p0, p0 + plane, t.chan(2));
  return t;
}

cv::Mat1f crop(const cv::Mat1f& img, int x0, int y0, int side) {
  if (x0 < 0 || y0 < 0 || x0 + side > img.cols || y0 + side > img.rows)
    throw std::out_of_range("crop: window outside image");
  return img(cv::Rect(x0, y0, side, side)).clone();
}

Tensor resize_map_bilinear(const Tensor& map, int out_h, int out_w) {
  if (map.c != 1) throw std::invalid_argument("resize_map_bilinear: single-plane maps only");
  const cv::Mat1f src(map.h, map.w, const_cast<float*>(map.data()));
  Tensor out(1, out_h, out_w);
  cv::Mat1f dst(out_h, out_w, out.data());
  cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
  return out;
}

}  // namespace cc2d
