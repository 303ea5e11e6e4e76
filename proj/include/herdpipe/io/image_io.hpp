#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "herdpipe/core/error.hpp"
#include "herdpipe/core/image.hpp"
#include "herdpipe/io/files.hpp"

namespace herdpipe::io {

enum class ImageFormat { jpeg, png };

inline std::string extension(ImageFormat f) { return f == ImageFormat::png ? ".png" : ".jpg"; }

inline cv::Mat to_mat(const RgbImage& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.data.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

inline RgbImage from_mat(const cv::Mat& bgr) {
  RgbImage img(bgr.cols, bgr.rows);
  cv::Mat rgb(bgr.rows, bgr.cols, CV_8UC3, img.data.data());
  if (bgr.channels() == 1) cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
  else if (bgr.channels() == 4) cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
  else cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return img;
}

/// Baseline JPEG at maximum quality, or PNG. Settings are fixed so equal
/// rasters always encode to equal bytes.
inline std::vector<std::uint8_t> encode_image(const RgbImage& img, ImageFormat format) {
  if (img.empty()) throw Error(Errc::invalid_input, "cannot encode an empty raster");
  std::vector<std::uint8_t> bytes;
  std::vector<int> params;
  if (format == ImageFormat::jpeg) {
    params = {cv::IMWRITE_JPEG_QUALITY, 100, cv::IMWRITE_JPEG_PROGRESSIVE, 0, cv::IMWRITE_JPEG_OPTIMIZE, 0};
  } else {
    params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  }
  if (!cv::imencode(extension(format), to_mat(img), bytes, params))
    throw Error(Errc::io, "image encoding failed");
  return bytes;
}

inline RgbImage decode_image(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>") {
  if (bytes.empty()) throw Error(Errc::decode, "empty image data: " + origin);
  cv::Mat m = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (m.empty()) throw Error(Errc::decode, "unreadable image: " + origin);
  return from_mat(m);
}

inline RgbImage read_image(const std::filesystem::path& path) {
  return decode_image(read_bytes(path), path.string());
}

inline void write_image(const std::filesystem::path& path, const RgbImage& img, ImageFormat format) {
  write_bytes(path, encode_image(img, format));
}

inline ImageFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png" ? ImageFormat::png : ImageFormat::jpeg;
}

}  // namespace herdpipe::io
