#include "gazemark/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cstring>

#include "gazemark/digest.hpp"
#include "gazemark/errors.hpp"

namespace gazemark {

Frame Frame::solid(int width, int height, Rgb color, double timestamp) {
  Frame f;
  f.width = width;
  f.height = height;
  f.timestamp = timestamp;
  f.pixels.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < f.pixels.size(); i += 3) {
    f.pixels[i] = color.r;
    f.pixels[i + 1] = color.g;
    f.pixels[i + 2] = color.b;
  }
  return f;
}

std::string frame_digest(const Frame& frame) {
  Sha256 h;
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(frame.width),
                                 static_cast<std::uint32_t>(frame.height)};
  h.update(dims, sizeof(dims));
  h.update(frame.pixels.data(), frame.pixels.size());
  return h.hex_digest();
}

Frame load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw IoError("failed to read image: " + path.string());
  }
  Frame f;
  f.width = bgr.cols;
  f.height = bgr.rows;
  f.pixels.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  for (int y = 0; y < f.height; ++y) {
    const std::uint8_t* row = bgr.ptr(y);
    std::uint8_t* out = f.pixels.data() + static_cast<std::size_t>(y) * f.width * 3;
    for (int x = 0; x < f.width; ++x) {
      out[3 * x] = row[3 * x + 2];
      out[3 * x + 1] = row[3 * x + 1];
      out[3 * x + 2] = row[3 * x];
    }
  }
  return f;
}

namespace {

cv::Mat to_bgr(const Frame& frame) {
  if (frame.width <= 0 || frame.height <= 0 ||
      frame.pixels.size() !=
          static_cast<std::size_t>(frame.width) * frame.height * 3) {
    throw FormatError("frame dimensions do not match pixel buffer");
  }
  cv::Mat bgr(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    const std::uint8_t* in =
        frame.pixels.data() + static_cast<std::size_t>(y) * frame.width * 3;
    std::uint8_t* row = bgr.ptr(y);
    for (int x = 0; x < frame.width; ++x) {
      row[3 * x] = in[3 * x + 2];
      row[3 * x + 1] = in[3 * x + 1];
      row[3 * x + 2] = in[3 * x];
    }
  }
  return bgr;
}

}  // namespace

void save_png(const Frame& frame, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_bgr(frame))) {
    throw IoError("failed to write image: " + path.string());
  }
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr(frame), buf)) {
    throw IoError("failed to encode png");
  }
  return buf;
}

std::vector<std::uint8_t> load_indexed(const std::filesystem::path& path,
                                       int* width, int* height) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) {
    throw IoError("failed to read image: " + path.string());
  }
  if (img.channels() != 1 || img.depth() != CV_8U) {
    throw FormatError("indexed mask image must be single-channel 8-bit: " +
                      path.string());
  }
  *width = img.cols;
  *height = img.rows;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.cols) * img.rows);
  if (img.isContinuous()) {
    std::memcpy(out.data(), img.data, out.size());
  } else {
    for (int y = 0; y < img.rows; ++y) {
      std::memcpy(out.data() + static_cast<std::size_t>(y) * img.cols,
                  img.ptr(y), static_cast<std::size_t>(img.cols));
    }
  }
  return out;
}

}  // namespace gazemark
