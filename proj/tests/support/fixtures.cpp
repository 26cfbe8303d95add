#include "support/fixtures.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gazemark::testing {

namespace {
std::atomic<int> tempdir_counter{0};
}

TempDir::TempDir() {
  const int id = tempdir_counter.fetch_add(1);
  path_ = std::filesystem::temp_directory_path() /
          ("gazemark_test_" + std::to_string(::getpid()) + "_" +
           std::to_string(id));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_indexed_png(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& values, int width,
                       int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("value buffer does not match dimensions");
  }
  cv::Mat img(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    std::memcpy(img.ptr(y), values.data() + static_cast<std::size_t>(y) * width,
                static_cast<std::size_t>(width));
  }
  if (!cv::imwrite(path.string(), img)) {
    throw std::runtime_error("failed to write fixture png: " + path.string());
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("failed to open for write: " + path.string());
  }
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("failed to open for read: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace gazemark::testing
