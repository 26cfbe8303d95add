#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gazemark {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

// 8-bit RGB frame, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3
  double timestamp = 0.0;            // seconds from clip start

  static Frame solid(int width, int height, Rgb color, double timestamp = 0.0);

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  Rgb at(int x, int y) const {
    const std::size_t o =
        3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }

  void set(int x, int y, Rgb c) {
    const std::size_t o =
        3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }

  bool same_pixels(const Frame& other) const {
    return width == other.width && height == other.height && pixels == other.pixels;
  }
};

// SHA-256 over the dimensions and the raw pixel buffer. Codec independent:
// two frames hash equal iff their decoded pixels are identical.
std::string frame_digest(const Frame& frame);

Frame load_image(const std::filesystem::path& path);
void save_png(const Frame& frame, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Frame& frame);

// Single-channel 8-bit image, for indexed mask ingestion. Throws
// FormatError on multi-channel or non-8-bit input.
std::vector<std::uint8_t> load_indexed(const std::filesystem::path& path,
                                       int* width, int* height);

}  // namespace gazemark
