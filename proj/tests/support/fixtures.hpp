#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gazemark::testing {

// Unique empty directory under the system temp root, removed on
// destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

// Writes a single-channel 8-bit PNG.
void write_indexed_png(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& values, int width,
                       int height);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gazemark::testing
