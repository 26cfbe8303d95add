#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace gazemark {

// Incremental SHA-256 with a hex-encoded result.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  void update(std::string_view bytes);

  // Finalizes the digest; call once.
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace gazemark
