#include "gazemark/rng.hpp"

#include <stdexcept>

namespace gazemark {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view stream) {
  return splitmix64(run_seed ^ fnv1a64(stream));
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t pick_index(std::mt19937_64& rng, std::size_t count) {
  if (count == 0) {
    throw std::invalid_argument("pick_index: count must be positive");
  }
  auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(count));
  return idx < count ? idx : count - 1;
}

}  // namespace gazemark
