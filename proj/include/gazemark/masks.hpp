#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazemark/image.hpp"

namespace gazemark {

// One labeled binary region, stored as run-length counts: alternating
// background/foreground runs in row-major order, starting with a background
// run (which may be 0). Runs always sum to width*height of the owning set.
struct RegionMask {
  int region_id = 0;
  std::vector<std::uint32_t> counts;

  // Expands to a width*height buffer of 0/1 bytes.
  std::vector<std::uint8_t> to_bitmap(int width, int height) const;
};

// Encodes a 0/1 bitmap into run-length counts.
RegionMask region_from_bitmap(int region_id, const std::vector<std::uint8_t>& bitmap,
                              int width, int height);

struct MaskSet {
  int width = 0;
  int height = 0;
  std::vector<RegionMask> regions;  // unique ids, sorted ascending
};

// Single-channel indexed image: value 0 is background, value k > 0 becomes
// region k. Throws IoError or FormatError.
MaskSet load_masks_indexed_image(const std::filesystem::path& path);

// JSON document {width, height, regions: [{id, counts: [...]}]}. Throws
// FormatError on schema violations, duplicate ids, or run-sum mismatches
// (naming the offending region id).
MaskSet parse_masks_rle(const std::string& json_text);
MaskSet load_masks_rle(const std::filesystem::path& path);
std::string serialize_masks_rle(const MaskSet& masks);

// POSTs the frame as a PNG to `endpoint` and parses the RLE JSON reply.
// Throws NetworkError (retryable on connect/timeout/5xx) on transport
// failure, FormatError on a malformed body, ContractError when the reply
// dimensions do not match the frame.
MaskSet fetch_masks_remote(const std::string& endpoint, const Frame& frame,
                           double timeout_seconds);

}  // namespace gazemark
