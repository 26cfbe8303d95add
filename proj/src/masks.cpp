#include "gazemark/masks.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gazemark/errors.hpp"

namespace gazemark {

std::vector<std::uint8_t> RegionMask::to_bitmap(int width, int height) const {
  const std::size_t total = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> bitmap(total, 0);
  std::size_t pos = 0;
  bool foreground = false;
  for (std::uint32_t run : counts) {
    if (pos + run > total) {
      throw FormatError("region " + std::to_string(region_id) +
                        ": runs exceed mask area");
    }
    if (foreground) {
      std::fill(bitmap.begin() + pos, bitmap.begin() + pos + run, std::uint8_t{1});
    }
    pos += run;
    foreground = !foreground;
  }
  if (pos != total) {
    throw FormatError("region " + std::to_string(region_id) +
                      ": runs do not cover mask area");
  }
  return bitmap;
}

RegionMask region_from_bitmap(int region_id, const std::vector<std::uint8_t>& bitmap,
                              int width, int height) {
  const std::size_t total = static_cast<std::size_t>(width) * height;
  if (bitmap.size() != total) {
    throw FormatError("bitmap size does not match dimensions");
  }
  RegionMask mask;
  mask.region_id = region_id;
  bool foreground = false;
  std::uint32_t run = 0;
  for (std::uint8_t v : bitmap) {
    const bool fg = v != 0;
    if (fg == foreground) {
      ++run;
    } else {
      mask.counts.push_back(run);
      foreground = fg;
      run = 1;
    }
  }
  mask.counts.push_back(run);
  return mask;
}

MaskSet load_masks_indexed_image(const std::filesystem::path& path) {
  int width = 0;
  int height = 0;
  const auto values = load_indexed(path, &width, &height);

  std::map<std::uint8_t, std::vector<std::uint8_t>> bitmaps;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0) continue;
    auto [it, inserted] = bitmaps.try_emplace(values[i]);
    if (inserted) it->second.assign(values.size(), 0);
    it->second[i] = 1;
  }

  MaskSet out;
  out.width = width;
  out.height = height;
  for (const auto& [value, bitmap] : bitmaps) {
    out.regions.push_back(region_from_bitmap(value, bitmap, width, height));
  }
  return out;
}

MaskSet parse_masks_rle(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("mask document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("width") || !doc.contains("height") ||
      !doc.contains("regions") || !doc["width"].is_number_integer() ||
      !doc["height"].is_number_integer() || !doc["regions"].is_array()) {
    throw FormatError("mask document must be {width, height, regions[]}");
  }
  MaskSet out;
  out.width = doc["width"].get<int>();
  out.height = doc["height"].get<int>();
  if (out.width <= 0 || out.height <= 0) {
    throw FormatError("mask dimensions must be positive");
  }
  const std::uint64_t total =
      static_cast<std::uint64_t>(out.width) * static_cast<std::uint64_t>(out.height);

  for (const auto& region : doc["regions"]) {
    if (!region.is_object() || !region.contains("id") ||
        !region.contains("counts") || !region["id"].is_number_integer() ||
        !region["counts"].is_array()) {
      throw FormatError("each region must be {id, counts[]}");
    }
    RegionMask mask;
    mask.region_id = region["id"].get<int>();
    if (mask.region_id < 0) {
      throw FormatError("region id must be non-negative, got " +
                        std::to_string(mask.region_id));
    }
    std::uint64_t sum = 0;
    for (const auto& c : region["counts"]) {
      if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
        throw FormatError("region " + std::to_string(mask.region_id) +
                          ": counts must be non-negative integers");
      }
      mask.counts.push_back(c.get<std::uint32_t>());
      sum += mask.counts.back();
    }
    if (sum != total) {
      throw FormatError("region " + std::to_string(mask.region_id) +
                        ": counts sum to " + std::to_string(sum) + ", expected " +
                        std::to_string(total));
    }
    out.regions.push_back(std::move(mask));
  }

  std::sort(out.regions.begin(), out.regions.end(),
            [](const RegionMask& a, const RegionMask& b) {
              return a.region_id < b.region_id;
            });
  for (std::size_t i = 1; i < out.regions.size(); ++i) {
    if (out.regions[i].region_id == out.regions[i - 1].region_id) {
      throw FormatError("duplicate region id " +
                        std::to_string(out.regions[i].region_id));
    }
  }
  return out;
}

MaskSet load_masks_rle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("failed to open mask file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_masks_rle(buf.str());
}

std::string serialize_masks_rle(const MaskSet& masks) {
  nlohmann::json doc;
  doc["width"] = masks.width;
  doc["height"] = masks.height;
  doc["regions"] = nlohmann::json::array();
  for (const auto& region : masks.regions) {
    nlohmann::json r;
    r["id"] = region.region_id;
    r["counts"] = region.counts;
    doc["regions"].push_back(std::move(r));
  }
  return doc.dump();
}

namespace {

// Splits "http://host:port/some/path" into the client base and the path.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must include a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {endpoint, "/"};
  }
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

MaskSet fetch_masks_remote(const std::string& endpoint, const Frame& frame,
                           double timeout_seconds) {
  const auto [base, path] = split_endpoint(endpoint);
  httplib::Client client(base);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs =
      static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const auto png = encode_png(frame);
  auto res = client.Post(path, reinterpret_cast<const char*>(png.data()),
                         png.size(), "image/png");
  if (!res) {
    throw NetworkError("mask service unreachable at " + endpoint + ": " +
                           httplib::to_string(res.error()),
                       true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw NetworkError("mask service at " + endpoint + " returned status " +
                           std::to_string(res->status),
                       res->status >= 500 || res->status == 429);
  }

  MaskSet masks = parse_masks_rle(res->body);
  if (masks.width != frame.width || masks.height != frame.height) {
    throw ContractError("mask service returned " + std::to_string(masks.width) +
                        "x" + std::to_string(masks.height) + " for a " +
                        std::to_string(frame.width) + "x" +
                        std::to_string(frame.height) + " frame");
  }
  return masks;
}

}  // namespace gazemark
