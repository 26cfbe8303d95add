#include "gazemark/visual_prompting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gazemark/errors.hpp"
#include "gazemark/rng.hpp"

namespace gazemark {

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::uint8_t clamp_byte(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

struct Point {
  int x;
  int y;
};

Point to_pixel(const GazeFixation& fix, int width, int height) {
  return {round_half_up(fix.x * (width - 1)), round_half_up(fix.y * (height - 1))};
}

void fill_circle(Frame& frame, Point center, int radius, Rgb color) {
  const int r2 = radius * radius;
  const int x0 = std::max(0, center.x - radius);
  const int x1 = std::min(frame.width - 1, center.x + radius);
  const int y0 = std::max(0, center.y - radius);
  const int y1 = std::min(frame.height - 1, center.y + radius);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const int dx = x - center.x;
      const int dy = y - center.y;
      if (dx * dx + dy * dy <= r2) frame.set(x, y, color);
    }
  }
}

void fill_segment(Frame& frame, Point a, Point b, int line_width, Rgb color) {
  const double half = line_width / 2.0;
  const int pad = static_cast<int>(std::ceil(half)) + 1;
  const int x0 = std::max(0, std::min(a.x, b.x) - pad);
  const int x1 = std::min(frame.width - 1, std::max(a.x, b.x) + pad);
  const int y0 = std::max(0, std::min(a.y, b.y) - pad);
  const int y1 = std::min(frame.height - 1, std::max(a.y, b.y) + pad);
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double half2 = half * half;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double wx = x - a.x;
      const double wy = y - a.y;
      double proj = 0.0;
      if (len2 > 0.0) {
        proj = std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0);
      }
      const double dx = wx - proj * vx;
      const double dy = wy - proj * vy;
      if (dx * dx + dy * dy <= half2) frame.set(x, y, color);
    }
  }
}

}  // namespace

std::vector<GazeFixation> select_window(const GazeTrack& track, double t,
                                        int window) {
  if (window < 1) {
    throw std::invalid_argument("window must be >= 1");
  }
  std::vector<GazeFixation> eligible;
  for (const auto& fix : track.fixations) {
    if (fix.timestamp <= t) eligible.push_back(fix);
  }
  const std::size_t keep = std::min<std::size_t>(window, eligible.size());
  return {eligible.end() - keep, eligible.end()};
}

Rgb trail_color(int age_rank, int count, const GazeOverlayConfig& config) {
  if (count < 1 || age_rank < 0 || age_rank >= count) {
    throw std::invalid_argument("age_rank must be in [0, count)");
  }
  if (count == 1) return config.recent_color;
  const double t = static_cast<double>(age_rank) / (count - 1);
  const auto mix = [t](std::uint8_t from, std::uint8_t to) {
    return clamp_byte(round_half_up(from + (static_cast<double>(to) - from) * t));
  };
  return {mix(config.recent_color.r, config.oldest_color.r),
          mix(config.recent_color.g, config.oldest_color.g),
          mix(config.recent_color.b, config.oldest_color.b)};
}

Rgb region_color(std::uint64_t palette_seed, int region_id) {
  const std::uint64_t h =
      derive_seed(palette_seed, "region/" + std::to_string(region_id));
  const double hue = static_cast<double>(h >> 11) * 0x1.0p-53 * 360.0;
  const int sector = static_cast<int>(hue / 60.0) % 6;
  const double frac = hue / 60.0 - std::floor(hue / 60.0);
  const double x = sector % 2 == 0 ? frac : 1.0 - frac;
  double r = 0.0, g = 0.0, b = 0.0;
  switch (sector) {
    case 0: r = 1.0; g = x; break;
    case 1: r = x; g = 1.0; break;
    case 2: g = 1.0; b = x; break;
    case 3: g = x; b = 1.0; break;
    case 4: r = x; b = 1.0; break;
    default: r = 1.0; b = x; break;
  }
  return {clamp_byte(round_half_up(r * 255.0)),
          clamp_byte(round_half_up(g * 255.0)),
          clamp_byte(round_half_up(b * 255.0))};
}

Frame render_gaze_trail(const Frame& frame, const GazeTrack& track,
                        const GazeOverlayConfig& config) {
  const auto window = select_window(track, frame.timestamp, config.window);
  if (window.empty()) return frame;

  Frame out = frame;
  const int count = static_cast<int>(window.size());
  std::vector<Point> points;
  points.reserve(window.size());
  for (const auto& fix : window) {
    points.push_back(to_pixel(fix, frame.width, frame.height));
  }

  // window is oldest-first, so point j has age rank count-1-j.
  for (int j = 0; j + 1 < count; ++j) {
    fill_segment(out, points[j], points[j + 1], config.line_width,
                 trail_color(count - 1 - j, count, config));
  }
  for (int j = 0; j < count; ++j) {
    fill_circle(out, points[j], config.circle_radius,
                trail_color(count - 1 - j, count, config));
  }
  return out;
}

namespace {

// Foreground pixels whose Chebyshev-`width` neighborhood is not entirely
// foreground; out-of-frame neighbors count as background, so region pixels
// hugging the frame edge are part of the contour.
std::vector<std::uint8_t> contour_band(const std::vector<std::uint8_t>& bitmap,
                                       int width, int height, int band) {
  std::vector<std::uint8_t> out(bitmap.size(), 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * width + x;
      if (!bitmap[idx]) continue;
      bool interior = true;
      for (int dy = -band; interior && dy <= band; ++dy) {
        for (int dx = -band; dx <= band; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= width || ny >= height ||
              !bitmap[static_cast<std::size_t>(ny) * width + nx]) {
            interior = false;
            break;
          }
        }
      }
      if (!interior) out[idx] = 1;
    }
  }
  return out;
}

}  // namespace

Frame apply_som_overlay(const Frame& frame, const MaskSet& masks,
                        const SomOverlayConfig& config) {
  if (!(config.fill_alpha >= 0.0 && config.fill_alpha <= 1.0)) {
    throw std::invalid_argument("fill_alpha must be in [0, 1]");
  }
  Frame out = frame;
  for (const auto& region : masks.regions) {
    if (masks.width != frame.width || masks.height != frame.height) {
      throw FormatError("region " + std::to_string(region.region_id) +
                        ": mask is " + std::to_string(masks.width) + "x" +
                        std::to_string(masks.height) + " but frame is " +
                        std::to_string(frame.width) + "x" +
                        std::to_string(frame.height));
    }
    const auto bitmap = region.to_bitmap(masks.width, masks.height);
    const Rgb color = region_color(config.palette_seed, region.region_id);
    const double a = config.fill_alpha;
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        if (!bitmap[static_cast<std::size_t>(y) * frame.width + x]) continue;
        const Rgb src = out.at(x, y);
        out.set(x, y,
                {clamp_byte(round_half_up((1.0 - a) * src.r + a * color.r)),
                 clamp_byte(round_half_up((1.0 - a) * src.g + a * color.g)),
                 clamp_byte(round_half_up((1.0 - a) * src.b + a * color.b))});
      }
    }
    if (config.draw_contours && config.contour_width > 0) {
      const auto band =
          contour_band(bitmap, frame.width, frame.height, config.contour_width);
      for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
          if (band[static_cast<std::size_t>(y) * frame.width + x]) {
            out.set(x, y, color);
          }
        }
      }
    }
  }
  return out;
}

std::vector<Frame> compose_cue_frames(const std::vector<Frame>& frames,
                                      const GazeTrack& track,
                                      const MaskSet* final_masks,
                                      StrategyFlags strategy,
                                      const GazeOverlayConfig& gaze_cfg,
                                      const SomOverlayConfig& som_cfg) {
  if (frames.empty()) {
    throw std::invalid_argument("compose_cue_frames requires at least one frame");
  }
  if (strategy.som && final_masks == nullptr) {
    throw std::invalid_argument("som strategy requires masks for the final frame");
  }
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    out.push_back(strategy.gaze ? render_gaze_trail(frame, track, gaze_cfg)
                                : frame);
  }
  if (strategy.som) {
    out.back() = apply_som_overlay(out.back(), *final_masks, som_cfg);
  }
  return out;
}

}  // namespace gazemark
