#pragma once

#include <cstdint>
#include <vector>

#include "gazemark/gaze.hpp"
#include "gazemark/image.hpp"
#include "gazemark/masks.hpp"
#include "gazemark/strategy.hpp"

namespace gazemark {

struct GazeOverlayConfig {
  int window = 15;
  int circle_radius = 8;
  int line_width = 3;
  Rgb recent_color{255, 0, 0};
  Rgb oldest_color{0, 0, 255};
};

struct SomOverlayConfig {
  double fill_alpha = 0.05;
  std::uint64_t palette_seed = 0;
  bool draw_contours = true;
  int contour_width = 2;
};

// The last min(window, available) fixations with timestamp <= t, oldest
// first.
std::vector<GazeFixation> select_window(const GazeTrack& track, double t,
                                        int window);

// Trail color for the fixation of age rank k (0 = most recent) among
// `count` rendered fixations: per-channel linear interpolation from
// recent_color to oldest_color, round-half-up. count == 1 gives
// recent_color.
Rgb trail_color(int age_rank, int count, const GazeOverlayConfig& config);

// Deterministic high-saturation color for a region: (palette_seed,
// region_id) hashed to a hue, full saturation and value.
Rgb region_color(std::uint64_t palette_seed, int region_id);

// Draws the fixation trail for the window ending at frame.timestamp:
// consecutive points joined by segments colored by the older endpoint,
// then filled circles oldest first so the most recent sits on top.
// Returns a new frame; an empty window returns the input unchanged.
Frame render_gaze_trail(const Frame& frame, const GazeTrack& track,
                        const GazeOverlayConfig& config);

// Blends each region over the frame at fill_alpha, composited in ascending
// region-id order, then (optionally) draws a full-opacity contour band of
// contour_width along each region boundary. Returns a new frame. Throws
// FormatError if the mask dimensions do not match the frame (naming the
// region id).
Frame apply_som_overlay(const Frame& frame, const MaskSet& masks,
                        const SomOverlayConfig& config);

// Applies the strategy's cues: a gaze trail on every frame, the region
// overlay on the final frame only (drawn after the trail so both stay
// visible). Throws std::invalid_argument if frames is empty or
// strategy.som is set without masks.
std::vector<Frame> compose_cue_frames(const std::vector<Frame>& frames,
                                      const GazeTrack& track,
                                      const MaskSet* final_masks,
                                      StrategyFlags strategy,
                                      const GazeOverlayConfig& gaze_cfg,
                                      const SomOverlayConfig& som_cfg);

}  // namespace gazemark
