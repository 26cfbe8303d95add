#pragma once

#include <string>
#include <vector>

namespace gazemark {

// One gaze fixation. Coordinates are normalized to [0, 1] relative to the
// frame, timestamp is seconds from clip start.
struct GazeFixation {
  double timestamp = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct GazeTrack {
  std::string clip_id;
  std::vector<GazeFixation> fixations;  // sorted by timestamp ascending
};

}  // namespace gazemark
