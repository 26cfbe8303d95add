#pragma once

#include <string>
#include <string_view>

namespace gazemark {

// Which visual cues get composited onto the sampled frames.
struct StrategyFlags {
  bool som = false;   // region overlay on the final frame
  bool gaze = false;  // gaze trail on every frame

  bool operator==(const StrategyFlags&) const = default;
};

inline constexpr StrategyFlags kVllmOnly{false, false};
inline constexpr StrategyFlags kSomOnly{true, false};
inline constexpr StrategyFlags kGazeOnly{false, true};
inline constexpr StrategyFlags kSomGaze{true, true};

// Canonical names: "vllm_only", "som", "gaze", "som_gaze".
std::string strategy_name(StrategyFlags flags);

// Parses a canonical name; throws ConfigError on anything else.
StrategyFlags parse_strategy(std::string_view name);

}  // namespace gazemark
