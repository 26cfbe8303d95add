#include "gazemark/strategy.hpp"

#include "gazemark/errors.hpp"

namespace gazemark {

std::string strategy_name(StrategyFlags flags) {
  if (flags.som && flags.gaze) return "som_gaze";
  if (flags.som) return "som";
  if (flags.gaze) return "gaze";
  return "vllm_only";
}

StrategyFlags parse_strategy(std::string_view name) {
  if (name == "vllm_only") return kVllmOnly;
  if (name == "som") return kSomOnly;
  if (name == "gaze") return kGazeOnly;
  if (name == "som_gaze") return kSomGaze;
  throw ConfigError("unknown strategy: " + std::string(name) +
                    " (expected vllm_only, som, gaze, or som_gaze)");
}

}  // namespace gazemark
