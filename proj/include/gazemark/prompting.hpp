#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazemark/dataset.hpp"
#include "gazemark/strategy.hpp"

namespace gazemark {

// Instruction block prepended when the region overlay is active.
inline constexpr std::string_view kSomPromptBlock =
    "Focus on the last frame to make your prediction and use the rest of the "
    "video to infer the context.";

inline constexpr std::string_view kBaseQuestion =
    "What object will the person interact with next, ignoring ongoing "
    "interactions?";

// Instruction block appended when the gaze trail is active.
inline constexpr std::string_view kGazePromptBlock =
    "Follow the user's gaze trajectory closely: the red circles indicate "
    "where the user has most recently looked, and the connected path shows "
    "the sequence of gaze points across the most recent frames. The objects "
    "that have just been fixated are very likely to include the one the user "
    "will interact with next. Use this visual cue to make your prediction.";

struct PromptBundle {
  std::string text;
  std::vector<std::string> candidate_order;
};

// Assembles the prompt: optional overlay instruction, the question, the five
// candidates one per line without labels, optional gaze instruction. Blocks
// are separated by blank lines.
PromptBundle build_prompt(const QuestionRecord& record, StrategyFlags strategy);

// Lowercases, maps punctuation to spaces, collapses whitespace, and strips
// leading articles (the/a/an, repeatedly).
std::string normalize_answer_text(std::string_view text);

// Maps model output to a candidate index by normalized substring
// containment; the longest normalized candidate wins, ties break to the
// lowest index. nullopt means abstain: nothing matched.
std::optional<int> parse_answer(std::string_view raw_text,
                                const std::vector<std::string>& candidates);

}  // namespace gazemark
