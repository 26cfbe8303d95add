#include "gazemark/prompting.hpp"

#include <cctype>

namespace gazemark {

PromptBundle build_prompt(const QuestionRecord& record, StrategyFlags strategy) {
  PromptBundle bundle;
  bundle.candidate_order = record.candidates;

  std::string& text = bundle.text;
  if (strategy.som) {
    text += kSomPromptBlock;
    text += "\n\n";
  }
  text += record.question_text;
  text += "\n\n";
  for (std::size_t i = 0; i < record.candidates.size(); ++i) {
    if (i > 0) text += '\n';
    text += record.candidates[i];
  }
  if (strategy.gaze) {
    text += "\n\n";
    text += kGazePromptBlock;
  }
  return bundle;
}

std::string normalize_answer_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(uc));
    } else {
      pending_space = true;
    }
  }

  // strip leading articles, repeatedly ("the a lid" -> "lid")
  for (;;) {
    std::string_view v = out;
    std::string_view article;
    for (std::string_view a : {"the ", "an ", "a "}) {
      if (v.substr(0, a.size()) == a) {
        article = a;
        break;
      }
    }
    if (article.empty()) break;
    out.erase(0, article.size());
  }
  if (out == "the" || out == "an" || out == "a") out.clear();
  return out;
}

std::optional<int> parse_answer(std::string_view raw_text,
                                const std::vector<std::string>& candidates) {
  const std::string haystack = normalize_answer_text(raw_text);
  std::optional<int> best;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string needle = normalize_answer_text(candidates[i]);
    if (needle.empty()) continue;
    if (haystack.find(needle) == std::string::npos) continue;
    if (!best || needle.size() > best_len) {
      best = static_cast<int>(i);
      best_len = needle.size();
    }
  }
  return best;
}

}  // namespace gazemark
