#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/core_model.hpp"
#include "mcqa/perturb.hpp"

namespace mcqa {

// Canonical instruction block sent to every model, followed by exactly one
// newline, the question, one newline, and the enumerated choices.
inline constexpr std::string_view kInstructionBlock =
    "Answer the user's question without providing extraneous information; select one of the "
    "options. Options are formatted as follows: (a) xxx. (b) yyy. (c) zzz. (d) uuu. Return only "
    "one selected option in the format: (a) xxx. Avoid the inclusion of any additional text.";

struct RenderedPrompt {
  std::string text;
  int choice_count = 0;
  std::vector<char> labels;
};

enum class MatchKind {
  label_and_text,  // "(b) some text" shape; the label decides the position
  label_only,      // the whole response is one letter, optionally punctuated
  text_only,       // exactly one choice text occurs in the response
  none,
};

std::string to_string(MatchKind kind);

struct ParsedAnswer {
  std::optional<int> choice_position;  // present iff match_kind != none
  MatchKind match_kind = MatchKind::none;
  std::string raw;
};

// Deterministic rendering; identical input yields identical bytes. Each
// choice appears once as "(label) text", separated by single spaces, with a
// "." appended unless the text already ends in '.', '!' or '?'.
RenderedPrompt render_prompt(const PerturbedItem& p);

// Total over arbitrary byte strings; never throws. Tries, in order:
// parenthesized label with trailing text, bare label constituting the whole
// response, unique choice-text containment.
ParsedAnswer parse_response(const std::string& raw, const PerturbedItem& p);

// exact_choice: parsed position equals the ground-truth position.
// substring_match: the normalized presented ground-truth text occurs in the
// normalized raw response. Unparsed responses are incorrect in both modes.
bool judge_correct(const ParsedAnswer& ans, const PerturbedItem& p, CorrectnessMode mode);

// Content hash of a rendered prompt plus the audio reference it ships with;
// the cache key component that invalidates stale plans.
std::uint64_t prompt_content_hash(const RenderedPrompt& prompt, std::string_view audio_ref);

}  // namespace mcqa
