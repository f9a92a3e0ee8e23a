#include "mcqa/prompting.hpp"

#include <cctype>

#include "mcqa/stable_hash.hpp"
#include "mcqa/text.hpp"

namespace mcqa {

namespace {

bool ends_sentence(const std::string& s) {
  if (s.empty()) {
    return false;
  }
  const char c = s.back();
  return c == '.' || c == '!' || c == '?';
}

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) {
    s.remove_prefix(1);
  }
  while (!s.empty() && is_ws(s.back())) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<int> position_for_letter(char letter, int choice_count) {
  const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(letter)));
  if (lower < 'a' || lower >= 'a' + choice_count) {
    return std::nullopt;
  }
  return lower - 'a';
}

// Rule 1: "(x) text" at the start of the trimmed response.
std::optional<int> match_label_and_text(std::string_view trimmed, int choice_count) {
  if (trimmed.empty() || trimmed.front() != '(') {
    return std::nullopt;
  }
  std::size_t i = 1;
  while (i < trimmed.size() && is_ws(trimmed[i])) {
    ++i;
  }
  if (i >= trimmed.size() ||
      !std::isalpha(static_cast<unsigned char>(trimmed[i]))) {
    return std::nullopt;
  }
  const char letter = trimmed[i++];
  while (i < trimmed.size() && is_ws(trimmed[i])) {
    ++i;
  }
  if (i >= trimmed.size() || trimmed[i] != ')') {
    return std::nullopt;
  }
  ++i;
  if (trim(trimmed.substr(i)).empty()) {
    return std::nullopt;  // bare "(x)" is handled as label_only
  }
  return position_for_letter(letter, choice_count);
}

// Rule 2: a single letter, optionally parenthesized/punctuated, making up
// the whole trimmed response.
std::optional<int> match_label_only(std::string_view trimmed, int choice_count) {
  constexpr std::string_view kStrippable = "()[].,:;!?\"'*`";
  while (!trimmed.empty() &&
         (is_ws(trimmed.front()) || kStrippable.find(trimmed.front()) != std::string_view::npos)) {
    trimmed.remove_prefix(1);
  }
  while (!trimmed.empty() &&
         (is_ws(trimmed.back()) || kStrippable.find(trimmed.back()) != std::string_view::npos)) {
    trimmed.remove_suffix(1);
  }
  if (trimmed.size() != 1 || !std::isalpha(static_cast<unsigned char>(trimmed.front()))) {
    return std::nullopt;
  }
  return position_for_letter(trimmed.front(), choice_count);
}

// Rule 3: exactly one choice text occurs in the normalized response.
std::optional<int> match_unique_text(const std::string& raw, const PerturbedItem& p) {
  const std::string haystack = text::canonical(raw);
  std::optional<int> found;
  for (std::size_t i = 0; i < p.choices.size(); ++i) {
    const std::string needle = text::canonical(p.choices[i].text);
    if (needle.empty() || !text::contains(haystack, needle)) {
      continue;
    }
    if (found.has_value()) {
      return std::nullopt;  // ambiguous
    }
    found = static_cast<int>(i);
  }
  return found;
}

}  // namespace

std::string to_string(MatchKind kind) {
  switch (kind) {
    case MatchKind::label_and_text: return "label_and_text";
    case MatchKind::label_only: return "label_only";
    case MatchKind::text_only: return "text_only";
    case MatchKind::none: return "none";
  }
  return "none";
}

RenderedPrompt render_prompt(const PerturbedItem& p) {
  RenderedPrompt out;
  out.choice_count = static_cast<int>(p.choices.size());
  out.text.reserve(kInstructionBlock.size() + p.question_text.size() + 64);
  out.text.append(kInstructionBlock);
  out.text.push_back('\n');
  out.text.append(p.question_text);
  out.text.push_back('\n');
  for (std::size_t i = 0; i < p.choices.size(); ++i) {
    const Choice& c = p.choices[i];
    if (i > 0) {
      out.text.push_back(' ');
    }
    out.text.push_back('(');
    out.text.push_back(c.label);
    out.text.append(") ");
    out.text.append(c.text);
    if (!ends_sentence(c.text)) {
      out.text.push_back('.');
    }
    out.labels.push_back(c.label);
  }
  return out;
}

ParsedAnswer parse_response(const std::string& raw, const PerturbedItem& p) {
  ParsedAnswer ans;
  ans.raw = raw;
  const int count = static_cast<int>(p.choices.size());
  const std::string_view trimmed = trim(raw);

  if (auto pos = match_label_and_text(trimmed, count)) {
    ans.choice_position = pos;
    ans.match_kind = MatchKind::label_and_text;
    return ans;
  }
  if (auto pos = match_label_only(trimmed, count)) {
    ans.choice_position = pos;
    ans.match_kind = MatchKind::label_only;
    return ans;
  }
  if (auto pos = match_unique_text(raw, p)) {
    ans.choice_position = pos;
    ans.match_kind = MatchKind::text_only;
    return ans;
  }
  return ans;
}

bool judge_correct(const ParsedAnswer& ans, const PerturbedItem& p, CorrectnessMode mode) {
  if (ans.match_kind == MatchKind::none) {
    return false;
  }
  if (mode == CorrectnessMode::exact_choice) {
    return ans.choice_position.has_value() && *ans.choice_position == p.gt_position;
  }
  const std::string gt = text::canonical(p.choices[static_cast<std::size_t>(p.gt_position)].text);
  return !gt.empty() && text::contains(text::canonical(ans.raw), gt);
}

std::uint64_t prompt_content_hash(const RenderedPrompt& prompt, std::string_view audio_ref) {
  return StableHash().add(prompt.text).add(audio_ref).value();
}

}  // namespace mcqa
