#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcqa/core_model.hpp"

namespace mcqa {

// A plain chat call: prompt in, assistant text out. Endpoint-backed in the
// CLI, a lambda in tests.
using ChatFn = std::function<std::string(const std::string&)>;

// How much surrounding context a generator profile sees while rephrasing.
// Two profiles with three rewrites each yield the six paraphrases per
// element.
struct GenerationProfile {
  std::string name;
  bool include_question = false;
  bool include_answer = false;
  bool include_distractors = false;
};

std::vector<GenerationProfile> default_generation_profiles();

struct AxisSelection {
  bool question = true;
  bool answer = true;
  bool distractor = true;
};

// A generated paraphrase whose normalized text equals another choice of the
// same item; kept aside for human review.
struct ReviewEntry {
  std::string item_id;
  std::string axis;          // "answer" or "distractor"
  int distractor_index = -1;  // -1 for the answer axis
  int variant_index = 0;      // 1..6
  std::string text;
  char collides_with_label = 'a';
};

struct VariantGenResult {
  VariantMap variants;
  std::vector<ReviewEntry> review;
  std::size_t generated_count = 0;  // paraphrases produced on choice axes
};

// Build the instruction sent to the generator for one element.
std::string build_rephrase_prompt(const std::string& element_kind, const std::string& text,
                                  const std::vector<std::string>& context_lines);

// Extract exactly three rewrites from a generator response formatted as
// numbered lines "1. ...", "2. ...", "3. ...".
std::vector<std::string> parse_rephrase_response(const std::string& raw);

// Generate 7-version variant lists (index 0 = original) for the selected
// axes of every item. Axes that are not selected are filled with the
// original text so the result is still a valid variant file.
VariantGenResult generate_variants(const Benchmark& benchmark, const ChatFn& generator,
                                   const AxisSelection& axes,
                                   const std::vector<GenerationProfile>& profiles =
                                       default_generation_profiles());

std::string review_to_jsonl(const std::vector<ReviewEntry>& entries);

}  // namespace mcqa
