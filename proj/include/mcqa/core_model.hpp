#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcqa {

// How a benchmark decides that a response is correct.
enum class CorrectnessMode {
  exact_choice,     // parsed position must equal the ground-truth position
  substring_match,  // ground-truth text must occur in the raw response
};

std::string to_string(CorrectnessMode mode);
CorrectnessMode correctness_mode_from_string(std::string_view s);

struct Choice {
  char label = 'a';  // presentation label, assigned in order starting at 'a'
  std::string text;  // whitespace-normalized, non-empty
};

struct McqaItem {
  std::string id;
  std::string audio_ref;  // opaque; forwarded to the endpoint, never interpreted
  std::string question;
  std::vector<Choice> choices;  // 2..4 entries after normalization
  int gt_index = 0;             // 0-based index into choices
  std::string category;
  CorrectnessMode correctness_mode = CorrectnessMode::exact_choice;

  const Choice& ground_truth() const { return choices[static_cast<std::size_t>(gt_index)]; }
};

// The seven phrasing versions (original + six paraphrases) of one item's
// question, ground-truth answer, and each distractor. Index 0 is always the
// original text.
struct VariantSet {
  std::string item_id;
  std::vector<std::string> question_variants;
  std::vector<std::string> answer_variants;
  std::vector<std::vector<std::string>> distractor_variants;  // one list per distractor
};

inline constexpr int kVariantCount = 7;

struct Benchmark {
  std::string name;
  std::vector<McqaItem> items;
  std::vector<std::string> category_names;  // order of first appearance
};

const McqaItem* find_item(const Benchmark& benchmark, std::string_view item_id);

using VariantMap = std::map<std::string, VariantSet, std::less<>>;

struct VariantLoadResult {
  VariantMap variants;
  std::vector<std::string> missing_item_ids;  // items covered only by the ordering family
};

struct NormalizedChoices {
  std::vector<Choice> choices;
  int gt_index = 0;
};

// Per-item seed for choice reduction, derived from the run seed and the item
// id so runs reproduce without storing the reduced benchmark.
std::uint64_t item_reduction_seed(std::uint64_t run_seed, std::string_view item_id);

// Reduce a choice list to at most four entries. Lists of 2..4 pass through
// unchanged; longer lists keep the ground truth plus three distractors
// sampled uniformly without replacement, preserving original relative order.
// Labels are reassigned a.. in order. Deterministic in (raw, gt_index, seed).
NormalizedChoices normalize_choices(const std::vector<Choice>& raw_choices, int gt_index,
                                    std::uint64_t seed);

// Load and validate a benchmark JSONL file. One object per line:
//   {"id", "audio_ref", "question", "choices": [str, ...], "gt_index",
//    "category", "correctness_mode"}
// Items with more than four choices are reduced with normalize_choices using
// item_reduction_seed(run_seed, id).
Benchmark load_benchmark(const std::filesystem::path& path, std::uint64_t run_seed = 0);

// Load a variant JSONL file against a benchmark. One object per line:
//   {"item_id", "question_variants": [7 str], "answer_variants": [7 str],
//    "distractor_variants": [[7 str], ...]}
// Every list must have length 7 with index 0 equal to the item's original
// text. Items without a variant set are listed in missing_item_ids.
VariantLoadResult load_variants(const std::filesystem::path& path, const Benchmark& benchmark);

std::string variants_to_jsonl(const VariantMap& variants);
void write_variants(const std::filesystem::path& path, const VariantMap& variants);

void validate_item(const McqaItem& item);
void validate_variant_set(const VariantSet& vs, const McqaItem& item);

// Position of the longest choice, measured in UTF-8 code points of the
// whitespace-normalized text. Ties resolve to the earlier presentation
// position. This is the single length metric behind the bias statistics and
// the longest-picker mock.
int longest_choice_position(const std::vector<Choice>& choices);

}  // namespace mcqa
