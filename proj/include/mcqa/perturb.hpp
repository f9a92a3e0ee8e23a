#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/core_model.hpp"

namespace mcqa {

enum class Family {
  Default,
  Ordering,
  QuestionRephrase,
  AnswerRephrase,
  DistractorRephrase,
  Mix,
};

inline constexpr Family kAllFamilies[] = {
    Family::Default,        Family::Ordering,           Family::QuestionRephrase,
    Family::AnswerRephrase, Family::DistractorRephrase, Family::Mix,
};

std::string to_string(Family family);
// Accepts both canonical names ("question_rephrase") and short CLI aliases
// ("question").
Family family_from_string(std::string_view s);
bool family_needs_variants(Family family);

// One arrangement of an item's choices. mapping[p] is the original choice
// index shown at output position p; index is the rank in the lexicographic
// enumeration of all arity! mappings (rank 0 = identity).
struct Permutation {
  int arity = 0;
  std::vector<int> mapping;
  int index = 0;

  bool is_identity() const;
  bool operator==(const Permutation&) const = default;
};

// All k! permutations in lexicographic order of mapping, identity first.
// 2 <= k <= 4.
const std::vector<Permutation>& enumerate_orderings(int k);
Permutation identity_permutation(int k);

// A fully deterministic description of one perturbed rendering of an item.
// An untouched axis keeps variant index 0; an untouched ordering is the
// identity permutation.
struct PerturbationSpec {
  Family family = Family::Default;
  Permutation ordering;
  int question_variant = 0;
  int answer_variant = 0;
  int distractor_variant = 0;  // applied to every distractor of the item

  bool operator==(const PerturbationSpec&) const = default;
};

PerturbationSpec default_spec(Family family, int arity);

struct PerturbedItem {
  std::string item_id;
  std::string question_text;
  std::vector<Choice> choices;  // presentation order, labels reassigned a..
  int gt_position = 0;          // ground-truth position after reordering
  PerturbationSpec spec;
};

// Availability flags for the mix sampler. arity selects which k!-1
// non-identity permutations an ordering draw picks from.
struct MixAxes {
  int arity = 4;
  bool question = true;
  bool answer = true;
  bool distractor = true;
};

// Draw one mix spec from four independent fair coins (apply-ordering,
// apply-question, apply-answer, apply-distractor), keyed by
// (run_seed, item_id, sample_index). An ordering draw excludes the identity;
// a rephrase draw picks uniformly from {1..6}. sample_index 0 is reserved
// for the default spec.
PerturbationSpec sample_mix(std::string_view item_id, std::uint64_t run_seed, int sample_index,
                            const MixAxes& axes);

struct PlanEntry {
  std::string item_id;
  int sample_index = 0;
  PerturbationSpec spec;
};

struct TrialPlan {
  Family family = Family::Default;
  std::uint64_t run_seed = 0;
  std::vector<PlanEntry> entries;
};

// Deterministic trial plan for one family. Per item: ordering -> one entry
// per permutation of the item's own choice count; rephrase families -> 7
// entries (0 = default, 1..6 = the six paraphrases); mix -> 7 entries
// (0 = default, 1..6 sampled); default -> 1 entry. Items without a variant
// set participate only in the default and ordering families.
TrialPlan build_trial_plan(const Benchmark& benchmark, const VariantMap& variants, Family family,
                           std::uint64_t run_seed);

// Materialize one perturbed rendering. variants may be null only when every
// variant index in the spec is 0.
PerturbedItem apply_spec(const McqaItem& item, const VariantSet* variants,
                         const PerturbationSpec& spec);

// JSONL archive of a plan, one entry per line:
//   {"item_id", "sample_index", "family", "ordering": [ints], "q", "a", "d"}
// Serialization is byte-stable for identical plans.
std::string plan_to_jsonl(const TrialPlan& plan);
void write_plan(const std::filesystem::path& path, const TrialPlan& plan);
TrialPlan load_plan(const std::filesystem::path& path, std::uint64_t run_seed);

}  // namespace mcqa
