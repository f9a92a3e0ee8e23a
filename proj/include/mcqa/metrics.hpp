#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcqa/core_model.hpp"
#include "mcqa/model_client.hpp"
#include "mcqa/perturb.hpp"

namespace mcqa {

// Requesting CR for a family where ground truth or distractors were
// rephrased; the report renders "-" instead of a number.
struct NotApplicableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One response slot of the matrix. failed covers transport failures and
// missing records; failed slots are excluded from every denominator.
// selected_choice is the original choice index (presentation-invariant).
struct ResponseCell {
  bool failed = true;
  std::optional<int> selected_choice;
  std::string raw_canonical;  // normalized raw response
  bool correct = false;
};

struct ItemRow {
  std::string item_id;
  std::string category;
  int arity = 0;
  std::vector<ResponseCell> cells;  // indexed by sample_index
};

struct ResponseMatrix {
  Family family = Family::Default;
  std::vector<ItemRow> items;

  std::size_t failed_count() const;
  ResponseMatrix filtered_by_category(const std::string& category) const;
};

// Assemble the matrix for one executed plan. Prompts are re-rendered so a
// record is accepted only when its stored prompt hash still matches; stale
// or absent records become failed cells. Parsed positions are mapped back
// through each entry's ordering to the underlying choice.
ResponseMatrix build_response_matrix(const Benchmark& benchmark, const VariantMap& variants,
                                     const TrialPlan& plan, const TrialCache& cache);

// Percentages over per-sample-index benchmark accuracies.
struct AccuracyStats {
  double mean = 0;
  double std_dev = 0;  // population convention (divide by the index count)
  double min = 0;
  double max = 0;
};

// accuracy_j = share of items answering sample index j correctly, where an
// item with fewer samples than the widest one contributes index j mod m_i
// (mixed-arity ordering families). Stats are taken over {accuracy_j}.
AccuracyStats accuracy_stats(const ResponseMatrix& matrix);

bool cr_applicable(Family family);

// Eq.-style mean pairwise agreement: CR = (1/n) sum_i sum_{j<k}
// delta(r_ij, r_ik) / C(m_i, 2). Two responses agree when both parsed and
// they select the same underlying choice or are verbatim-identical strings;
// unparseable responses agree with nothing, including each other.
double consistency_rate(const ResponseMatrix& matrix);

// CoR = (1/n) sum_i (1/m_i) sum_j correctness(r_ij).
double correctness_rate(const ResponseMatrix& matrix);

// One trial of the length-bias measurement: the presented choices, the
// parsed position (if any) and where the ground truth sat.
struct BiasTrialView {
  std::vector<Choice> choices;
  std::optional<int> parsed_position;
  int gt_position = 0;
};

struct BiasReport {
  double overall_rate = 0;  // parsed trials selecting the longest choice
  std::optional<double> conditional_rate_given_longest_is_gt;
  double share_longest_is_gt = 0;  // parsed trials where longest == ground truth
  std::size_t parsed_trials = 0;
};

BiasReport longest_choice_bias(const std::vector<BiasTrialView>& trials);

struct BaselineReport {
  double analytic_pct = 0;   // 100 * mean over items of 1/k_i
  double simulated_pct = 0;  // uniform_random mock, one default pass
  std::uint64_t seed = 0;
};

BaselineReport random_baseline(const Benchmark& benchmark, std::uint64_t seed);

}  // namespace mcqa
