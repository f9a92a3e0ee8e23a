#include "mcqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "mcqa/prompting.hpp"
#include "mcqa/stable_hash.hpp"
#include "mcqa/text.hpp"

namespace mcqa {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool cell_valid(const ResponseCell& cell) { return !cell.failed; }

// Kronecker delta over responses: same underlying choice, or the verbatim
// same response string. Unparseable responses match nothing.
bool responses_agree(const ResponseCell& a, const ResponseCell& b) {
  if (!a.selected_choice.has_value() || !b.selected_choice.has_value()) {
    return false;
  }
  return *a.selected_choice == *b.selected_choice || a.raw_canonical == b.raw_canonical;
}

}  // namespace

std::size_t ResponseMatrix::failed_count() const {
  std::size_t n = 0;
  for (const auto& row : items) {
    for (const auto& cell : row.cells) {
      if (cell.failed) {
        ++n;
      }
    }
  }
  return n;
}

ResponseMatrix ResponseMatrix::filtered_by_category(const std::string& category) const {
  ResponseMatrix out;
  out.family = family;
  for (const auto& row : items) {
    if (row.category == category) {
      out.items.push_back(row);
    }
  }
  return out;
}

ResponseMatrix build_response_matrix(const Benchmark& benchmark, const VariantMap& variants,
                                     const TrialPlan& plan, const TrialCache& cache) {
  std::unordered_map<std::string_view, const McqaItem*> items;
  for (const auto& item : benchmark.items) {
    items.emplace(item.id, &item);
  }

  ResponseMatrix matrix;
  matrix.family = plan.family;
  std::unordered_map<std::string_view, std::size_t> row_of;

  for (const auto& entry : plan.entries) {
    const auto item_it = items.find(entry.item_id);
    if (item_it == items.end()) {
      fail("plan references unknown item \"" + entry.item_id + "\"");
    }
    const McqaItem& item = *item_it->second;

    auto row_it = row_of.find(entry.item_id);
    if (row_it == row_of.end()) {
      ItemRow row;
      row.item_id = item.id;
      row.category = item.category;
      row.arity = static_cast<int>(item.choices.size());
      matrix.items.push_back(std::move(row));
      // Key the view into the plan entry, which outlives this function;
      // matrix.items reallocates as it grows.
      row_it = row_of.emplace(entry.item_id, matrix.items.size() - 1).first;
    }
    ItemRow& row = matrix.items[row_it->second];
    if (entry.sample_index != static_cast<int>(row.cells.size())) {
      fail("plan entries for item \"" + entry.item_id + "\" are not dense in sample_index");
    }

    const auto variants_it = variants.find(entry.item_id);
    const VariantSet* vs = variants_it == variants.end() ? nullptr : &variants_it->second;
    const PerturbedItem perturbed = apply_spec(item, vs, entry.spec);
    const RenderedPrompt prompt = render_prompt(perturbed);
    const std::uint64_t hash = prompt_content_hash(prompt, item.audio_ref);

    ResponseCell cell;
    if (const auto record = cache.get(entry.item_id, plan.family, entry.sample_index, hash);
        record.has_value() && record->status == TrialStatus::ok) {
      cell.failed = false;
      cell.correct = record->correct;
      cell.raw_canonical = text::canonical(record->raw_response);
      if (record->parsed_position.has_value()) {
        const int pos = *record->parsed_position;
        if (pos < 0 || pos >= static_cast<int>(entry.spec.ordering.mapping.size())) {
          fail("record for item \"" + entry.item_id + "\" has parsed position out of range");
        }
        cell.selected_choice = entry.spec.ordering.mapping[static_cast<std::size_t>(pos)];
      }
    }
    row.cells.push_back(std::move(cell));
  }
  return matrix;
}

AccuracyStats accuracy_stats(const ResponseMatrix& matrix) {
  if (matrix.items.empty()) {
    fail("accuracy_stats: empty response matrix");
  }
  std::size_t width = 0;
  for (const auto& row : matrix.items) {
    if (row.cells.empty()) {
      fail("accuracy_stats: item \"" + row.item_id + "\" has no responses");
    }
    width = std::max(width, row.cells.size());
  }

  std::vector<double> accuracies;
  accuracies.reserve(width);
  for (std::size_t j = 0; j < width; ++j) {
    std::size_t valid = 0;
    std::size_t correct = 0;
    for (const auto& row : matrix.items) {
      const ResponseCell& cell = row.cells[j % row.cells.size()];
      if (!cell_valid(cell)) {
        continue;
      }
      ++valid;
      if (cell.correct) {
        ++correct;
      }
    }
    if (valid == 0) {
      continue;  // every item failed this index; nothing to average
    }
    accuracies.push_back(100.0 * static_cast<double>(correct) / static_cast<double>(valid));
  }
  if (accuracies.empty()) {
    fail("accuracy_stats: no sample index has a valid response");
  }

  AccuracyStats stats;
  double sum = 0;
  stats.min = accuracies.front();
  stats.max = accuracies.front();
  for (double a : accuracies) {
    sum += a;
    stats.min = std::min(stats.min, a);
    stats.max = std::max(stats.max, a);
  }
  stats.mean = sum / static_cast<double>(accuracies.size());
  double var = 0;
  for (double a : accuracies) {
    var += (a - stats.mean) * (a - stats.mean);
  }
  stats.std_dev = std::sqrt(var / static_cast<double>(accuracies.size()));
  return stats;
}

bool cr_applicable(Family family) {
  return family == Family::Ordering || family == Family::QuestionRephrase;
}

double consistency_rate(const ResponseMatrix& matrix) {
  if (!cr_applicable(matrix.family)) {
    throw NotApplicableError("consistency rate is undefined for family \"" +
                             to_string(matrix.family) +
                             "\": ground truth or distractors were rephrased");
  }
  double sum = 0;
  std::size_t n = 0;
  for (const auto& row : matrix.items) {
    std::vector<const ResponseCell*> valid;
    valid.reserve(row.cells.size());
    for (const auto& cell : row.cells) {
      if (cell_valid(cell)) {
        valid.push_back(&cell);
      }
    }
    if (valid.size() < 2) {
      continue;  // no pair to compare
    }
    std::size_t agree = 0;
    for (std::size_t j = 0; j < valid.size(); ++j) {
      for (std::size_t k = j + 1; k < valid.size(); ++k) {
        if (responses_agree(*valid[j], *valid[k])) {
          ++agree;
        }
      }
    }
    const double pairs = static_cast<double>(valid.size() * (valid.size() - 1)) / 2.0;
    sum += static_cast<double>(agree) / pairs;
    ++n;
  }
  if (n == 0) {
    fail("consistency_rate: no item has two valid responses");
  }
  return sum / static_cast<double>(n);
}

double correctness_rate(const ResponseMatrix& matrix) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& row : matrix.items) {
    std::size_t valid = 0;
    std::size_t correct = 0;
    for (const auto& cell : row.cells) {
      if (!cell_valid(cell)) {
        continue;
      }
      ++valid;
      if (cell.correct) {
        ++correct;
      }
    }
    if (valid == 0) {
      continue;
    }
    sum += static_cast<double>(correct) / static_cast<double>(valid);
    ++n;
  }
  if (n == 0) {
    fail("correctness_rate: empty response matrix");
  }
  return sum / static_cast<double>(n);
}

BiasReport longest_choice_bias(const std::vector<BiasTrialView>& trials) {
  std::size_t parsed = 0;
  std::size_t picked_longest = 0;
  std::size_t longest_is_gt = 0;
  std::size_t picked_longest_when_gt = 0;

  for (const auto& trial : trials) {
    if (!trial.parsed_position.has_value()) {
      continue;
    }
    ++parsed;
    const int longest = longest_choice_position(trial.choices);
    const bool picked = *trial.parsed_position == longest;
    if (picked) {
      ++picked_longest;
    }
    if (longest == trial.gt_position) {
      ++longest_is_gt;
      if (picked) {
        ++picked_longest_when_gt;
      }
    }
  }
  if (parsed == 0) {
    fail("longest_choice_bias: no parsed trials");
  }

  BiasReport report;
  report.parsed_trials = parsed;
  report.overall_rate = static_cast<double>(picked_longest) / static_cast<double>(parsed);
  report.share_longest_is_gt = static_cast<double>(longest_is_gt) / static_cast<double>(parsed);
  if (longest_is_gt > 0) {
    report.conditional_rate_given_longest_is_gt =
        static_cast<double>(picked_longest_when_gt) / static_cast<double>(longest_is_gt);
  }
  return report;
}

BaselineReport random_baseline(const Benchmark& benchmark, std::uint64_t seed) {
  if (benchmark.items.empty()) {
    fail("random_baseline: benchmark has no items");
  }
  BaselineReport report;
  report.seed = seed;

  double inverse_sum = 0;
  std::size_t correct = 0;
  const MockModel mock{MockKind::uniform_random, 'a', seed};
  for (const auto& item : benchmark.items) {
    inverse_sum += 1.0 / static_cast<double>(item.choices.size());
    const PerturbedItem p =
        apply_spec(item, nullptr,
                   default_spec(Family::Default, static_cast<int>(item.choices.size())));
    const ParsedAnswer answer = parse_response(mock.respond(p), p);
    if (judge_correct(answer, p, item.correctness_mode)) {
      ++correct;
    }
  }
  const double n = static_cast<double>(benchmark.items.size());
  report.analytic_pct = 100.0 * inverse_sum / n;
  report.simulated_pct = 100.0 * static_cast<double>(correct) / n;
  return report;
}

}  // namespace mcqa
