#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mcqa/metrics.hpp"
#include "mcqa/stable_hash.hpp"
#include "support/synthetic.hpp"

using namespace mcqa;

namespace {

ResponseCell parsed_cell(int selected, bool correct) {
  ResponseCell cell;
  cell.failed = false;
  cell.selected_choice = selected;
  cell.raw_canonical = "response " + std::to_string(selected);
  cell.correct = correct;
  return cell;
}

ResponseCell unparsed_cell() {
  ResponseCell cell;
  cell.failed = false;
  cell.raw_canonical = "gibberish";
  return cell;
}

ResponseCell failed_cell() { return ResponseCell{}; }

ItemRow make_row(const std::string& id, const std::string& category,
                 std::vector<ResponseCell> cells) {
  ItemRow row;
  row.item_id = id;
  row.category = category;
  row.arity = 4;
  row.cells = std::move(cells);
  return row;
}

// Direct transcription of the defining sums: mean over items of pairwise
// agreement normalized by C(m,2), and mean over items of per-item accuracy.
double cr_reference(const std::vector<std::vector<std::optional<int>>>& responses) {
  const std::size_t n = responses.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = responses[i].size();
    double agree = 0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = j + 1; k < m; ++k) {
        const auto& a = responses[i][j];
        const auto& b = responses[i][k];
        if (a.has_value() && b.has_value() && *a == *b) {
          agree += 1.0;
        }
      }
    }
    total += agree / (static_cast<double>(m * (m - 1)) / 2.0);
  }
  return total / static_cast<double>(n);
}

double cor_reference(const std::vector<std::vector<bool>>& correctness) {
  const std::size_t n = correctness.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double correct = 0;
    for (bool c : correctness[i]) {
      correct += c ? 1.0 : 0.0;
    }
    total += correct / static_cast<double>(correctness[i].size());
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("accuracy_stats over hand-computed sample indices") {
  ResponseMatrix matrix;
  matrix.family = Family::QuestionRephrase;
  // index 0: 5/10 correct; index 1: 7/10 correct.
  for (int i = 0; i < 10; ++i) {
    matrix.items.push_back(make_row("item" + std::to_string(i), "sound",
                                    {parsed_cell(0, i < 5), parsed_cell(0, i < 7)}));
  }
  const AccuracyStats stats = accuracy_stats(matrix);
  CHECK(stats.mean == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(stats.std_dev == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(stats.min == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(stats.max == doctest::Approx(70.0).epsilon(1e-12));
}

TEST_CASE("accuracy_stats degenerate cases") {
  ResponseMatrix all_correct;
  all_correct.family = Family::Ordering;
  for (int i = 0; i < 4; ++i) {
    all_correct.items.push_back(make_row("i" + std::to_string(i), "sound",
                                         {parsed_cell(1, true), parsed_cell(1, true)}));
  }
  const auto stats = accuracy_stats(all_correct);
  CHECK(stats.mean == 100.0);
  CHECK(stats.std_dev == 0.0);
  CHECK(stats.min == 100.0);
  CHECK(stats.max == 100.0);

  ResponseMatrix single;
  single.family = Family::Default;
  single.items.push_back(make_row("only", "sound", {parsed_cell(0, true)}));
  single.items.push_back(make_row("other", "sound", {parsed_cell(0, false)}));
  const auto s = accuracy_stats(single);
  CHECK(s.std_dev == 0.0);
  CHECK(s.min == s.mean);
  CHECK(s.max == s.mean);

  ResponseMatrix empty;
  empty.family = Family::Default;
  CHECK_THROWS_AS(accuracy_stats(empty), std::runtime_error);
}

TEST_CASE("accuracy_stats maps shorter items by sample index modulo") {
  ResponseMatrix matrix;
  matrix.family = Family::Ordering;
  // A 2-sample item contributes cell j%2 at every index j of a 4-wide matrix.
  matrix.items.push_back(make_row("wide", "sound",
                                  {parsed_cell(0, true), parsed_cell(0, false),
                                   parsed_cell(0, true), parsed_cell(0, false)}));
  matrix.items.push_back(make_row("narrow", "sound",
                                  {parsed_cell(0, true), parsed_cell(0, true)}));
  const auto stats = accuracy_stats(matrix);
  // indices: j0 = (1+1)/2, j1 = (0+1)/2, j2 = (1+1)/2, j3 = (0+1)/2
  CHECK(stats.mean == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(stats.min == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(stats.max == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("consistency_rate on the worked examples") {
  SUBCASE("responses (a, a, b) give 1/3") {
    ResponseMatrix matrix;
    matrix.family = Family::QuestionRephrase;
    matrix.items.push_back(make_row("one", "sound",
                                    {parsed_cell(0, true), parsed_cell(0, true),
                                     parsed_cell(1, false)}));
    CHECK(consistency_rate(matrix) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("identical responses give 1") {
    ResponseMatrix matrix;
    matrix.family = Family::Ordering;
    for (int i = 0; i < 3; ++i) {
      matrix.items.push_back(make_row("i" + std::to_string(i), "sound",
                                      {parsed_cell(2, true), parsed_cell(2, true),
                                       parsed_cell(2, true)}));
    }
    CHECK(consistency_rate(matrix) == 1.0);
  }
  SUBCASE("all-distinct responses give 0") {
    ResponseMatrix matrix;
    matrix.family = Family::QuestionRephrase;
    matrix.items.push_back(make_row("one", "sound",
                                    {parsed_cell(0, false), parsed_cell(1, false),
                                     parsed_cell(2, false), parsed_cell(3, false)}));
    CHECK(consistency_rate(matrix) == 0.0);
  }
  SUBCASE("unparseable responses agree with nothing, including each other") {
    ResponseMatrix matrix;
    matrix.family = Family::QuestionRephrase;
    matrix.items.push_back(make_row("one", "sound",
                                    {unparsed_cell(), unparsed_cell(), parsed_cell(0, true)}));
    CHECK(consistency_rate(matrix) == 0.0);
  }
  SUBCASE("not applicable when ground truth or distractors were rephrased") {
    for (Family family : {Family::AnswerRephrase, Family::DistractorRephrase, Family::Mix,
                          Family::Default}) {
      ResponseMatrix matrix;
      matrix.family = family;
      matrix.items.push_back(make_row("one", "sound",
                                      {parsed_cell(0, true), parsed_cell(0, true)}));
      CHECK_THROWS_AS(consistency_rate(matrix), NotApplicableError);
    }
  }
}

TEST_CASE("verbatim-identical responses count as self-consistent under reordering") {
  // A model answering the literal string "a" under two different orderings
  // selects different underlying choices but is maximally consistent.
  ResponseMatrix matrix;
  matrix.family = Family::Ordering;
  ResponseCell first = parsed_cell(0, true);
  first.raw_canonical = "a";
  ResponseCell second = parsed_cell(2, false);
  second.raw_canonical = "a";
  matrix.items.push_back(make_row("one", "sound", {first, second}));
  CHECK(consistency_rate(matrix) == 1.0);
}

TEST_CASE("correctness_rate on the worked examples") {
  ResponseMatrix matrix;
  matrix.family = Family::Mix;
  matrix.items.push_back(make_row("one", "sound", {parsed_cell(0, true), parsed_cell(1, false)}));
  matrix.items.push_back(make_row("two", "sound", {parsed_cell(0, true), parsed_cell(0, true)}));
  CHECK(correctness_rate(matrix) == doctest::Approx(0.75).epsilon(1e-12));

  ResponseMatrix all_correct;
  all_correct.family = Family::Default;
  all_correct.items.push_back(make_row("one", "sound", {parsed_cell(0, true)}));
  CHECK(correctness_rate(all_correct) == 1.0);

  ResponseMatrix empty;
  empty.family = Family::Default;
  CHECK_THROWS_AS(correctness_rate(empty), std::runtime_error);
}

TEST_CASE("CoR equals plain accuracy when every item has one sample") {
  ResponseMatrix matrix;
  matrix.family = Family::Default;
  for (int i = 0; i < 8; ++i) {
    matrix.items.push_back(make_row("i" + std::to_string(i), "sound",
                                    {parsed_cell(0, i % 3 == 0)}));
  }
  const double cor = correctness_rate(matrix);
  const auto stats = accuracy_stats(matrix);
  CHECK(100.0 * cor == doctest::Approx(stats.mean).epsilon(1e-12));
}

TEST_CASE("CR and CoR match the direct transcription on random matrices") {
  SplitMix64 rng(31337);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 1 + rng.below(5);
    const std::size_t m = 2 + rng.below(3);
    std::vector<std::vector<std::optional<int>>> responses(n);
    std::vector<std::vector<bool>> correctness(n);
    ResponseMatrix matrix;
    matrix.family = Family::QuestionRephrase;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<ResponseCell> cells;
      for (std::size_t j = 0; j < m; ++j) {
        const bool unparsed = rng.below(100) < 15;
        const bool correct = !unparsed && rng.below(2) == 1;
        if (unparsed) {
          responses[i].push_back(std::nullopt);
          cells.push_back(unparsed_cell());
        } else {
          const int value = static_cast<int>(rng.below(4));
          responses[i].push_back(value);
          cells.push_back(parsed_cell(value, correct));
        }
        correctness[i].push_back(correct);
      }
      matrix.items.push_back(make_row("i" + std::to_string(i), "sound", std::move(cells)));
    }
    const double cr = consistency_rate(matrix);
    const double cor = correctness_rate(matrix);
    CHECK(cr == doctest::Approx(cr_reference(responses)).epsilon(1e-12));
    CHECK(cor == doctest::Approx(cor_reference(correctness)).epsilon(1e-12));
    CHECK(cr >= 0.0);
    CHECK(cr <= 1.0);
    CHECK(cor >= 0.0);
    CHECK(cor <= 1.0);
  }
}

TEST_CASE("CR and CoR are invariant under within-item sample reordering") {
  SplitMix64 rng(555);
  ResponseMatrix matrix;
  matrix.family = Family::Ordering;
  for (int i = 0; i < 6; ++i) {
    std::vector<ResponseCell> cells;
    for (int j = 0; j < 4; ++j) {
      cells.push_back(parsed_cell(static_cast<int>(rng.below(4)), rng.below(2) == 1));
    }
    matrix.items.push_back(make_row("i" + std::to_string(i), "sound", std::move(cells)));
  }
  const double cr = consistency_rate(matrix);
  const double cor = correctness_rate(matrix);

  ResponseMatrix shuffled = matrix;
  for (auto& row : shuffled.items) {
    for (std::size_t j = row.cells.size(); j > 1; --j) {
      std::swap(row.cells[j - 1], row.cells[rng.below(j)]);
    }
  }
  CHECK(consistency_rate(shuffled) == cr);
  CHECK(correctness_rate(shuffled) == cor);
}

TEST_CASE("failed trials are excluded from every denominator") {
  ResponseMatrix matrix;
  matrix.family = Family::QuestionRephrase;
  matrix.items.push_back(make_row("one", "sound",
                                  {parsed_cell(0, true), failed_cell(), parsed_cell(1, false)}));
  matrix.items.push_back(make_row("two", "sound",
                                  {parsed_cell(0, true), parsed_cell(0, true),
                                   parsed_cell(0, true)}));
  CHECK(matrix.failed_count() == 1);
  // item one: valid responses 0 and 1 -> 0 agreeing pairs of 1; item two: 1.
  CHECK(consistency_rate(matrix) == doctest::Approx(0.5).epsilon(1e-12));
  // item one: 1 of 2 valid correct; item two: 3 of 3.
  CHECK(correctness_rate(matrix) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("overall accuracy decomposes over categories by item count") {
  SplitMix64 rng(808);
  ResponseMatrix matrix;
  matrix.family = Family::QuestionRephrase;
  for (int i = 0; i < 10; ++i) {
    std::vector<ResponseCell> cells;
    for (int j = 0; j < 3; ++j) {
      cells.push_back(parsed_cell(0, rng.below(2) == 1));
    }
    matrix.items.push_back(
        make_row("i" + std::to_string(i), i < 4 ? "sound" : "music", std::move(cells)));
  }
  const auto overall = accuracy_stats(matrix);
  const auto sound = accuracy_stats(matrix.filtered_by_category("sound"));
  const auto music = accuracy_stats(matrix.filtered_by_category("music"));
  CHECK(overall.mean ==
        doctest::Approx((4.0 * sound.mean + 6.0 * music.mean) / 10.0).epsilon(1e-9));
}

TEST_CASE("longest_choice_bias identities") {
  const Benchmark benchmark = testsupport::make_benchmark(40, 4);

  SUBCASE("a longest picker scores 1.0 overall") {
    std::vector<BiasTrialView> views;
    for (const auto& item : benchmark.items) {
      BiasTrialView view;
      view.choices = item.choices;
      view.gt_position = item.gt_index;
      view.parsed_position = longest_choice_position(item.choices);
      views.push_back(std::move(view));
    }
    const BiasReport report = longest_choice_bias(views);
    CHECK(report.overall_rate == 1.0);
    CHECK(report.parsed_trials == views.size());
  }

  SUBCASE("an oracle's overall rate equals the share where longest is correct") {
    std::vector<BiasTrialView> views;
    for (const auto& item : benchmark.items) {
      BiasTrialView view;
      view.choices = item.choices;
      view.gt_position = item.gt_index;
      view.parsed_position = item.gt_index;
      views.push_back(std::move(view));
    }
    const BiasReport report = longest_choice_bias(views);
    CHECK(report.overall_rate == report.share_longest_is_gt);
    REQUIRE(report.conditional_rate_given_longest_is_gt.has_value());
    CHECK(*report.conditional_rate_given_longest_is_gt == 1.0);
  }

  SUBCASE("unparsed trials are ignored; all-unparsed throws") {
    std::vector<BiasTrialView> views(3);
    for (auto& view : views) {
      view.choices = benchmark.items[0].choices;
    }
    CHECK_THROWS_AS(longest_choice_bias(views), std::runtime_error);
  }

  SUBCASE("length ties resolve to the earlier position") {
    BiasTrialView view;
    view.choices = {Choice{'a', "same len"}, Choice{'b', "same-len"}, Choice{'c', "x"}};
    view.gt_position = 0;
    view.parsed_position = 1;  // picks the tied later choice: not "longest"
    const BiasReport report = longest_choice_bias({view});
    CHECK(report.overall_rate == 0.0);
    CHECK(report.share_longest_is_gt == 1.0);
  }
}

TEST_CASE("random_baseline analytic and simulated values") {
  const Benchmark four = testsupport::make_benchmark(50, 4);
  const auto b4 = random_baseline(four, 11);
  CHECK(b4.analytic_pct == doctest::Approx(25.0).epsilon(1e-12));

  const Benchmark mixed = testsupport::make_mixed_benchmark(171, 829);
  const auto bm = random_baseline(mixed, 6);
  CHECK(bm.analytic_pct == doctest::Approx(29.275).epsilon(1e-9));
  CHECK(std::abs(bm.simulated_pct - bm.analytic_pct) < 2.0);
  // fixed seed, fixed output
  const auto again = random_baseline(mixed, 6);
  CHECK(again.simulated_pct == bm.simulated_pct);
}
