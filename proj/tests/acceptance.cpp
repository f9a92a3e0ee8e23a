// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance is pinned in code next to the check it gates.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcqa/metrics.hpp"
#include "mcqa/model_client.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/report.hpp"
#include "mcqa/runner.hpp"
#include "mcqa/stable_hash.hpp"
#include "support/synthetic.hpp"

using namespace mcqa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> current_failures;

void require(bool condition, const std::string& what) {
  if (!condition) {
    current_failures.push_back(what);
  }
}

void require_eq(double actual, double expected, double tolerance, const std::string& what) {
  if (!(std::abs(actual - expected) <= tolerance)) {
    std::ostringstream msg;
    msg << what << ": got " << actual << ", expected " << expected << " ± " << tolerance;
    current_failures.push_back(msg.str());
  }
}

int failed_criteria = 0;

void run_criterion(int index, const std::string& title, double budget_ms,
                   const std::function<void()>& body) {
  current_failures.clear();
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    current_failures.push_back(std::string("unexpected exception: ") + e.what());
  }
  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  if (elapsed_ms > budget_ms) {
    std::ostringstream msg;
    msg << "time budget exceeded: " << elapsed_ms << " ms > " << budget_ms << " ms";
    current_failures.push_back(msg.str());
  }
  if (current_failures.empty()) {
    std::printf("[PASS] %2d. %s (%.1f ms, budget %.0f ms)\n", index, title.c_str(), elapsed_ms,
                budget_ms);
  } else {
    ++failed_criteria;
    std::printf("[FAIL] %2d. %s (%.1f ms, budget %.0f ms)\n", index, title.c_str(), elapsed_ms,
                budget_ms);
    for (const auto& failure : current_failures) {
      std::printf("       - %s\n", failure.c_str());
    }
  }
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("mcqa_acceptance_" + tag + "_" + std::to_string(getpid()) + "_" +
                        std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

// Reference transcriptions of the metric definitions, kept independent of
// the library implementation.
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

struct Pipeline {
  Benchmark benchmark;
  VariantMap variants;
  std::vector<TrialPlan> plans;
};

// plan + run + score against a mock, everything under one temp dir.
MetricsReport run_pipeline(const Pipeline& p, const MockModel& mock, std::uint64_t seed,
                           const fs::path& dir) {
  TrialCache cache(dir / "trials.jsonl");
  for (const auto& plan : p.plans) {
    run_plan(p.benchmark, p.variants, plan, mock_model_fn(mock), cache);
  }
  return score_run(p.benchmark, p.variants, p.plans, cache, seed);
}

Pipeline make_pipeline(int items, std::uint64_t seed,
                       const std::vector<Family>& families) {
  Pipeline p;
  p.benchmark = testsupport::make_benchmark(items, 4);
  p.variants = testsupport::make_variants(p.benchmark);
  for (Family family : families) {
    p.plans.push_back(build_trial_plan(p.benchmark, p.variants, family, seed));
  }
  return p;
}

const std::vector<Family> kEveryFamily{Family::Default,           Family::Ordering,
                                       Family::QuestionRephrase,  Family::AnswerRephrase,
                                       Family::DistractorRephrase, Family::Mix};

void criterion_permutations() {
  const auto& four = enumerate_orderings(4);
  require(four.size() == 24, "k=4 must yield 24 permutations");
  require(four.front().is_identity(), "identity must come first");
  std::set<std::vector<int>> distinct;
  for (const auto& perm : four) {
    distinct.insert(perm.mapping);
  }
  require(distinct.size() == 24, "k=4 permutations must be pairwise distinct");
  require(enumerate_orderings(2).size() == 2, "k=2 must yield 2 permutations");
  require(enumerate_orderings(3).size() == 6, "k=3 must yield 6 permutations");
  require(enumerate_orderings(2).front().is_identity() &&
              enumerate_orderings(3).front().is_identity(),
          "identity must come first for every arity");
}

void criterion_plan_cardinality() {
  const Pipeline p = make_pipeline(100, 11, kEveryFamily);
  std::size_t expected[] = {100, 2400, 700, 700, 700, 700};
  for (std::size_t i = 0; i < p.plans.size(); ++i) {
    require(p.plans[i].entries.size() == expected[i],
            to_string(p.plans[i].family) + " plan must hold " +
                std::to_string(expected[i]) + " trials, got " +
                std::to_string(p.plans[i].entries.size()));
  }
}

void criterion_mix_statistics() {
  const MixAxes axes{4, true, true, true};
  const int draws = 100002;
  int all_applied = 0;
  int none_applied = 0;
  for (int i = 0; i < draws; ++i) {
    const std::string item_id = "item" + std::to_string(i / 6);
    const int sample_index = 1 + (i % 6);
    const PerturbationSpec spec = sample_mix(item_id, 424242, sample_index, axes);
    const bool ordering_applied = !spec.ordering.is_identity();
    const bool q = spec.question_variant > 0;
    const bool a = spec.answer_variant > 0;
    const bool d = spec.distractor_variant > 0;
    if (ordering_applied && q && a && d) {
      ++all_applied;
    }
    if (!ordering_applied && !q && !a && !d) {
      ++none_applied;
    }
  }
  require_eq(all_applied / static_cast<double>(draws), 0.0625, 0.005,
             "fraction with all four axes applied");
  require_eq(none_applied / static_cast<double>(draws), 0.0625, 0.005,
             "fraction with no axis applied");

  for (int s = 1; s <= 6; ++s) {
    const auto once = sample_mix("item77", 424242, s, axes);
    const auto again = sample_mix("item77", 424242, s, axes);
    require(once == again, "identical (seed, item, index) must reproduce the spec bit-exactly");
  }
}

void criterion_metric_oracle() {
  SplitMix64 rng(1234567);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + rng.below(5);
    const std::size_t m = 2 + rng.below(3);
    std::vector<std::vector<std::optional<int>>> responses(n);
    std::vector<std::vector<bool>> correctness(n);
    ResponseMatrix matrix;
    matrix.family = Family::QuestionRephrase;
    for (std::size_t i = 0; i < n; ++i) {
      ItemRow row;
      row.item_id = "i" + std::to_string(i);
      row.category = "sound";
      row.arity = 4;
      for (std::size_t j = 0; j < m; ++j) {
        const bool unparsed = rng.below(100) < 15;
        const bool correct = !unparsed && rng.below(2) == 1;
        ResponseCell cell;
        cell.failed = false;
        if (unparsed) {
          responses[i].push_back(std::nullopt);
          cell.raw_canonical = "unparseable";
        } else {
          const int value = static_cast<int>(rng.below(4));
          responses[i].push_back(value);
          cell.selected_choice = value;
          cell.raw_canonical = "response " + std::to_string(value);
        }
        cell.correct = correct;
        correctness[i].push_back(correct);
        row.cells.push_back(std::move(cell));
      }
      matrix.items.push_back(std::move(row));
    }
    require(std::abs(consistency_rate(matrix) - cr_reference(responses)) <= 1e-12,
            "CR must match the direct transcription within 1e-12");
    require(std::abs(correctness_rate(matrix) - cor_reference(correctness)) <= 1e-12,
            "CoR must match the direct transcription within 1e-12");
  }
}

void criterion_constant_letter() {
  Pipeline p = make_pipeline(100, 21, {Family::Ordering});
  const MetricsReport report =
      run_pipeline(p, MockModel{MockKind::constant_letter, 'a', 0}, 21, fresh_dir("constant"));
  const FamilyScore& score = report.families.at("ordering");
  require(score.cr.has_value() && *score.cr == 1.0,
          "constant_letter CR over the full ordering family must equal 1.0 exactly");
  require(score.cor == 0.25, "constant_letter CoR must equal 0.25 exactly");
  require(score.failed == 0, "no trial may fail under a mock");
}

void criterion_oracle() {
  Pipeline p = make_pipeline(100, 22, kEveryFamily);
  const MetricsReport report =
      run_pipeline(p, MockModel{MockKind::oracle, 'a', 0}, 22, fresh_dir("oracle"));
  for (Family family : kEveryFamily) {
    const FamilyScore& score = report.families.at(to_string(family));
    require(score.acc.mean == 100.0 && score.acc.min == 100.0 && score.acc.max == 100.0 &&
                score.acc.std_dev == 0.0,
            to_string(family) + ": oracle accuracy must be exactly 100%");
    require(score.cor == 1.0, to_string(family) + ": oracle CoR must equal 1.0");
    if (cr_applicable(family)) {
      require(score.cr.has_value() && *score.cr == 1.0,
              to_string(family) + ": oracle CR must equal 1.0");
    } else {
      require(!score.cr.has_value(),
              to_string(family) + ": CR must be not-applicable");
    }
    require(score.failed == 0, to_string(family) + ": no failed trials expected");
  }
}

void criterion_random_baseline() {
  // 17.1% two-option, 82.9% four-option, 1000 items.
  const Benchmark mixed = testsupport::make_mixed_benchmark(171, 829);
  const BaselineReport baseline = random_baseline(mixed, 6);
  require_eq(baseline.analytic_pct, 29.3, 0.1, "analytic baseline");
  require(std::abs(baseline.simulated_pct - baseline.analytic_pct) < 2.0,
          "simulated baseline must land within 2 points of analytic");
}

void criterion_bias() {
  Pipeline p = make_pipeline(100, 23, {Family::Default, Family::Ordering});

  {
    TrialCache cache(fresh_dir("bias_longest") / "trials.jsonl");
    for (const auto& plan : p.plans) {
      run_plan(p.benchmark, p.variants, plan,
               mock_model_fn(MockModel{MockKind::longest_picker, 'a', 0}), cache);
    }
    std::vector<BiasTrialView> views;
    for (const auto& plan : p.plans) {
      auto v = collect_bias_views(p.benchmark, p.variants, plan, cache);
      views.insert(views.end(), v.begin(), v.end());
    }
    const BiasReport bias = longest_choice_bias(views);
    require(bias.overall_rate == 1.0, "longest_picker overall bias rate must equal 1.0");
  }
  {
    TrialCache cache(fresh_dir("bias_oracle") / "trials.jsonl");
    for (const auto& plan : p.plans) {
      run_plan(p.benchmark, p.variants, plan, mock_model_fn(MockModel{MockKind::oracle, 'a', 0}),
               cache);
    }
    std::vector<BiasTrialView> views;
    for (const auto& plan : p.plans) {
      auto v = collect_bias_views(p.benchmark, p.variants, plan, cache);
      views.insert(views.end(), v.begin(), v.end());
    }
    const BiasReport bias = longest_choice_bias(views);
    require(bias.conditional_rate_given_longest_is_gt.has_value() &&
                *bias.conditional_rate_given_longest_is_gt == 1.0,
            "oracle conditional bias rate must equal 1.0");
    require(bias.overall_rate == bias.share_longest_is_gt,
            "oracle overall rate must equal the share where longest is correct");
  }

  // The report serializes the reference magnitudes without loss.
  MetricsReport report;
  report.benchmark_name = "reference";
  BiasReport reference;
  reference.overall_rate = 0.5238;           // within the 42-52% band
  reference.conditional_rate_given_longest_is_gt = 0.7093;  // within 70-78%
  reference.share_longest_is_gt = 0.4505;
  reference.parsed_trials = 100000;
  report.bias = reference;
  const json round_tripped = json::parse(report_json_string(report));
  require(round_tripped.at("bias").at("overall_rate").get<double>() == 0.5238,
          "overall rate must round-trip exactly");
  require(round_tripped.at("bias").at("conditional_rate_given_longest_is_gt").get<double>() ==
              0.7093,
          "conditional rate must round-trip exactly");
  require(round_tripped.at("bias").at("share_longest_is_gt").get<double>() == 0.4505,
          "share must round-trip exactly");
}

void criterion_determinism_and_resume() {
  auto pipeline_bytes = [&](const fs::path& dir) {
    Pipeline p = make_pipeline(100, 31, kEveryFamily);
    const MetricsReport report =
        run_pipeline(p, MockModel{MockKind::uniform_random, 'a', 31}, 31, dir);
    return report_json_string(report);
  };
  const std::string first = pipeline_bytes(fresh_dir("det_a"));
  const std::string second = pipeline_bytes(fresh_dir("det_b"));
  require(!first.empty() && first == second,
          "plan -> run -> score twice must produce byte-identical report JSON");

  // Interrupt the ordering run at 50% and resume.
  Pipeline p = make_pipeline(100, 32, {Family::Ordering});
  const TrialPlan& plan = p.plans.front();
  TrialCache cache(fresh_dir("resume") / "trials.jsonl");
  std::size_t calls = 0;
  ModelFn counted = [&](const PerturbedItem& item, const RenderedPrompt&, const std::string&) {
    ++calls;
    return MockModel{MockKind::uniform_random, 'a', 32}.respond(item);
  };
  RunOptions half;
  half.max_calls = plan.entries.size() / 2;
  const RunStats interrupted = run_plan(p.benchmark, p.variants, plan, counted, cache, half);
  require(interrupted.executed == plan.entries.size() / 2,
          "interrupted run must execute exactly half the trials");
  const RunStats resumed = run_plan(p.benchmark, p.variants, plan, counted, cache);
  require(resumed.cached == plan.entries.size() / 2 &&
              resumed.executed == plan.entries.size() - plan.entries.size() / 2,
          "resume must issue exactly the missing trials");
  require(calls == plan.entries.size(), "across both runs each trial is executed exactly once");
  require(cache.size() == plan.entries.size(), "cache must cover the full plan after resume");
}

void criterion_report_shape() {
  Pipeline p = make_pipeline(6, 2718, kEveryFamily);
  const MetricsReport report =
      run_pipeline(p, MockModel{MockKind::uniform_random, 'a', 5}, 2718, fresh_dir("golden"));
  const std::string markdown = render_markdown(report);

  // Structural parity with the published table layout: one row per family,
  // ACC mean±std [min, max], CR numeric only for ordering/question, CoR.
  for (Family family : kEveryFamily) {
    require(markdown.find("| " + family_display_name(family) + " | ") != std::string::npos,
            "markdown must hold a row for " + family_display_name(family));
  }
  std::istringstream lines(markdown);
  std::string line;
  while (std::getline(lines, line)) {
    for (Family family : {Family::AnswerRephrase, Family::DistractorRephrase, Family::Mix}) {
      if (line.rfind("| " + family_display_name(family) + " | ", 0) == 0) {
        require(line.find("| - |") != std::string::npos,
                family_display_name(family) + " row must render CR as \"-\"");
      }
    }
    for (Family family : {Family::Ordering, Family::QuestionRephrase}) {
      if (line.rfind("| " + family_display_name(family) + " | ", 0) == 0) {
        require(line.find("| - |") == std::string::npos,
                family_display_name(family) + " row must render a numeric CR");
      }
    }
  }

  const fs::path golden_path = fs::path(MCQA_TEST_DATA_DIR) / "golden_report.md";
  std::ifstream in(golden_path);
  require(in.good(), "golden file " + golden_path.string() + " must exist");
  std::ostringstream golden;
  golden << in.rdbuf();
  require(markdown == golden.str(), "rendered markdown must match the golden file byte-for-byte");
}

}  // namespace

int main() {
  run_criterion(1, "permutation completeness (24/2/6, identity first)", 1.0,
                criterion_permutations);
  run_criterion(2, "trial-plan cardinality (2400/700/700/700/700 at 100 items)", 1000.0,
                criterion_plan_cardinality);
  run_criterion(3, "mix sampler statistics (0.0625 +- 0.005 over 100k draws)", 10000.0,
                criterion_mix_statistics);
  run_criterion(4, "metric oracle equivalence (1000 random matrices, 1e-12)", 5000.0,
                criterion_metric_oracle);
  run_criterion(5, "constant-letter property (CR 1.0, CoR 0.25)", 10000.0,
                criterion_constant_letter);
  run_criterion(6, "oracle property (100% accuracy, CR 1.0, CoR 1.0)", 10000.0,
                criterion_oracle);
  run_criterion(7, "random baseline (29.3 +- 0.1 analytic, simulated within 2)", 5000.0,
                criterion_random_baseline);
  run_criterion(8, "bias instrumentation (definitional identities, lossless report)", 5000.0,
                criterion_bias);
  run_criterion(9, "end-to-end determinism and resume", 30000.0,
                criterion_determinism_and_resume);
  run_criterion(10, "report shape parity (golden file)", 5000.0, criterion_report_shape);

  if (failed_criteria > 0) {
    std::printf("%d criterion(s) failed\n", failed_criteria);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
