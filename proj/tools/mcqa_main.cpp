#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcqa/core_model.hpp"
#include "mcqa/metrics.hpp"
#include "mcqa/model_client.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/report.hpp"
#include "mcqa/runner.hpp"
#include "mcqa/variant_gen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string benchmark_path;
  std::string variants_path;
  std::string families = "";
  std::uint64_t seed = 0;
  std::string endpoint_config_path;
  std::string mock_spec;
  std::string cache_dir = "cache";
  std::string out_dir = "out";
  std::string formats = "md";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool benchmark_required = true) {
  auto* b = cmd->add_option("--benchmark", opts.benchmark_path, "Benchmark JSONL file");
  if (benchmark_required) {
    b->required();
  }
  cmd->add_option("--variants", opts.variants_path, "Variant JSONL file");
  cmd->add_option("--families", opts.families,
                  "Comma-separated families (default,ordering,question,answer,distractor,mix)");
  cmd->add_option("--seed", opts.seed, "Run seed (recorded in every artifact)");
  cmd->add_option("--endpoint-config", opts.endpoint_config_path, "Endpoint config JSON");
  cmd->add_option("--mock", opts.mock_spec,
                  "Mock model: oracle, constant_letter[:x], longest_picker, "
                  "uniform_random[:seed]");
  cmd->add_option("--cache-dir", opts.cache_dir, "Trial cache directory");
  cmd->add_option("--out", opts.out_dir, "Output directory for plans and reports");
  cmd->add_option("--format", opts.formats, "Extra report formats: md,csv");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) {
      parts.push_back(part);
    }
  }
  return parts;
}

std::vector<mcqa::Family> resolve_families(const CommonOpts& opts) {
  std::string spec = opts.families;
  if (spec.empty()) {
    // Without variants only the families that need none are runnable.
    spec = opts.variants_path.empty() ? "default,ordering"
                                      : "default,ordering,question,answer,distractor,mix";
  }
  std::vector<mcqa::Family> families;
  for (const auto& name : split_list(spec)) {
    families.push_back(mcqa::family_from_string(name));
  }
  if (families.empty()) {
    throw std::runtime_error("no families selected");
  }
  return families;
}

mcqa::Benchmark load_benchmark_checked(const CommonOpts& opts) {
  return mcqa::load_benchmark(opts.benchmark_path, opts.seed);
}

mcqa::VariantMap load_variants_checked(const CommonOpts& opts, const mcqa::Benchmark& benchmark) {
  if (opts.variants_path.empty()) {
    return {};
  }
  auto result = mcqa::load_variants(opts.variants_path, benchmark);
  if (!result.missing_item_ids.empty()) {
    std::cerr << "warning: " << result.missing_item_ids.size()
              << " item(s) have no variant set and participate only in the default/ordering "
                 "families\n";
  }
  return std::move(result.variants);
}

fs::path plan_path(const CommonOpts& opts, mcqa::Family family) {
  return fs::path(opts.out_dir) / ("plan_" + mcqa::to_string(family) + ".jsonl");
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

void write_run_manifest(const CommonOpts& opts, const std::vector<mcqa::Family>& families) {
  json manifest;
  manifest["run_seed"] = opts.seed;
  manifest["benchmark"] = opts.benchmark_path;
  manifest["variants"] = opts.variants_path;
  json names = json::array();
  for (auto family : families) {
    names.push_back(mcqa::to_string(family));
  }
  manifest["families"] = std::move(names);
  write_text(fs::path(opts.out_dir) / "run_manifest.json", manifest.dump(2) + "\n");
}

mcqa::ModelFn resolve_model(const CommonOpts& opts, int& max_concurrency) {
  const bool has_endpoint = !opts.endpoint_config_path.empty();
  const bool has_mock = !opts.mock_spec.empty();
  if (has_endpoint == has_mock) {
    throw mcqa::ConfigError("pass exactly one of --endpoint-config or --mock");
  }
  if (has_endpoint) {
    const auto cfg = mcqa::load_endpoint_config(opts.endpoint_config_path);
    max_concurrency = cfg.max_concurrency;
    return mcqa::endpoint_model_fn(cfg);
  }
  max_concurrency = 1;
  return mcqa::mock_model_fn(mcqa::parse_mock_spec(opts.mock_spec));
}

int cmd_plan(const CommonOpts& opts) {
  const auto benchmark = load_benchmark_checked(opts);
  const auto variants = load_variants_checked(opts, benchmark);
  const auto families = resolve_families(opts);
  fs::create_directories(opts.out_dir);

  for (auto family : families) {
    if (mcqa::family_needs_variants(family) && variants.empty()) {
      throw std::runtime_error("family \"" + mcqa::to_string(family) +
                               "\" needs --variants");
    }
    const auto plan = mcqa::build_trial_plan(benchmark, variants, family, opts.seed);
    mcqa::write_plan(plan_path(opts, family), plan);
    std::cout << mcqa::to_string(family) << ": " << plan.entries.size() << " trials\n";
  }
  write_run_manifest(opts, families);
  return 0;
}

int cmd_run(const CommonOpts& opts) {
  const auto benchmark = load_benchmark_checked(opts);
  const auto variants = load_variants_checked(opts, benchmark);
  const auto families = resolve_families(opts);

  int max_concurrency = 1;
  const auto model = resolve_model(opts, max_concurrency);
  mcqa::TrialCache cache(fs::path(opts.cache_dir) / "trials.jsonl");

  for (auto family : families) {
    const auto path = plan_path(opts, family);
    if (!fs::exists(path)) {
      throw std::runtime_error("no plan file " + path.string() + "; run `plan` first");
    }
    const auto plan = mcqa::load_plan(path, opts.seed);
    mcqa::RunOptions run_opts;
    run_opts.max_concurrency = max_concurrency;
    const auto stats = mcqa::run_plan(benchmark, variants, plan, model, cache, run_opts);
    std::cout << mcqa::to_string(family) << ": " << stats.total << " trials, " << stats.cached
              << " cached, " << stats.executed << " executed, " << stats.failed << " failed\n";
  }
  return 0;
}

int cmd_score(const CommonOpts& opts, bool render_only) {
  const fs::path report_path = fs::path(opts.out_dir) / "report.json";
  mcqa::MetricsReport report;

  if (render_only) {
    std::ifstream in(report_path);
    if (!in) {
      throw std::runtime_error("cannot open " + report_path.string() + "; run `score` first");
    }
    json obj;
    in >> obj;
    report = mcqa::report_from_json(obj);
  } else {
    const auto benchmark = load_benchmark_checked(opts);
    const auto variants = load_variants_checked(opts, benchmark);
    const auto families = resolve_families(opts);

    std::vector<mcqa::TrialPlan> plans;
    for (auto family : families) {
      const auto path = plan_path(opts, family);
      if (!fs::exists(path)) {
        throw std::runtime_error("no plan file " + path.string() + "; run `plan` first");
      }
      plans.push_back(mcqa::load_plan(path, opts.seed));
    }
    mcqa::TrialCache cache(fs::path(opts.cache_dir) / "trials.jsonl");
    report = mcqa::score_run(benchmark, variants, plans, cache, opts.seed);
    fs::create_directories(opts.out_dir);
    write_text(report_path, mcqa::report_json_string(report));
    std::cout << "wrote " << report_path.string() << "\n";
  }

  for (const auto& format : split_list(opts.formats)) {
    if (format == "md") {
      const fs::path path = fs::path(opts.out_dir) / "report.md";
      write_text(path, mcqa::render_markdown(report));
      std::cout << "wrote " << path.string() << "\n";
    } else if (format == "csv") {
      const fs::path path = fs::path(opts.out_dir) / "report.csv";
      write_text(path, mcqa::render_csv(report));
      std::cout << "wrote " << path.string() << "\n";
    } else if (format != "json") {
      throw std::runtime_error("unknown format \"" + format + "\" (expected md or csv)");
    }
  }
  return 0;
}

int cmd_generate_variants(const CommonOpts& opts, const std::string& axes_spec) {
  if (opts.endpoint_config_path.empty()) {
    std::cerr << "generate-variants needs a generation endpoint: pass --endpoint-config "
                 "pointing at a chat-completions style service\n";
    return 2;
  }
  const auto benchmark = load_benchmark_checked(opts);
  const auto cfg = mcqa::load_endpoint_config(opts.endpoint_config_path);

  mcqa::AxisSelection axes{false, false, false};
  for (const auto& axis : split_list(axes_spec)) {
    if (axis == "question") {
      axes.question = true;
    } else if (axis == "answer") {
      axes.answer = true;
    } else if (axis == "distractor") {
      axes.distractor = true;
    } else {
      throw std::runtime_error("unknown axis \"" + axis + "\"");
    }
  }

  mcqa::ChatFn generator = [&cfg](const std::string& prompt) {
    mcqa::RenderedPrompt rendered;
    rendered.text = prompt;
    return mcqa::query_model(cfg, rendered, "");
  };

  const auto result = mcqa::generate_variants(benchmark, generator, axes);
  fs::create_directories(opts.out_dir);
  const fs::path variants_path = fs::path(opts.out_dir) / "variants.jsonl";
  mcqa::write_variants(variants_path, result.variants);
  const fs::path review_path = fs::path(opts.out_dir) / "variants_review.jsonl";
  write_text(review_path, mcqa::review_to_jsonl(result.review));

  std::cout << "wrote " << variants_path.string() << " (" << result.variants.size()
            << " items)\n";
  std::cout << "wrote " << review_path.string() << " (" << result.review.size()
            << " collisions flagged for review)\n";
  if (result.generated_count > 0) {
    const double rate = static_cast<double>(result.review.size()) /
                        static_cast<double>(result.generated_count);
    if (rate > 0.05) {
      std::cerr << "warning: collision rate " << rate * 100.0
                << "% exceeds 5%; review the flagged paraphrases before evaluating\n";
    }
  }
  return 0;
}

int cmd_baseline(const CommonOpts& opts) {
  const auto benchmark = load_benchmark_checked(opts);
  const auto baseline = mcqa::random_baseline(benchmark, opts.seed);
  json obj;
  obj["analytic_pct"] = baseline.analytic_pct;
  obj["simulated_pct"] = baseline.simulated_pct;
  obj["seed"] = baseline.seed;
  std::cout << obj.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCQA robustness harness: perturb, evaluate and score multiple-choice "
               "benchmarks against chat-style model endpoints"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string axes_spec = "question,answer,distractor";

  auto* plan = app.add_subcommand("plan", "Write deterministic trial plans per family");
  add_common(plan, opts);
  auto* run = app.add_subcommand("run", "Execute planned trials against a model");
  add_common(run, opts);
  auto* score = app.add_subcommand("score", "Compute metrics from the trial cache");
  add_common(score, opts);
  auto* report = app.add_subcommand("report", "Render tables from an existing report.json");
  add_common(report, opts, /*benchmark_required=*/false);
  auto* generate =
      app.add_subcommand("generate-variants", "Generate paraphrase variants via an endpoint");
  add_common(generate, opts);
  generate->add_option("--axes", axes_spec, "Axes to rephrase (question,answer,distractor)");
  auto* baseline = app.add_subcommand("baseline", "Print the random-choice baseline");
  add_common(baseline, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      return cmd_plan(opts);
    }
    if (run->parsed()) {
      return cmd_run(opts);
    }
    if (score->parsed()) {
      return cmd_score(opts, false);
    }
    if (report->parsed()) {
      return cmd_score(opts, true);
    }
    if (generate->parsed()) {
      return cmd_generate_variants(opts, axes_spec);
    }
    if (baseline->parsed()) {
      return cmd_baseline(opts);
    }
  } catch (const mcqa::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
