#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcqa/metrics.hpp"

namespace mcqa {

struct CategoryScore {
  AccuracyStats acc;
  std::optional<double> cr;  // absent renders as "-"
  double cor = 0;
  std::size_t failed = 0;
};

struct FamilyScore : CategoryScore {
  std::map<std::string, CategoryScore> per_category;
};

// The canonical scoring artifact. JSON is the programmatic surface; the
// Markdown and CSV tables are derived views of it.
struct MetricsReport {
  std::string benchmark_name;
  std::uint64_t run_seed = 0;
  std::string std_convention = "population";
  std::map<std::string, std::string> plan_hashes;  // family -> hex hash of plan bytes
  std::map<std::string, FamilyScore> families;     // keyed by canonical family name
  std::optional<BiasReport> bias;
  std::optional<BaselineReport> baseline;
};

// Score every executed plan against the cache: accuracy stats, CR where
// applicable, CoR and failure counts, overall and per category, plus the
// length-bias block (pooled over the rephrase families when present, all
// families otherwise) and the random baseline.
MetricsReport score_run(const Benchmark& benchmark, const VariantMap& variants,
                        const std::vector<TrialPlan>& plans, const TrialCache& cache,
                        std::uint64_t run_seed);

// Bias views for one plan's parsed records (exposed for pooling trials
// across arbitrary plan selections).
std::vector<BiasTrialView> collect_bias_views(const Benchmark& benchmark,
                                              const VariantMap& variants, const TrialPlan& plan,
                                              const TrialCache& cache);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& obj);

// Deterministic serialized form (sorted keys, two-space indent, trailing
// newline); byte-identical for identical reports.
std::string report_json_string(const MetricsReport& report);

std::string render_markdown(const MetricsReport& report);
std::string render_csv(const MetricsReport& report);

std::string family_display_name(Family family);

}  // namespace mcqa
