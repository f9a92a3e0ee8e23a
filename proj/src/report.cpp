#include "mcqa/report.hpp"

#include <cstdio>
#include <sstream>

#include "mcqa/stable_hash.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::string fmt(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string acc_column(const AccuracyStats& acc) {
  return fmt(acc.mean, 1) + " ± " + fmt(acc.std_dev, 1) + " [" + fmt(acc.min, 1) + ", " +
         fmt(acc.max, 1) + "]";
}

std::string cr_column(const std::optional<double>& cr) {
  return cr.has_value() ? fmt(*cr, 2) : "-";
}

std::string hex64(std::uint64_t value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

CategoryScore score_slice(const ResponseMatrix& matrix) {
  CategoryScore score;
  score.acc = accuracy_stats(matrix);
  score.cor = correctness_rate(matrix);
  score.failed = matrix.failed_count();
  if (cr_applicable(matrix.family)) {
    score.cr = consistency_rate(matrix);
  }
  return score;
}

json acc_to_json(const AccuracyStats& acc) {
  return json{{"mean", acc.mean}, {"std", acc.std_dev}, {"min", acc.min}, {"max", acc.max}};
}

AccuracyStats acc_from_json(const json& obj) {
  AccuracyStats acc;
  acc.mean = obj.at("mean").get<double>();
  acc.std_dev = obj.at("std").get<double>();
  acc.min = obj.at("min").get<double>();
  acc.max = obj.at("max").get<double>();
  return acc;
}

json category_to_json(const CategoryScore& score) {
  json obj;
  obj["acc"] = acc_to_json(score.acc);
  obj["cr"] = score.cr.has_value() ? json(*score.cr) : json(nullptr);
  obj["cor"] = score.cor;
  obj["failed"] = score.failed;
  return obj;
}

CategoryScore category_from_json(const json& obj) {
  CategoryScore score;
  score.acc = acc_from_json(obj.at("acc"));
  if (!obj.at("cr").is_null()) {
    score.cr = obj.at("cr").get<double>();
  }
  score.cor = obj.at("cor").get<double>();
  score.failed = obj.at("failed").get<std::size_t>();
  return score;
}

}  // namespace

std::string family_display_name(Family family) {
  switch (family) {
    case Family::Default: return "Default";
    case Family::Ordering: return "Choice ordering";
    case Family::QuestionRephrase: return "Question rephrasing";
    case Family::AnswerRephrase: return "Ground truth answer rephrasing";
    case Family::DistractorRephrase: return "Distractor rephrasing";
    case Family::Mix: return "Mix of perturbations";
  }
  return "?";
}

std::vector<BiasTrialView> collect_bias_views(const Benchmark& benchmark,
                                              const VariantMap& variants, const TrialPlan& plan,
                                              const TrialCache& cache) {
  std::vector<BiasTrialView> views;
  views.reserve(plan.entries.size());
  for (const auto& entry : plan.entries) {
    const McqaItem* item = find_item(benchmark, entry.item_id);
    if (item == nullptr) {
      continue;
    }
    const auto variants_it = variants.find(entry.item_id);
    const VariantSet* vs = variants_it == variants.end() ? nullptr : &variants_it->second;
    const PerturbedItem perturbed = apply_spec(*item, vs, entry.spec);
    const RenderedPrompt prompt = render_prompt(perturbed);
    const std::uint64_t hash = prompt_content_hash(prompt, item->audio_ref);
    const auto record = cache.get(entry.item_id, plan.family, entry.sample_index, hash);
    if (!record.has_value() || record->status != TrialStatus::ok) {
      continue;
    }
    BiasTrialView view;
    view.choices = perturbed.choices;
    view.parsed_position = record->parsed_position;
    view.gt_position = perturbed.gt_position;
    views.push_back(std::move(view));
  }
  return views;
}

MetricsReport score_run(const Benchmark& benchmark, const VariantMap& variants,
                        const std::vector<TrialPlan>& plans, const TrialCache& cache,
                        std::uint64_t run_seed) {
  MetricsReport report;
  report.benchmark_name = benchmark.name;
  report.run_seed = run_seed;

  for (const auto& plan : plans) {
    const std::string name = to_string(plan.family);
    report.plan_hashes[name] = hex64(stable_hash(plan_to_jsonl(plan)));

    const ResponseMatrix matrix = build_response_matrix(benchmark, variants, plan, cache);
    FamilyScore score;
    static_cast<CategoryScore&>(score) = score_slice(matrix);
    for (const auto& category : benchmark.category_names) {
      const ResponseMatrix slice = matrix.filtered_by_category(category);
      if (!slice.items.empty()) {
        score.per_category.emplace(category, score_slice(slice));
      }
    }
    report.families.emplace(name, std::move(score));
  }

  // Length bias, pooled over rephrase families when any were run.
  std::vector<BiasTrialView> views;
  for (const auto& plan : plans) {
    if (family_needs_variants(plan.family) && plan.family != Family::Mix) {
      auto v = collect_bias_views(benchmark, variants, plan, cache);
      views.insert(views.end(), v.begin(), v.end());
    }
  }
  if (views.empty()) {
    for (const auto& plan : plans) {
      auto v = collect_bias_views(benchmark, variants, plan, cache);
      views.insert(views.end(), v.begin(), v.end());
    }
  }
  if (!views.empty()) {
    try {
      report.bias = longest_choice_bias(views);
    } catch (const std::runtime_error&) {
      // no parsed trials; the block stays empty
    }
  }

  report.baseline = random_baseline(benchmark, run_seed);
  return report;
}

json report_to_json(const MetricsReport& report) {
  json obj;
  obj["benchmark"] = report.benchmark_name;
  obj["run_seed"] = report.run_seed;
  obj["std_convention"] = report.std_convention;
  obj["plan_hashes"] = report.plan_hashes;

  json families = json::object();
  for (const auto& [name, score] : report.families) {
    json entry = category_to_json(score);
    json per_category = json::object();
    for (const auto& [category, cat_score] : score.per_category) {
      per_category[category] = category_to_json(cat_score);
    }
    entry["per_category"] = std::move(per_category);
    families[name] = std::move(entry);
  }
  obj["families"] = std::move(families);

  if (report.bias.has_value()) {
    obj["bias"] = json{
        {"overall_rate", report.bias->overall_rate},
        {"conditional_rate_given_longest_is_gt",
         report.bias->conditional_rate_given_longest_is_gt.has_value()
             ? json(*report.bias->conditional_rate_given_longest_is_gt)
             : json(nullptr)},
        {"share_longest_is_gt", report.bias->share_longest_is_gt},
        {"parsed_trials", report.bias->parsed_trials},
    };
  } else {
    obj["bias"] = nullptr;
  }
  if (report.baseline.has_value()) {
    obj["baseline"] = json{{"analytic_pct", report.baseline->analytic_pct},
                           {"simulated_pct", report.baseline->simulated_pct},
                           {"seed", report.baseline->seed}};
  } else {
    obj["baseline"] = nullptr;
  }
  return obj;
}

MetricsReport report_from_json(const json& obj) {
  MetricsReport report;
  report.benchmark_name = obj.at("benchmark").get<std::string>();
  report.run_seed = obj.at("run_seed").get<std::uint64_t>();
  report.std_convention = obj.at("std_convention").get<std::string>();
  if (obj.contains("plan_hashes")) {
    report.plan_hashes =
        obj.at("plan_hashes").get<std::map<std::string, std::string>>();
  }
  for (const auto& [name, entry] : obj.at("families").items()) {
    FamilyScore score;
    static_cast<CategoryScore&>(score) = category_from_json(entry);
    for (const auto& [category, cat_entry] : entry.at("per_category").items()) {
      score.per_category.emplace(category, category_from_json(cat_entry));
    }
    report.families.emplace(name, std::move(score));
  }
  if (!obj.at("bias").is_null()) {
    const json& bias = obj.at("bias");
    BiasReport b;
    b.overall_rate = bias.at("overall_rate").get<double>();
    if (!bias.at("conditional_rate_given_longest_is_gt").is_null()) {
      b.conditional_rate_given_longest_is_gt =
          bias.at("conditional_rate_given_longest_is_gt").get<double>();
    }
    b.share_longest_is_gt = bias.at("share_longest_is_gt").get<double>();
    b.parsed_trials = bias.at("parsed_trials").get<std::size_t>();
    report.bias = b;
  }
  if (!obj.at("baseline").is_null()) {
    const json& baseline = obj.at("baseline");
    BaselineReport b;
    b.analytic_pct = baseline.at("analytic_pct").get<double>();
    b.simulated_pct = baseline.at("simulated_pct").get<double>();
    b.seed = baseline.at("seed").get<std::uint64_t>();
    report.baseline = b;
  }
  return report;
}

std::string report_json_string(const MetricsReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::string render_markdown(const MetricsReport& report) {
  std::ostringstream out;
  out << "# MCQA robustness report\n\n";
  out << "- Benchmark: " << report.benchmark_name << "\n";
  out << "- Run seed: " << report.run_seed << "\n";
  out << "- Accuracy std convention: " << report.std_convention << "\n";
  std::size_t failed_total = 0;
  for (const auto& [name, score] : report.families) {
    failed_total += score.failed;
  }
  out << "- Failed trials: " << failed_total << "\n";
  for (const auto& [name, hash] : report.plan_hashes) {
    out << "- Plan hash (" << name << "): " << hash << "\n";
  }
  out << "\n";

  out << "| Perturbation | ACC% (mean±std, [min, max]) | CR | CoR | Failed |\n";
  out << "| --- | --- | --- | --- | --- |\n";
  for (Family family : kAllFamilies) {
    const auto it = report.families.find(to_string(family));
    if (it == report.families.end()) {
      continue;
    }
    const FamilyScore& score = it->second;
    out << "| " << family_display_name(family) << " | " << acc_column(score.acc) << " | "
        << cr_column(score.cr) << " | " << fmt(score.cor, 2) << " | " << score.failed << " |\n";
  }
  out << "\n";

  for (Family family : kAllFamilies) {
    const auto it = report.families.find(to_string(family));
    if (it == report.families.end() || it->second.per_category.empty()) {
      continue;
    }
    out << "## " << family_display_name(family) << " by category\n\n";
    out << "| Category | ACC% (mean±std, [min, max]) | CR | CoR | Failed |\n";
    out << "| --- | --- | --- | --- | --- |\n";
    for (const auto& [category, score] : it->second.per_category) {
      out << "| " << category << " | " << acc_column(score.acc) << " | " << cr_column(score.cr)
          << " | " << fmt(score.cor, 2) << " | " << score.failed << " |\n";
    }
    out << "\n";
  }

  if (report.bias.has_value()) {
    const BiasReport& bias = *report.bias;
    out << "## Longest-choice bias\n\n";
    out << "- Longest choice selected: " << fmt(100.0 * bias.overall_rate, 2) << "% of "
        << bias.parsed_trials << " parsed trials\n";
    out << "- Selected when the longest choice is correct: "
        << (bias.conditional_rate_given_longest_is_gt.has_value()
                ? fmt(100.0 * *bias.conditional_rate_given_longest_is_gt, 2) + "%"
                : std::string("-"))
        << "\n";
    out << "- Longest choice is the correct one: " << fmt(100.0 * bias.share_longest_is_gt, 2)
        << "% of parsed trials\n\n";
  }
  if (report.baseline.has_value()) {
    const BaselineReport& baseline = *report.baseline;
    out << "## Random baseline\n\n";
    out << "- Analytic: " << fmt(baseline.analytic_pct, 1) << "%\n";
    out << "- Simulated (seed " << baseline.seed << "): " << fmt(baseline.simulated_pct, 1)
        << "%\n";
  }
  return out.str();
}

std::string render_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "family,category,acc_mean,acc_std,acc_min,acc_max,cr,cor,failed\n";
  auto row = [&out](const std::string& family, const std::string& category,
                    const CategoryScore& score) {
    out << family << "," << category << "," << fmt(score.acc.mean, 1) << ","
        << fmt(score.acc.std_dev, 1) << "," << fmt(score.acc.min, 1) << ","
        << fmt(score.acc.max, 1) << "," << cr_column(score.cr) << "," << fmt(score.cor, 2) << ","
        << score.failed << "\n";
  };
  for (Family family : kAllFamilies) {
    const auto it = report.families.find(to_string(family));
    if (it == report.families.end()) {
      continue;
    }
    row(to_string(family), "overall", it->second);
    for (const auto& [category, score] : it->second.per_category) {
      row(to_string(family), category, score);
    }
  }
  return out.str();
}

}  // namespace mcqa
