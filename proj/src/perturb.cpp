#include "mcqa/perturb.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcqa/stable_hash.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<Permutation> make_orderings(int k) {
  std::vector<int> mapping(static_cast<std::size_t>(k));
  std::iota(mapping.begin(), mapping.end(), 0);
  std::vector<Permutation> out;
  int rank = 0;
  do {
    out.push_back(Permutation{k, mapping, rank});
    ++rank;
  } while (std::next_permutation(mapping.begin(), mapping.end()));
  return out;
}

int variant_index_for(const json& obj, const char* key) {
  const int v = obj.at(key).get<int>();
  if (v < 0 || v >= kVariantCount) {
    fail(std::string("variant index \"") + key + "\" out of range: " + std::to_string(v));
  }
  return v;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Default: return "default";
    case Family::Ordering: return "ordering";
    case Family::QuestionRephrase: return "question_rephrase";
    case Family::AnswerRephrase: return "answer_rephrase";
    case Family::DistractorRephrase: return "distractor_rephrase";
    case Family::Mix: return "mix";
  }
  fail("invalid family");
}

Family family_from_string(std::string_view s) {
  if (s == "default") return Family::Default;
  if (s == "ordering") return Family::Ordering;
  if (s == "question_rephrase" || s == "question") return Family::QuestionRephrase;
  if (s == "answer_rephrase" || s == "answer") return Family::AnswerRephrase;
  if (s == "distractor_rephrase" || s == "distractor") return Family::DistractorRephrase;
  if (s == "mix") return Family::Mix;
  fail("unknown family \"" + std::string(s) + "\"");
}

bool family_needs_variants(Family family) {
  return family == Family::QuestionRephrase || family == Family::AnswerRephrase ||
         family == Family::DistractorRephrase || family == Family::Mix;
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (mapping[i] != static_cast<int>(i)) {
      return false;
    }
  }
  return true;
}

const std::vector<Permutation>& enumerate_orderings(int k) {
  if (k < 2 || k > 4) {
    fail("enumerate_orderings: arity " + std::to_string(k) + " out of range [2,4]");
  }
  static const std::vector<Permutation> tables[] = {make_orderings(2), make_orderings(3),
                                                    make_orderings(4)};
  return tables[k - 2];
}

Permutation identity_permutation(int k) { return enumerate_orderings(k)[0]; }

PerturbationSpec default_spec(Family family, int arity) {
  PerturbationSpec spec;
  spec.family = family;
  spec.ordering = identity_permutation(arity);
  return spec;
}

PerturbationSpec sample_mix(std::string_view item_id, std::uint64_t run_seed, int sample_index,
                            const MixAxes& axes) {
  if (sample_index < 1 || sample_index >= kVariantCount) {
    fail("sample_mix: sample_index " + std::to_string(sample_index) +
         " out of range [1," + std::to_string(kVariantCount - 1) + "]");
  }
  if (!axes.question || !axes.answer || !axes.distractor) {
    fail("sample_mix: item \"" + std::string(item_id) + "\" lacks a variant set");
  }

  const auto& orderings = enumerate_orderings(axes.arity);
  SplitMix64 rng(StableHash()
                     .add(run_seed)
                     .add(item_id)
                     .add(static_cast<std::uint64_t>(sample_index))
                     .add(std::string_view("mix"))
                     .value());

  // All four coins are drawn before any value so the flag statistics are
  // independent of which axes fire.
  const bool apply_ordering = rng.coin();
  const bool apply_question = rng.coin();
  const bool apply_answer = rng.coin();
  const bool apply_distractor = rng.coin();

  PerturbationSpec spec = default_spec(Family::Mix, axes.arity);
  if (apply_ordering) {
    // Identity would negate the applied flag, so draw among the k!-1 others.
    const std::uint64_t rank = 1 + rng.below(orderings.size() - 1);
    spec.ordering = orderings[static_cast<std::size_t>(rank)];
  }
  if (apply_question) {
    spec.question_variant = 1 + static_cast<int>(rng.below(kVariantCount - 1));
  }
  if (apply_answer) {
    spec.answer_variant = 1 + static_cast<int>(rng.below(kVariantCount - 1));
  }
  if (apply_distractor) {
    spec.distractor_variant = 1 + static_cast<int>(rng.below(kVariantCount - 1));
  }
  return spec;
}

TrialPlan build_trial_plan(const Benchmark& benchmark, const VariantMap& variants, Family family,
                           std::uint64_t run_seed) {
  TrialPlan plan;
  plan.family = family;
  plan.run_seed = run_seed;

  for (const auto& item : benchmark.items) {
    const int arity = static_cast<int>(item.choices.size());
    const bool has_variants = variants.find(item.id) != variants.end();
    if (family_needs_variants(family) && !has_variants) {
      continue;  // covered only by the default and ordering families
    }

    switch (family) {
      case Family::Default:
        plan.entries.push_back({item.id, 0, default_spec(family, arity)});
        break;
      case Family::Ordering:
        for (const auto& perm : enumerate_orderings(arity)) {
          PerturbationSpec spec = default_spec(family, arity);
          spec.ordering = perm;
          plan.entries.push_back({item.id, perm.index, std::move(spec)});
        }
        break;
      case Family::QuestionRephrase:
      case Family::AnswerRephrase:
      case Family::DistractorRephrase:
        for (int v = 0; v < kVariantCount; ++v) {
          PerturbationSpec spec = default_spec(family, arity);
          if (family == Family::QuestionRephrase) {
            spec.question_variant = v;
          } else if (family == Family::AnswerRephrase) {
            spec.answer_variant = v;
          } else {
            spec.distractor_variant = v;
          }
          plan.entries.push_back({item.id, v, std::move(spec)});
        }
        break;
      case Family::Mix:
        plan.entries.push_back({item.id, 0, default_spec(family, arity)});
        for (int s = 1; s < kVariantCount; ++s) {
          plan.entries.push_back({item.id, s, sample_mix(item.id, run_seed, s, MixAxes{arity})});
        }
        break;
    }
  }

  if (plan.entries.empty()) {
    fail("trial plan for family \"" + to_string(family) +
         "\" is empty: no item has the required variant set");
  }
  return plan;
}

PerturbedItem apply_spec(const McqaItem& item, const VariantSet* variants,
                         const PerturbationSpec& spec) {
  const int arity = static_cast<int>(item.choices.size());
  if (spec.ordering.arity != arity ||
      spec.ordering.mapping.size() != static_cast<std::size_t>(arity)) {
    fail("apply_spec: ordering arity " + std::to_string(spec.ordering.arity) +
         " does not match item \"" + item.id + "\" with " + std::to_string(arity) + " choices");
  }
  auto check_index = [&](int v, const char* axis) {
    if (v < 0 || v >= kVariantCount) {
      fail(std::string("apply_spec: ") + axis + " variant index out of range: " +
           std::to_string(v));
    }
    if (v != 0 && variants == nullptr) {
      fail(std::string("apply_spec: item \"") + item.id + "\" has no variant set but " + axis +
           " variant " + std::to_string(v) + " was requested");
    }
  };
  check_index(spec.question_variant, "question");
  check_index(spec.answer_variant, "answer");
  check_index(spec.distractor_variant, "distractor");

  PerturbedItem out;
  out.item_id = item.id;
  out.spec = spec;
  out.question_text =
      variants ? variants->question_variants[static_cast<std::size_t>(spec.question_variant)]
               : item.question;

  // Selected texts in original choice order, before reordering.
  std::vector<std::string> selected(static_cast<std::size_t>(arity));
  std::size_t d = 0;
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    if (static_cast<int>(i) == item.gt_index) {
      selected[i] = variants
                        ? variants->answer_variants[static_cast<std::size_t>(spec.answer_variant)]
                        : item.choices[i].text;
    } else {
      selected[i] =
          variants ? variants->distractor_variants[d][static_cast<std::size_t>(
                         spec.distractor_variant)]
                   : item.choices[i].text;
      ++d;
    }
  }

  out.choices.reserve(static_cast<std::size_t>(arity));
  for (int p = 0; p < arity; ++p) {
    const int original = spec.ordering.mapping[static_cast<std::size_t>(p)];
    if (original < 0 || original >= arity) {
      fail("apply_spec: ordering mapping is not a valid permutation");
    }
    out.choices.push_back(
        Choice{static_cast<char>('a' + p), selected[static_cast<std::size_t>(original)]});
    if (original == item.gt_index) {
      out.gt_position = p;
    }
  }
  return out;
}

std::string plan_to_jsonl(const TrialPlan& plan) {
  std::ostringstream out;
  for (const auto& entry : plan.entries) {
    json obj;
    obj["item_id"] = entry.item_id;
    obj["sample_index"] = entry.sample_index;
    obj["family"] = to_string(entry.spec.family);
    obj["ordering"] = entry.spec.ordering.mapping;
    obj["q"] = entry.spec.question_variant;
    obj["a"] = entry.spec.answer_variant;
    obj["d"] = entry.spec.distractor_variant;
    out << obj.dump() << "\n";
  }
  return out.str();
}

void write_plan(const std::filesystem::path& path, const TrialPlan& plan) {
  std::ofstream out(path);
  if (!out) {
    fail("cannot write " + path.string());
  }
  out << plan_to_jsonl(plan);
}

TrialPlan load_plan(const std::filesystem::path& path, std::uint64_t run_seed) {
  std::ifstream in(path);
  if (!in) {
    fail("cannot open " + path.string());
  }
  TrialPlan plan;
  plan.run_seed = run_seed;
  bool family_set = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(path.string() + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }

    PlanEntry entry;
    entry.item_id = obj.at("item_id").get<std::string>();
    entry.sample_index = obj.at("sample_index").get<int>();
    entry.spec.family = family_from_string(obj.at("family").get<std::string>());

    const auto mapping = obj.at("ordering").get<std::vector<int>>();
    const int arity = static_cast<int>(mapping.size());
    const auto& orderings = enumerate_orderings(arity);
    auto it = std::find_if(orderings.begin(), orderings.end(),
                           [&](const Permutation& p) { return p.mapping == mapping; });
    if (it == orderings.end()) {
      fail(path.string() + ":" + std::to_string(line_no) + ": invalid ordering mapping");
    }
    entry.spec.ordering = *it;
    entry.spec.question_variant = variant_index_for(obj, "q");
    entry.spec.answer_variant = variant_index_for(obj, "a");
    entry.spec.distractor_variant = variant_index_for(obj, "d");

    if (!family_set) {
      plan.family = entry.spec.family;
      family_set = true;
    } else if (plan.family != entry.spec.family) {
      fail(path.string() + ":" + std::to_string(line_no) + ": mixed families in one plan file");
    }
    plan.entries.push_back(std::move(entry));
  }
  if (plan.entries.empty()) {
    fail("plan file " + path.string() + " is empty");
  }
  return plan;
}

}  // namespace mcqa
