#include "mcqa/core_model.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mcqa/stable_hash.hpp"
#include "mcqa/text.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string line_prefix(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no) + ": ";
}

// Reads a JSONL file line by line; blank lines are ignored.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) {
    fail("cannot open " + path.string());
  }
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
      fail(line_prefix(path, line_no) + "parse error: " + e.what());
    }
    if (!obj.is_object()) {
      fail(line_prefix(path, line_no) + "expected a JSON object");
    }
    fn(line_no, obj);
  }
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    fail(where + "missing or non-string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

std::string to_string(CorrectnessMode mode) {
  return mode == CorrectnessMode::exact_choice ? "exact_choice" : "substring_match";
}

CorrectnessMode correctness_mode_from_string(std::string_view s) {
  if (s == "exact_choice") {
    return CorrectnessMode::exact_choice;
  }
  if (s == "substring_match") {
    return CorrectnessMode::substring_match;
  }
  fail("unknown correctness_mode \"" + std::string(s) + "\"");
}

const McqaItem* find_item(const Benchmark& benchmark, std::string_view item_id) {
  for (const auto& item : benchmark.items) {
    if (item.id == item_id) {
      return &item;
    }
  }
  return nullptr;
}

std::uint64_t item_reduction_seed(std::uint64_t run_seed, std::string_view item_id) {
  return StableHash().add(run_seed).add(item_id).add(std::string_view("reduce")).value();
}

NormalizedChoices normalize_choices(const std::vector<Choice>& raw_choices, int gt_index,
                                    std::uint64_t seed) {
  if (raw_choices.size() < 2) {
    fail("normalize_choices: need at least 2 choices, got " +
         std::to_string(raw_choices.size()));
  }
  if (gt_index < 0 || static_cast<std::size_t>(gt_index) >= raw_choices.size()) {
    fail("normalize_choices: gt_index " + std::to_string(gt_index) + " out of range");
  }
  if (raw_choices.size() <= 4) {
    return {raw_choices, gt_index};
  }

  std::vector<std::size_t> distractors;
  distractors.reserve(raw_choices.size() - 1);
  for (std::size_t i = 0; i < raw_choices.size(); ++i) {
    if (static_cast<int>(i) != gt_index) {
      distractors.push_back(i);
    }
  }
  // Partial Fisher-Yates: the first three slots are a uniform sample
  // without replacement.
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(distractors.size() - i));
    std::swap(distractors[i], distractors[j]);
  }

  std::vector<std::size_t> kept(distractors.begin(), distractors.begin() + 3);
  kept.push_back(static_cast<std::size_t>(gt_index));
  std::sort(kept.begin(), kept.end());

  NormalizedChoices out;
  out.choices.reserve(4);
  for (std::size_t pos = 0; pos < kept.size(); ++pos) {
    Choice c = raw_choices[kept[pos]];
    c.label = static_cast<char>('a' + pos);
    out.choices.push_back(std::move(c));
    if (kept[pos] == static_cast<std::size_t>(gt_index)) {
      out.gt_index = static_cast<int>(pos);
    }
  }
  return out;
}

void validate_item(const McqaItem& item) {
  const std::string where = "item \"" + item.id + "\": ";
  if (item.id.empty()) {
    fail("item with empty id");
  }
  if (item.choices.size() < 2 || item.choices.size() > 4) {
    fail(where + "choices: expected 2..4 entries, got " + std::to_string(item.choices.size()));
  }
  if (item.gt_index < 0 || static_cast<std::size_t>(item.gt_index) >= item.choices.size()) {
    fail(where + "gt_index: " + std::to_string(item.gt_index) + " out of range for " +
         std::to_string(item.choices.size()) + " choices");
  }
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    const Choice& c = item.choices[i];
    if (c.label != static_cast<char>('a' + i)) {
      fail(where + "choices: label at position " + std::to_string(i) +
           " is not assigned in presentation order");
    }
    if (text::normalize_whitespace(c.text).empty()) {
      fail(where + "choices: empty text at position " + std::to_string(i));
    }
  }
  // Exactly one choice may carry the ground-truth text, otherwise
  // correctness is ambiguous.
  const std::string gt = text::canonical(item.ground_truth().text);
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    if (static_cast<int>(i) != item.gt_index && text::canonical(item.choices[i].text) == gt) {
      fail(where + "choices: distractor at position " + std::to_string(i) +
           " duplicates the ground-truth text");
    }
  }
}

Benchmark load_benchmark(const std::filesystem::path& path, std::uint64_t run_seed) {
  Benchmark benchmark;
  benchmark.name = path.stem().string();
  std::unordered_set<std::string> seen_ids;
  std::set<std::string> seen_categories;

  for_each_jsonl(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = line_prefix(path, line_no);
    McqaItem item;
    item.id = require_string(obj, "id", where);
    if (!seen_ids.insert(item.id).second) {
      fail(where + "duplicate item id \"" + item.id + "\"");
    }
    item.audio_ref = obj.value("audio_ref", std::string{});
    item.question = text::normalize_whitespace(require_string(obj, "question", where));
    item.category = require_string(obj, "category", where);
    if (obj.contains("correctness_mode")) {
      item.correctness_mode =
          correctness_mode_from_string(obj.at("correctness_mode").get<std::string>());
    }

    auto choices_it = obj.find("choices");
    if (choices_it == obj.end() || !choices_it->is_array()) {
      fail(where + "missing or non-array field \"choices\"");
    }
    std::vector<Choice> raw;
    raw.reserve(choices_it->size());
    for (const auto& entry : *choices_it) {
      if (!entry.is_string()) {
        fail(where + "choices must be strings");
      }
      Choice c;
      c.label = static_cast<char>('a' + raw.size());
      c.text = text::normalize_whitespace(entry.get<std::string>());
      raw.push_back(std::move(c));
    }
    auto gt_it = obj.find("gt_index");
    if (gt_it == obj.end() || !gt_it->is_number_integer()) {
      fail(where + "missing or non-integer field \"gt_index\"");
    }
    const int gt_index = gt_it->get<int>();
    if (raw.size() < 2) {
      fail(where + "item \"" + item.id + "\": choices: need at least 2, got " +
           std::to_string(raw.size()));
    }
    if (gt_index < 0 || static_cast<std::size_t>(gt_index) >= raw.size()) {
      fail(where + "item \"" + item.id + "\": gt_index: " + std::to_string(gt_index) +
           " out of range for " + std::to_string(raw.size()) + " choices");
    }

    auto normalized =
        normalize_choices(raw, gt_index, item_reduction_seed(run_seed, item.id));
    item.choices = std::move(normalized.choices);
    item.gt_index = normalized.gt_index;

    try {
      validate_item(item);
    } catch (const std::exception& e) {
      fail(where + e.what());
    }
    if (seen_categories.insert(item.category).second) {
      benchmark.category_names.push_back(item.category);
    }
    benchmark.items.push_back(std::move(item));
  });
  return benchmark;
}

void validate_variant_set(const VariantSet& vs, const McqaItem& item) {
  const std::string where = "variants for item \"" + vs.item_id + "\": ";
  auto check_list = [&](const std::vector<std::string>& list, const std::string& name,
                        const std::string& original) {
    if (list.size() != kVariantCount) {
      fail(where + name + ": expected " + std::to_string(kVariantCount) + " entries, got " +
           std::to_string(list.size()));
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (text::normalize_whitespace(list[i]).empty()) {
        fail(where + name + "[" + std::to_string(i) + "]: empty text");
      }
    }
    if (text::normalize_whitespace(list[0]) != original) {
      fail(where + name + "[0] does not match the item's original text");
    }
  };

  check_list(vs.question_variants, "question_variants", item.question);
  check_list(vs.answer_variants, "answer_variants", item.ground_truth().text);

  const std::size_t distractor_count = item.choices.size() - 1;
  if (vs.distractor_variants.size() != distractor_count) {
    fail(where + "distractor_variants: expected " + std::to_string(distractor_count) +
         " lists, got " + std::to_string(vs.distractor_variants.size()));
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    if (static_cast<int>(i) == item.gt_index) {
      continue;
    }
    check_list(vs.distractor_variants[d], "distractor_variants[" + std::to_string(d) + "]",
               item.choices[i].text);
    ++d;
  }
}

VariantLoadResult load_variants(const std::filesystem::path& path, const Benchmark& benchmark) {
  VariantLoadResult result;

  for_each_jsonl(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = line_prefix(path, line_no);
    VariantSet vs;
    vs.item_id = require_string(obj, "item_id", where);
    const McqaItem* item = find_item(benchmark, vs.item_id);
    if (item == nullptr) {
      fail(where + "unknown item_id \"" + vs.item_id + "\"");
    }
    if (result.variants.count(vs.item_id) != 0) {
      fail(where + "duplicate variant set for item \"" + vs.item_id + "\"");
    }

    auto read_list = [&](const json& node, const char* key) {
      if (!node.is_array()) {
        fail(where + "field \"" + key + "\" must be an array of strings");
      }
      std::vector<std::string> list;
      list.reserve(node.size());
      for (const auto& entry : node) {
        if (!entry.is_string()) {
          fail(where + "field \"" + key + "\" must contain only strings");
        }
        list.push_back(text::normalize_whitespace(entry.get<std::string>()));
      }
      return list;
    };

    if (!obj.contains("question_variants") || !obj.contains("answer_variants") ||
        !obj.contains("distractor_variants")) {
      fail(where + "variant object needs question_variants, answer_variants and "
                   "distractor_variants");
    }
    vs.question_variants = read_list(obj.at("question_variants"), "question_variants");
    vs.answer_variants = read_list(obj.at("answer_variants"), "answer_variants");
    const json& dv = obj.at("distractor_variants");
    if (!dv.is_array()) {
      fail(where + "field \"distractor_variants\" must be an array of arrays");
    }
    for (const auto& list : dv) {
      vs.distractor_variants.push_back(read_list(list, "distractor_variants"));
    }

    try {
      validate_variant_set(vs, *item);
    } catch (const std::exception& e) {
      fail(where + e.what());
    }
    result.variants.emplace(vs.item_id, std::move(vs));
  });

  for (const auto& item : benchmark.items) {
    if (result.variants.count(item.id) == 0) {
      result.missing_item_ids.push_back(item.id);
    }
  }
  return result;
}

int longest_choice_position(const std::vector<Choice>& choices) {
  int best = 0;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const std::size_t len = text::codepoint_count(text::normalize_whitespace(choices[i].text));
    if (i == 0 || len > best_len) {
      best = static_cast<int>(i);
      best_len = len;
    }
  }
  return best;
}

std::string variants_to_jsonl(const VariantMap& variants) {
  std::ostringstream out;
  for (const auto& [id, vs] : variants) {
    json obj;
    obj["item_id"] = id;
    obj["question_variants"] = vs.question_variants;
    obj["answer_variants"] = vs.answer_variants;
    obj["distractor_variants"] = vs.distractor_variants;
    out << obj.dump() << "\n";
  }
  return out.str();
}

void write_variants(const std::filesystem::path& path, const VariantMap& variants) {
  std::ofstream out(path);
  if (!out) {
    fail("cannot write " + path.string());
  }
  out << variants_to_jsonl(variants);
}

}  // namespace mcqa
