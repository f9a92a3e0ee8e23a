#include "mcqa/variant_gen.hpp"

#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcqa/text.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> context_for(const GenerationProfile& profile, const McqaItem& item,
                                     const std::string& axis, int distractor_index) {
  std::vector<std::string> lines;
  if (profile.include_question && axis != "question") {
    lines.push_back("Question: " + item.question);
  }
  if (profile.include_answer && axis != "answer") {
    lines.push_back("Correct answer: " + item.ground_truth().text);
  }
  if (profile.include_distractors) {
    std::string others;
    int d = 0;
    for (std::size_t i = 0; i < item.choices.size(); ++i) {
      if (static_cast<int>(i) == item.gt_index) {
        continue;
      }
      if (!(axis == "distractor" && d == distractor_index)) {
        if (!others.empty()) {
          others += "; ";
        }
        others += item.choices[i].text;
      }
      ++d;
    }
    if (!others.empty()) {
      lines.push_back("Other options: " + others);
    }
  }
  return lines;
}

// Runs both profiles for one element and returns the 6 paraphrases.
std::vector<std::string> rephrase_element(const ChatFn& generator,
                                          const std::vector<GenerationProfile>& profiles,
                                          const McqaItem& item, const std::string& axis,
                                          int distractor_index, const std::string& element_kind,
                                          const std::string& original) {
  std::vector<std::string> out;
  for (const auto& profile : profiles) {
    const std::string prompt = build_rephrase_prompt(
        element_kind, original, context_for(profile, item, axis, distractor_index));
    std::vector<std::string> rewrites;
    try {
      rewrites = parse_rephrase_response(generator(prompt));
    } catch (const std::exception& e) {
      throw std::runtime_error("variant generation failed for item \"" + item.id + "\", " + axis +
                               (distractor_index >= 0
                                    ? "[" + std::to_string(distractor_index) + "]"
                                    : "") +
                               ", profile \"" + profile.name + "\": " + e.what());
    }
    out.insert(out.end(), rewrites.begin(), rewrites.end());
  }
  return out;
}

}  // namespace

std::vector<GenerationProfile> default_generation_profiles() {
  return {
      {"full_context", true, true, true},
      {"minimal_context", false, false, false},
  };
}

std::string build_rephrase_prompt(const std::string& element_kind, const std::string& text,
                                  const std::vector<std::string>& context_lines) {
  std::string prompt =
      "Rewrite the following " + element_kind +
      " so that it keeps exactly the same meaning but uses different wording. Do not add "
      "information and do not drop information. Reply with exactly three distinct rewrites, "
      "numbered \"1.\", \"2.\" and \"3.\", one per line, and nothing else.\n";
  for (const auto& line : context_lines) {
    prompt += line;
    prompt += "\n";
  }
  prompt += "Text to rewrite: " + text;
  return prompt;
}

std::vector<std::string> parse_rephrase_response(const std::string& raw) {
  std::vector<std::string> rewrites;
  int expected = 1;
  for (const std::string& line : split_lines(raw)) {
    const std::string trimmed = text::normalize_whitespace(line);
    const std::string tag = std::to_string(expected);
    if (trimmed.size() > tag.size() + 1 && trimmed.compare(0, tag.size(), tag) == 0 &&
        (trimmed[tag.size()] == '.' || trimmed[tag.size()] == ')')) {
      const std::string body = text::normalize_whitespace(trimmed.substr(tag.size() + 1));
      if (!body.empty()) {
        rewrites.push_back(body);
        if (++expected > 3) {
          break;
        }
      }
    }
  }
  if (rewrites.size() != 3) {
    throw std::runtime_error("expected three numbered rewrites, found " +
                             std::to_string(rewrites.size()));
  }
  return rewrites;
}

VariantGenResult generate_variants(const Benchmark& benchmark, const ChatFn& generator,
                                   const AxisSelection& axes,
                                   const std::vector<GenerationProfile>& profiles) {
  if (!generator) {
    throw std::runtime_error("no generation endpoint configured");
  }
  VariantGenResult result;

  for (const auto& item : benchmark.items) {
    VariantSet vs;
    vs.item_id = item.id;

    auto filled = [](const std::string& original) {
      return std::vector<std::string>(kVariantCount, original);
    };
    auto assemble = [&](const std::string& original,
                        const std::vector<std::string>& paraphrases) {
      std::vector<std::string> list;
      list.reserve(kVariantCount);
      list.push_back(original);
      list.insert(list.end(), paraphrases.begin(), paraphrases.end());
      return list;
    };

    // Flag a generated choice text that equals another choice of the item.
    auto check_collisions = [&](const std::string& axis, int distractor_index,
                                const std::vector<std::string>& list, int skip_choice_index) {
      for (int v = 1; v < static_cast<int>(list.size()); ++v) {
        const std::string canon = text::canonical(list[static_cast<std::size_t>(v)]);
        for (std::size_t c = 0; c < item.choices.size(); ++c) {
          if (static_cast<int>(c) == skip_choice_index) {
            continue;
          }
          if (canon == text::canonical(item.choices[c].text)) {
            result.review.push_back(ReviewEntry{item.id, axis, distractor_index, v,
                                                list[static_cast<std::size_t>(v)],
                                                item.choices[c].label});
          }
        }
      }
    };

    if (axes.question) {
      vs.question_variants = assemble(
          item.question,
          rephrase_element(generator, profiles, item, "question", -1, "question",
                           item.question));
    } else {
      vs.question_variants = filled(item.question);
    }

    const std::string& answer = item.ground_truth().text;
    if (axes.answer) {
      vs.answer_variants = assemble(
          answer, rephrase_element(generator, profiles, item, "answer", -1,
                                   "answer choice", answer));
      result.generated_count += kVariantCount - 1;
      check_collisions("answer", -1, vs.answer_variants, item.gt_index);
    } else {
      vs.answer_variants = filled(answer);
    }

    int d = 0;
    for (std::size_t i = 0; i < item.choices.size(); ++i) {
      if (static_cast<int>(i) == item.gt_index) {
        continue;
      }
      const std::string& original = item.choices[i].text;
      if (axes.distractor) {
        vs.distractor_variants.push_back(assemble(
            original, rephrase_element(generator, profiles, item, "distractor", d,
                                       "answer choice", original)));
        result.generated_count += kVariantCount - 1;
        check_collisions("distractor", d, vs.distractor_variants.back(), static_cast<int>(i));
      } else {
        vs.distractor_variants.push_back(filled(original));
      }
      ++d;
    }

    validate_variant_set(vs, item);
    result.variants.emplace(item.id, std::move(vs));
  }
  return result;
}

std::string review_to_jsonl(const std::vector<ReviewEntry>& entries) {
  std::ostringstream out;
  for (const auto& entry : entries) {
    json obj;
    obj["item_id"] = entry.item_id;
    obj["axis"] = entry.axis;
    obj["distractor_index"] = entry.distractor_index;
    obj["variant_index"] = entry.variant_index;
    obj["text"] = entry.text;
    obj["collides_with_label"] = std::string(1, entry.collides_with_label);
    out << obj.dump() << "\n";
  }
  return out.str();
}

}  // namespace mcqa
