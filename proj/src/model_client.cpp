#include "mcqa/model_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mcqa/stable_hash.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::string json_escaped(std::string_view value) {
  const std::string quoted = json(std::string(value)).dump();
  return quoted.substr(1, quoted.size() - 2);  // drop the surrounding quotes
}

void replace_all(std::string& s, std::string_view needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = s.find(needle, pos)) != std::string::npos) {
    s.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
    i += 3;
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string audio_payload_value(const EndpointConfig& cfg, std::string_view audio_ref) {
  if (cfg.audio_mode == "uri" || cfg.audio_mode == "none") {
    return std::string(audio_ref);
  }
  if (cfg.audio_mode == "base64_file") {
    std::ifstream in{std::filesystem::path(std::string(audio_ref)), std::ios::binary};
    if (!in) {
      throw TrialFailure("cannot read audio file " + std::string(audio_ref));
    }
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return base64_encode(bytes.str());
  }
  throw ConfigError("unknown audio_mode \"" + cfg.audio_mode + "\"");
}

std::string mock_choice_echo(const PerturbedItem& p, int position) {
  const Choice& c = p.choices[static_cast<std::size_t>(position)];
  std::string out;
  out.push_back('(');
  out.push_back(c.label);
  out.append(") ");
  out.append(c.text);
  return out;
}

}  // namespace

void EndpointConfig::validate() const {
  if (base_url.empty()) {
    throw ConfigError("endpoint config: base_url is required");
  }
  if (timeout_s <= 0) {
    throw ConfigError("endpoint config: timeout must be positive");
  }
  if (max_retries < 0) {
    throw ConfigError("endpoint config: max_retries must be >= 0");
  }
  if (max_concurrency < 1) {
    throw ConfigError("endpoint config: max_concurrency must be >= 1");
  }
  if (audio_mode != "uri" && audio_mode != "base64_file" && audio_mode != "none") {
    throw ConfigError("endpoint config: unknown audio_mode \"" + audio_mode + "\"");
  }
}

EndpointConfig load_endpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open endpoint config " + path.string());
  }
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ConfigError("endpoint config " + path.string() + ": " + e.what());
  }
  EndpointConfig cfg;
  cfg.base_url = obj.value("base_url", cfg.base_url);
  cfg.path = obj.value("path", cfg.path);
  cfg.model_name = obj.value("model_name", cfg.model_name);
  cfg.auth_env_var = obj.value("auth_env_var", cfg.auth_env_var);
  cfg.timeout_s = obj.value("timeout_s", cfg.timeout_s);
  cfg.max_retries = obj.value("max_retries", cfg.max_retries);
  cfg.max_concurrency = obj.value("max_concurrency", cfg.max_concurrency);
  cfg.max_tokens = obj.value("max_tokens", cfg.max_tokens);
  cfg.audio_mode = obj.value("audio_mode", cfg.audio_mode);
  cfg.payload_template = obj.value("payload_template", cfg.payload_template);
  cfg.backoff_base_s = obj.value("backoff_base_s", cfg.backoff_base_s);
  cfg.validate();
  return cfg;
}

std::string build_request_body(const EndpointConfig& cfg, const RenderedPrompt& prompt,
                               std::string_view audio_ref) {
  const std::string audio_value = audio_payload_value(cfg, audio_ref);

  if (!cfg.payload_template.empty()) {
    std::string body = cfg.payload_template;
    replace_all(body, "{model}", json_escaped(cfg.model_name));
    replace_all(body, "{prompt}", json_escaped(prompt.text));
    replace_all(body, "{audio}", json_escaped(audio_value));
    return body;
  }

  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.text}});
  if (cfg.audio_mode != "none" && !audio_value.empty()) {
    content.push_back({{"type", "audio_url"}, {"audio_url", {{"url", audio_value}}}});
  }
  json body;
  body["model"] = cfg.model_name;
  body["temperature"] = 0;  // greedy decoding, always
  body["max_tokens"] = cfg.max_tokens;
  body["messages"] = json::array({{{"role", "user"}, {"content", content}}});
  return body.dump();
}

std::string extract_response_text(const std::string& body) {
  json obj;
  try {
    obj = json::parse(body);
  } catch (const json::exception& e) {
    throw TrialFailure(std::string("response is not JSON: ") + e.what());
  }
  try {
    if (obj.contains("choices") && !obj["choices"].empty()) {
      const json& first = obj["choices"][0];
      if (first.contains("message")) {
        const json& content = first["message"].at("content");
        if (content.is_string()) {
          return content.get<std::string>();
        }
        if (content.is_array()) {
          std::string text;
          for (const auto& part : content) {
            if (part.contains("text") && part["text"].is_string()) {
              text += part["text"].get<std::string>();
            }
          }
          return text;
        }
      }
      if (first.contains("text") && first["text"].is_string()) {
        return first["text"].get<std::string>();
      }
    }
    if (obj.contains("content") && obj["content"].is_string()) {
      return obj["content"].get<std::string>();
    }
  } catch (const json::exception&) {
    // fall through
  }
  throw TrialFailure("no assistant text in endpoint response");
}

std::string query_model(const EndpointConfig& cfg, const RenderedPrompt& prompt,
                        std::string_view audio_ref) {
  cfg.validate();

  httplib::Headers headers{{"Content-Type", "application/json"}};
  if (!cfg.auth_env_var.empty()) {
    const char* token = std::getenv(cfg.auth_env_var.c_str());
    if (token == nullptr || *token == '\0') {
      throw ConfigError("auth environment variable " + cfg.auth_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string body = build_request_body(cfg, prompt, audio_ref);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay_s =
          std::min(cfg.backoff_base_s * static_cast<double>(1 << (attempt - 1)), 30.0);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay_s));
    }

    httplib::Client client(cfg.base_url);
    const auto timeout =
        std::chrono::milliseconds(static_cast<std::int64_t>(cfg.timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto res = client.Post(cfg.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return extract_response_text(res->body);
      } catch (const TrialFailure& e) {
        last_error = e.what();
        continue;
      }
    }
    if (res->status >= 400 && res->status < 500) {
      throw ConfigError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
    }
    last_error = "HTTP " + std::to_string(res->status);
  }
  throw TrialFailure("endpoint failed after " + std::to_string(cfg.max_retries + 1) +
                     " attempts: " + last_error);
}

std::string MockModel::respond(const PerturbedItem& p) const {
  switch (kind) {
    case MockKind::oracle:
      return mock_choice_echo(p, p.gt_position);
    case MockKind::constant_letter:
      return std::string(1, letter);
    case MockKind::longest_picker:
      return mock_choice_echo(p, longest_choice_position(p.choices));
    case MockKind::uniform_random: {
      StableHash key;
      key.add(seed).add(p.item_id).add(to_string(p.spec.family));
      key.add(static_cast<std::uint64_t>(p.spec.question_variant));
      key.add(static_cast<std::uint64_t>(p.spec.answer_variant));
      key.add(static_cast<std::uint64_t>(p.spec.distractor_variant));
      for (int v : p.spec.ordering.mapping) {
        key.add(static_cast<std::uint64_t>(v));
      }
      SplitMix64 rng(key.value());
      return mock_choice_echo(p, static_cast<int>(rng.below(p.choices.size())));
    }
  }
  return {};
}

MockModel parse_mock_spec(std::string_view spec) {
  std::string_view kind = spec;
  std::string_view arg;
  if (const auto colon = spec.find(':'); colon != std::string_view::npos) {
    kind = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }
  MockModel mock;
  if (kind == "oracle") {
    mock.kind = MockKind::oracle;
  } else if (kind == "constant_letter") {
    mock.kind = MockKind::constant_letter;
    if (!arg.empty()) {
      if (arg.size() != 1 || arg[0] < 'a' || arg[0] > 'd') {
        throw ConfigError("constant_letter argument must be a single letter a-d");
      }
      mock.letter = arg[0];
    }
  } else if (kind == "longest_picker") {
    mock.kind = MockKind::longest_picker;
  } else if (kind == "uniform_random") {
    mock.kind = MockKind::uniform_random;
    if (!arg.empty()) {
      mock.seed = std::stoull(std::string(arg));
    }
  } else {
    throw ConfigError("unknown mock kind \"" + std::string(kind) +
                      "\" (expected oracle, constant_letter[:x], longest_picker or "
                      "uniform_random[:seed])");
  }
  return mock;
}

std::string trial_record_to_json(const TrialRecord& record) {
  json obj;
  obj["item_id"] = record.item_id;
  obj["family"] = to_string(record.family);
  obj["sample_index"] = record.sample_index;
  obj["prompt_hash"] = record.prompt_hash;
  obj["status"] = record.status == TrialStatus::ok ? "ok" : "failed";
  obj["raw_response"] = record.raw_response;
  if (record.parsed_position.has_value()) {
    obj["parsed_position"] = *record.parsed_position;
  } else {
    obj["parsed_position"] = nullptr;
  }
  obj["correct"] = record.correct;
  obj["latency_ms"] = record.latency_ms;
  obj["timestamp_ms"] = record.timestamp_ms;
  return obj.dump();
}

TrialRecord trial_record_from_json(const std::string& line) {
  const json obj = json::parse(line);
  TrialRecord record;
  record.item_id = obj.at("item_id").get<std::string>();
  record.family = family_from_string(obj.at("family").get<std::string>());
  record.sample_index = obj.at("sample_index").get<int>();
  record.prompt_hash = obj.at("prompt_hash").get<std::uint64_t>();
  const std::string status = obj.at("status").get<std::string>();
  if (status == "ok") {
    record.status = TrialStatus::ok;
  } else if (status == "failed") {
    record.status = TrialStatus::failed;
  } else {
    throw std::runtime_error("unknown trial status \"" + status + "\"");
  }
  record.raw_response = obj.at("raw_response").get<std::string>();
  if (!obj.at("parsed_position").is_null()) {
    record.parsed_position = obj.at("parsed_position").get<int>();
  }
  record.correct = obj.at("correct").get<bool>();
  record.latency_ms = obj.value("latency_ms", std::int64_t{0});
  record.timestamp_ms = obj.value("timestamp_ms", std::int64_t{0});
  return record;
}

TrialCache::TrialCache(std::filesystem::path file) : path_(std::move(file)) {
  if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  std::ifstream in(path_);
  if (!in) {
    return;  // fresh cache
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
      continue;
    }
    try {
      TrialRecord record = trial_record_from_json(line);
      Key key{record.item_id, static_cast<int>(record.family), record.sample_index};
      index_.insert_or_assign(std::move(key), std::move(record));
    } catch (const std::exception& e) {
      ++corrupt_lines_;
      std::cerr << "warning: " << path_.string() << ":" << line_no
                << ": skipping corrupt cache line (" << e.what() << ")\n";
    }
  }
}

std::optional<TrialRecord> TrialCache::get(std::string_view item_id, Family family,
                                           int sample_index, std::uint64_t prompt_hash) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(Key{std::string(item_id), static_cast<int>(family), sample_index});
  if (it == index_.end() || it->second.prompt_hash != prompt_hash) {
    return std::nullopt;
  }
  return it->second;
}

void TrialCache::put(const TrialRecord& record) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    throw std::runtime_error("cannot append to cache file " + path_.string());
  }
  out << trial_record_to_json(record) << "\n";
  index_.insert_or_assign(Key{record.item_id, static_cast<int>(record.family),
                              record.sample_index},
                          record);
}

std::size_t TrialCache::size() const {
  std::lock_guard lock(mutex_);
  return index_.size();
}

}  // namespace mcqa
