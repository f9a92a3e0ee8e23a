#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>

#include "mcqa/core_model.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/prompting.hpp"

namespace mcqa {

// A misconfigured endpoint (HTTP 4xx, bad URL, missing auth). Aborts the run.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A transient transport failure that survived all retries. Marks the single
// trial as failed; the run continues.
struct TrialFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model_name;
  std::string auth_env_var;  // environment variable holding the bearer token
  double timeout_s = 30.0;
  int max_retries = 3;
  int max_concurrency = 4;
  int max_tokens = 256;
  // "uri" forwards audio_ref verbatim; "base64_file" reads the referenced
  // file and inlines its bytes; "none" sends text only.
  std::string audio_mode = "uri";
  // Optional raw request body with {model}, {prompt} and {audio}
  // placeholders (replaced by JSON-escaped values, no surrounding quotes).
  std::string payload_template;
  double backoff_base_s = 0.5;

  void validate() const;
};

EndpointConfig load_endpoint_config(const std::filesystem::path& path);

// Build the request body for one prompt. Greedy decoding parameters
// (temperature 0) are always present.
std::string build_request_body(const EndpointConfig& cfg, const RenderedPrompt& prompt,
                               std::string_view audio_ref);

// Pull the assistant text out of a chat-completions style response body.
std::string extract_response_text(const std::string& body);

// One blocking endpoint call with retry/backoff. Throws ConfigError on HTTP
// 4xx, TrialFailure when retries are exhausted.
std::string query_model(const EndpointConfig& cfg, const RenderedPrompt& prompt,
                        std::string_view audio_ref);

enum class MockKind { oracle, constant_letter, longest_picker, uniform_random };

// Deterministic stand-ins for a model endpoint.
//   oracle          -> "(gt_label) gt_text"
//   constant_letter -> the configured letter, bare
//   longest_picker  -> label+text of the longest choice (bias-length metric)
//   uniform_random  -> seeded uniform choice, "(label) text"
struct MockModel {
  MockKind kind = MockKind::oracle;
  char letter = 'a';
  std::uint64_t seed = 0;

  std::string respond(const PerturbedItem& p) const;
};

// Parse CLI syntax: "oracle", "constant_letter:b", "longest_picker",
// "uniform_random:42".
MockModel parse_mock_spec(std::string_view spec);

enum class TrialStatus { ok, failed };

struct TrialRecord {
  std::string item_id;
  Family family = Family::Default;
  int sample_index = 0;
  std::uint64_t prompt_hash = 0;
  TrialStatus status = TrialStatus::ok;
  std::string raw_response;
  std::optional<int> parsed_position;
  bool correct = false;
  std::int64_t latency_ms = 0;
  std::int64_t timestamp_ms = 0;
};

std::string trial_record_to_json(const TrialRecord& record);
TrialRecord trial_record_from_json(const std::string& line);

// Append-only JSONL persistence of trial records with an in-memory index.
// get() hits only when the stored prompt hash matches, so records from a
// stale plan are never reused. Corrupt lines are skipped with a warning.
// put() is safe to call from concurrent workers.
class TrialCache {
 public:
  explicit TrialCache(std::filesystem::path file);

  std::optional<TrialRecord> get(std::string_view item_id, Family family, int sample_index,
                                 std::uint64_t prompt_hash) const;
  void put(const TrialRecord& record);

  std::size_t size() const;
  std::size_t corrupt_lines() const { return corrupt_lines_; }
  const std::filesystem::path& file() const { return path_; }

 private:
  using Key = std::tuple<std::string, int, int>;  // item_id, family, sample_index

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<Key, TrialRecord> index_;
  std::size_t corrupt_lines_ = 0;
};

}  // namespace mcqa
