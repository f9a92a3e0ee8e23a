#include "mcqa/runner.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <vector>

namespace mcqa {

namespace {

std::int64_t now_epoch_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

ModelFn endpoint_model_fn(const EndpointConfig& cfg) {
  return [cfg](const PerturbedItem&, const RenderedPrompt& prompt, const std::string& audio_ref) {
    return query_model(cfg, prompt, audio_ref);
  };
}

ModelFn mock_model_fn(const MockModel& mock) {
  return [mock](const PerturbedItem& p, const RenderedPrompt&, const std::string&) {
    return mock.respond(p);
  };
}

RunStats run_plan(const Benchmark& benchmark, const VariantMap& variants, const TrialPlan& plan,
                  const ModelFn& model, TrialCache& cache, const RunOptions& options) {
  if (options.max_concurrency < 1) {
    throw std::invalid_argument("max_concurrency must be >= 1");
  }

  std::unordered_map<std::string_view, const McqaItem*> items;
  items.reserve(benchmark.items.size());
  for (const auto& item : benchmark.items) {
    items.emplace(item.id, &item);
  }

  RunStats stats;
  stats.total = plan.entries.size();

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls_used{0};
  std::atomic<std::size_t> cached{0};
  std::atomic<std::size_t> executed{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<std::size_t> skipped{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::exception_ptr fatal_error;

  auto worker = [&]() {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.entries.size()) {
        return;
      }
      const PlanEntry& entry = plan.entries[i];
      try {
        const auto item_it = items.find(entry.item_id);
        if (item_it == items.end()) {
          throw std::runtime_error("plan references unknown item \"" + entry.item_id + "\"");
        }
        const McqaItem& item = *item_it->second;
        const auto variants_it = variants.find(entry.item_id);
        const VariantSet* vs = variants_it == variants.end() ? nullptr : &variants_it->second;

        const PerturbedItem perturbed = apply_spec(item, vs, entry.spec);
        const RenderedPrompt prompt = render_prompt(perturbed);
        const std::uint64_t hash = prompt_content_hash(prompt, item.audio_ref);

        if (cache.get(entry.item_id, plan.family, entry.sample_index, hash).has_value()) {
          cached.fetch_add(1);
          continue;
        }
        // Claim a slot in the call budget; unexecuted entries stay missing.
        if (calls_used.fetch_add(1) >= options.max_calls) {
          skipped.fetch_add(1);
          continue;
        }

        TrialRecord record;
        record.item_id = entry.item_id;
        record.family = plan.family;
        record.sample_index = entry.sample_index;
        record.prompt_hash = hash;
        record.timestamp_ms = now_epoch_ms();

        const auto start = std::chrono::steady_clock::now();
        try {
          record.raw_response = model(perturbed, prompt, item.audio_ref);
          record.status = TrialStatus::ok;
          const ParsedAnswer answer = parse_response(record.raw_response, perturbed);
          record.parsed_position = answer.choice_position;
          record.correct = judge_correct(answer, perturbed, item.correctness_mode);
          executed.fetch_add(1);
        } catch (const TrialFailure& e) {
          record.status = TrialStatus::failed;
          record.raw_response = e.what();
          record.parsed_position = std::nullopt;
          record.correct = false;
          executed.fetch_add(1);
          failed.fetch_add(1);
        }
        record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
        cache.put(record);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!fatal_error) {
          fatal_error = std::current_exception();
        }
        abort.store(true);
        return;
      }
    }
  };

  const int workers =
      static_cast<int>(std::min<std::size_t>(plan.entries.size(),
                                             static_cast<std::size_t>(options.max_concurrency)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (fatal_error) {
    std::rethrow_exception(fatal_error);
  }

  stats.cached = cached.load();
  stats.executed = executed.load();
  stats.failed = failed.load();
  stats.skipped = skipped.load();
  return stats;
}

}  // namespace mcqa
