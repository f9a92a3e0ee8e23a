#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>

#include "mcqa/core_model.hpp"
#include "mcqa/model_client.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/prompting.hpp"

namespace mcqa {

// One model invocation. Throws TrialFailure for a transient failure (the
// trial is recorded as failed) and ConfigError to abort the whole run.
using ModelFn =
    std::function<std::string(const PerturbedItem&, const RenderedPrompt&, const std::string&)>;

ModelFn endpoint_model_fn(const EndpointConfig& cfg);
ModelFn mock_model_fn(const MockModel& mock);

struct RunOptions {
  int max_concurrency = 1;
  // Budget of new model calls; entries beyond it stay unexecuted so an
  // interrupted run can be simulated and resumed. Cache hits are free.
  std::size_t max_calls = std::numeric_limits<std::size_t>::max();
};

struct RunStats {
  std::size_t total = 0;     // plan entries seen
  std::size_t cached = 0;    // satisfied from the cache
  std::size_t executed = 0;  // fresh model calls that produced a record
  std::size_t failed = 0;    // fresh calls recorded as failed
  std::size_t skipped = 0;   // left unexecuted (call budget exhausted)
};

// Execute every uncached entry of a plan through the model, parse and judge
// the responses, and persist one TrialRecord per trial. Idempotent: a rerun
// over a complete cache issues no model calls. At most
// options.max_concurrency requests are in flight at any instant.
RunStats run_plan(const Benchmark& benchmark, const VariantMap& variants, const TrialPlan& plan,
                  const ModelFn& model, TrialCache& cache, const RunOptions& options = {});

}  // namespace mcqa
