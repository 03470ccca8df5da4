#pragma once

#include "midl/harness/agent_io.hpp"
#include "midl/harness/config.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace midl::harness {

/// File names inside a run directory.
namespace artifact {
inline constexpr const char* kConfig = "config.ini";
inline constexpr const char* kDataset = "dataset.txt";
inline constexpr const char* kModel = "model.txt";
inline constexpr const char* kMetrics = "metrics.jsonl";
inline constexpr const char* kAgent = "agent.txt";
inline constexpr const char* kAbortAgent = "agent-abort.txt";
inline constexpr const char* kEval = "eval.json";
}  // namespace artifact

enum class Stage { GenData, TrainModel, TrainAgent, Evaluate, Plot };

const char* stage_name(Stage stage);

/// Wraps a component failure with the stage that raised it; keeps the code.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string("stage ") + stage_name(stage) + ": " + cause.what()), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// Independent seed for one stage, derived from the run seed.
std::uint64_t stage_seed(std::uint64_t run_seed, Stage stage);

std::string join(const std::string& dir, const char* name);

void gen_data(const RunConfig& cfg, const std::string& dir);
void train_model(const RunConfig& cfg, const std::string& dir);

/// Called after every iteration with the record just written.
using IterationHook = std::function<void(const agent::MetricsRecord&)>;

/// Writes metrics.jsonl (one JSON object per iteration) and agent.txt, plus
/// agent.txt every checkpoint_every iterations. A non-finite metric writes
/// agent-abort.txt before the error propagates.
void train_agent(const RunConfig& cfg, const std::string& dir, const IterationHook& hook = {});

std::string metrics_line(const agent::MetricsRecord& rec);

struct EvalResult {
  std::vector<double> returns;
  double mean = 0;
  double std_dev = 0;
};

/// Mean-action rollouts in the true toy MDP: s0 ~ U[initial range], reward s
/// summed over `horizon` steps without discount.
EvalResult evaluate(const agent::Actor<double>& actor, const core::ToyMdpSpec& spec, int episodes, int horizon,
                    std::uint64_t seed);
void evaluate_run(const RunConfig& cfg, const std::string& dir);

/// gen-data -> train-model -> train-agent -> evaluate -> plot under `dir`,
/// after writing config.ini. Failures surface as StageError.
void run_pipeline(const RunConfig& cfg, const std::string& dir, const IterationHook& hook = {});

/// Runs one stage, converting component errors into StageError.
void run_stage(Stage stage, const RunConfig& cfg, const std::string& dir);

}  // namespace midl::harness
