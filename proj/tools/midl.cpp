// Command-line front end for the toy-task pipeline and the tabular checks.

#include "midl/harness/diagnostics.hpp"
#include "midl/harness/pipeline.hpp"
#include "midl/harness/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

using namespace midl;
using namespace midl::harness;

namespace {

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dir;
  std::optional<double> lambda;
  std::optional<int> horizon;
  std::optional<long> iterations;
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config, "INI config file (defaults when omitted)");
  cmd->add_option("--seed", s.seed, "Run seed (overrides [run] seed)");
  cmd->add_option("--out", s.out, "Output root; the run directory is <root>/<hash>-s<seed>");
  cmd->add_option("--dir", s.dir, "Use this run directory as is");
  cmd->add_option("--lambda", s.lambda, "Penalty coefficient override");
  cmd->add_option("--horizon", s.horizon, "Rollout horizon override");
  cmd->add_option("--iterations", s.iterations, "Agent iteration budget override");
}

RunConfig resolve(const Shared& s) {
  RunConfig cfg = s.config.empty() ? RunConfig{} : load_config(s.config);
  if (s.seed) cfg.seed = *s.seed;
  if (s.lambda) cfg.lambda = *s.lambda;
  if (s.horizon) cfg.horizon = *s.horizon;
  if (s.iterations) cfg.iterations = *s.iterations;
  validate(cfg);
  return cfg;
}

std::string directory(const Shared& s, const RunConfig& cfg) { return s.dir.empty() ? run_directory(cfg, s.out) : s.dir; }

/// Writes config.ini next to the artifacts so later stages see the same settings.
std::string prepare(const Shared& s, const RunConfig& cfg) {
  const std::string dir = directory(s, cfg);
  std::filesystem::create_directories(dir);
  save_config(join(dir, artifact::kConfig), cfg);
  return dir;
}

int fail(const Error& e) {
  std::cerr << "error[" << error_tag(e.code()) << "]: " << e.what() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based offline RL with adaptive conservative value estimation"};
  app.require_subcommand(1);

  Shared shared;
  auto* gen = app.add_subcommand("gen-data", "Generate the offline toy dataset");
  auto* model = app.add_subcommand("train-model", "Train the Gaussian world-model ensemble");
  auto* train = app.add_subcommand("train-agent", "Train critics, actor and discriminators");
  auto* eval = app.add_subcommand("evaluate", "Mean-action evaluation in the true toy MDP");
  auto* plot = app.add_subcommand("plot", "Emit diagnostic CSVs and SVGs");
  auto* full = app.add_subcommand("full-run", "gen-data, train-model, train-agent, evaluate, plot");
  auto* show = app.add_subcommand("show-config", "Print the canonical config");
  for (auto* c : {gen, model, train, eval, plot, full, show}) add_shared(c, shared);

  std::string checkpoint;
  std::optional<int> episodes;
  std::optional<int> eval_horizon;
  eval->add_option("--checkpoint", checkpoint, "Agent checkpoint (default <run dir>/agent.txt)");
  eval->add_option("--episodes", episodes, "Episode count override");
  eval->add_option("--eval-horizon", eval_horizon, "Steps per episode override");

  bool quiet = false;
  train->add_flag("--quiet", quiet, "No progress output");
  full->add_flag("--quiet", quiet, "No progress output");

  auto* verify = app.add_subcommand("verify", "Check a tabular theorem on random instances (JSON lines)");
  int theorem = 1, instances = 50;
  std::uint64_t verify_seed = 0;
  verify->add_option("--theorem", theorem, "1, 2 or 3")->required();
  verify->add_option("--instances", instances, "Number of instances");
  verify->add_option("--seed", verify_seed, "First instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[" << error_tag(ErrorCode::Argument) << "]: " << e.what() << '\n';
    return 2;
  }

  try {
    auto progress = [&](const agent::MetricsRecord& r) {
      if (quiet || (r.iter + 1) % 250 != 0) return;
      std::cerr << "iter " << r.iter + 1 << " critic " << r.critic_loss << " actor " << r.actor_loss << " alpha "
                << r.alpha << " q_off " << r.mean_q_offline << " q_model " << r.mean_q_model << '\n';
    };

    if (*show) {
      std::cout << serialize_config(resolve(shared));
    } else if (*gen) {
      const auto cfg = resolve(shared);
      run_stage(Stage::GenData, cfg, prepare(shared, cfg));
      std::cout << directory(shared, cfg) << '\n';
    } else if (*model) {
      const auto cfg = resolve(shared);
      run_stage(Stage::TrainModel, cfg, prepare(shared, cfg));
      std::cout << directory(shared, cfg) << '\n';
    } else if (*train) {
      const auto cfg = resolve(shared);
      const auto dir = prepare(shared, cfg);
      try {
        train_agent(cfg, dir, progress);
      } catch (const Error& e) {
        throw StageError(Stage::TrainAgent, e);
      }
      std::cout << dir << '\n';
    } else if (*eval) {
      auto cfg = resolve(shared);
      if (episodes) cfg.eval_episodes = *episodes;
      if (eval_horizon) cfg.eval_horizon = *eval_horizon;
      if (cfg.eval_episodes < 1) throw Error(ErrorCode::Argument, "evaluation needs at least one episode");
      const auto dir = directory(shared, cfg);
      if (checkpoint.empty()) {
        run_stage(Stage::Evaluate, cfg, dir);
        std::ifstream in(join(dir, artifact::kEval));
        std::cout << in.rdbuf();
      } else {
        const auto snap = load_agent(checkpoint);
        const auto r = evaluate(snap.actor, toy_spec(cfg), cfg.eval_episodes, cfg.eval_horizon,
                                stage_seed(cfg.seed, Stage::Evaluate));
        nlohmann::ordered_json j;
        j["episodes"] = cfg.eval_episodes;
        j["horizon"] = cfg.eval_horizon;
        j["mean_return"] = r.mean;
        j["std_return"] = r.std_dev;
        j["iteration"] = snap.iteration;
        std::cout << j.dump(2) << '\n';
      }
    } else if (*plot) {
      const auto cfg = resolve(shared);
      run_stage(Stage::Plot, cfg, directory(shared, cfg));
      std::cout << directory(shared, cfg) << '\n';
    } else if (*full) {
      const auto cfg = resolve(shared);
      const auto dir = directory(shared, cfg);
      run_pipeline(cfg, dir, progress);
      std::cout << dir << '\n';
    } else if (*verify) {
      const auto sum = verify_theorem(theorem, instances, verify_seed, std::cout);
      std::cerr << "theorem " << theorem << ": " << sum.passed << "/" << sum.instances << " passed, " << sum.applicable
                << " with premise satisfied\n";
      if (sum.passed != sum.instances) {
        throw Error(ErrorCode::State, "theorem " + std::to_string(theorem) + " failed on " +
                                          std::to_string(sum.instances - sum.passed) + " instance(s)");
      }
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    std::cerr << "error[" << error_tag(ErrorCode::Io) << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
