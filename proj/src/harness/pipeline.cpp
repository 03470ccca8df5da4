#include "midl/harness/pipeline.hpp"

#include "midl/harness/diagnostics.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

namespace midl::harness {

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::GenData: return "gen-data";
    case Stage::TrainModel: return "train-model";
    case Stage::TrainAgent: return "train-agent";
    case Stage::Evaluate: return "evaluate";
    case Stage::Plot: return "plot";
  }
  return "unknown";
}

std::uint64_t stage_seed(std::uint64_t run_seed, Stage stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(stage)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

namespace {

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "missing artifact '" + path + "'");
}

template <typename Scalar>
void train_agent_as(const RunConfig& cfg, const std::string& dir, const IterationHook& hook) {
  const std::string data_path = join(dir, artifact::kDataset), model_path = join(dir, artifact::kModel);
  require_file(data_path);
  require_file(model_path);
  const auto data = core::load_dataset(data_path);
  const auto ens = model::load_ensemble(model_path);
  agent::Trainer<Scalar> trainer(ens.template cast<Scalar>(), data, trainer_config(cfg),
                                 stage_seed(cfg.seed, Stage::TrainAgent));

  const std::string metrics_path = join(dir, artifact::kMetrics);
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw Error(ErrorCode::Io, "cannot write metrics '" + metrics_path + "'");
  for (long i = 0; i < cfg.iterations; ++i) {
    agent::MetricsRecord rec;
    try {
      rec = trainer.iterate();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFinite) save_agent(join(dir, artifact::kAbortAgent), snapshot(trainer));
      throw;
    }
    metrics << metrics_line(rec) << '\n';
    if (!metrics) throw Error(ErrorCode::Io, "failed writing metrics '" + metrics_path + "'");
    if (hook) hook(rec);
    if (cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0) {
      save_agent(join(dir, artifact::kAgent), snapshot(trainer));
    }
  }
  metrics.flush();
  save_agent(join(dir, artifact::kAgent), snapshot(trainer));
}

}  // namespace

void gen_data(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto data = core::generate_toy_dataset(toy_spec(cfg), stage_seed(cfg.seed, Stage::GenData));
  core::save_dataset(data, join(dir, artifact::kDataset));
}

void train_model(const RunConfig& cfg, const std::string& dir) {
  const std::string data_path = join(dir, artifact::kDataset);
  require_file(data_path);
  const auto data = core::load_dataset(data_path);
  Rng rng(stage_seed(cfg.seed, Stage::TrainModel));
  const auto ens = model::train_ensemble<double>(data, ensemble_config(cfg), rng);
  model::save_ensemble(join(dir, artifact::kModel), ens);
}

void train_agent(const RunConfig& cfg, const std::string& dir, const IterationHook& hook) {
  if (cfg.precision == "double") {
    train_agent_as<double>(cfg, dir, hook);
  } else {
    train_agent_as<float>(cfg, dir, hook);
  }
}

std::string metrics_line(const agent::MetricsRecord& rec) {
  nlohmann::ordered_json j;
  j["iter"] = rec.iter;
  j["critic_loss"] = rec.critic_loss;
  j["actor_loss"] = rec.actor_loss;
  j["alpha"] = rec.alpha;
  j["mean_q_offline"] = rec.mean_q_offline;
  j["mean_q_model"] = rec.mean_q_model;
  j["penalty"] = rec.penalty;
  j["omega_entropy"] = rec.omega_entropy;
  return j.dump();
}

EvalResult evaluate(const agent::Actor<double>& actor, const core::ToyMdpSpec& spec, int episodes, int horizon,
                    std::uint64_t seed) {
  if (episodes < 1) throw Error(ErrorCode::Argument, "evaluation needs at least one episode");
  if (horizon < 1) throw Error(ErrorCode::Argument, "evaluation horizon must be positive");
  if (actor.state_dim() != 1 || actor.action_dim() != 1) {
    throw Error(ErrorCode::Shape, "checkpoint dimensions do not match the toy task (1-D state and action)");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> init(spec.initial_lo, spec.initial_hi);
  EvalResult out;
  out.returns.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    double s = init(rng), ret = 0;
    for (int t = 0; t < horizon; ++t) {
      const double a = actor.mean_action(Matrix::Constant(1, 1, s))(0, 0);
      ret += core::toy_reward(s, a);
      if (t + 1 < horizon) s = core::toy_step(s, a, rng).next_state(0);
    }
    out.returns.push_back(ret);
  }
  double sum = 0, sq = 0;
  for (double r : out.returns) sum += r;
  out.mean = sum / episodes;
  for (double r : out.returns) sq += (r - out.mean) * (r - out.mean);
  out.std_dev = std::sqrt(sq / episodes);
  return out;
}

void evaluate_run(const RunConfig& cfg, const std::string& dir) {
  const std::string agent_path = join(dir, artifact::kAgent);
  require_file(agent_path);
  const auto snap = load_agent(agent_path);
  const auto r = evaluate(snap.actor, toy_spec(cfg), cfg.eval_episodes, cfg.eval_horizon,
                          stage_seed(cfg.seed, Stage::Evaluate));
  nlohmann::ordered_json j;
  j["episodes"] = cfg.eval_episodes;
  j["horizon"] = cfg.eval_horizon;
  j["mean_return"] = r.mean;
  j["std_return"] = r.std_dev;
  j["iteration"] = snap.iteration;
  std::ofstream out(join(dir, artifact::kEval));
  if (!out) throw Error(ErrorCode::Io, "cannot write evaluation report");
  out << j.dump(2) << '\n';
}

void run_stage(Stage stage, const RunConfig& cfg, const std::string& dir) {
  try {
    switch (stage) {
      case Stage::GenData: gen_data(cfg, dir); break;
      case Stage::TrainModel: train_model(cfg, dir); break;
      case Stage::TrainAgent: train_agent(cfg, dir); break;
      case Stage::Evaluate: evaluate_run(cfg, dir); break;
      case Stage::Plot: emit_diagnostics(cfg, dir); break;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::Io, e.what()));
  }
}

void run_pipeline(const RunConfig& cfg, const std::string& dir, const IterationHook& hook) {
  validate(cfg);
  std::filesystem::create_directories(dir);
  save_config(join(dir, artifact::kConfig), cfg);
  for (Stage s : {Stage::GenData, Stage::TrainModel}) run_stage(s, cfg, dir);
  try {
    train_agent(cfg, dir, hook);
  } catch (const Error& e) {
    throw StageError(Stage::TrainAgent, e);
  }
  for (Stage s : {Stage::Evaluate, Stage::Plot}) run_stage(s, cfg, dir);
}

}  // namespace midl::harness
