#include "midl/harness/diagnostics.hpp"
#include "midl/harness/pipeline.hpp"
#include "midl/harness/verify.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace midl;
using namespace midl::harness;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("midl_harness_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

RunConfig tiny_config() {
  RunConfig c;
  c.policy_hidden_units = 16;
  c.model_hidden_units = 16;
  c.model_hidden_layers = 2;
  c.model_networks = 3;
  c.elites = 2;
  c.model_epochs = 3;
  c.iterations = 12;
  c.batch_size = 32;
  c.discriminator_hidden_units = 16;
  c.discriminator_batch_size = 32;
  c.discriminator_steps = 3;
  c.next_state_samples = 3;
  c.rollout_period = 5;
  c.rollout_count = 20;
  c.buffer_capacity = 500;
  c.dataset_size = 120;
  c.eval_episodes = 10;
  c.checkpoint_every = 5;
  c.seed = 11;
  return c;
}

int count_columns(const std::string& line) { return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1; }

}  // namespace

TEST(Config, DefaultsMatchHyperparameterTable) {
  const RunConfig c;
  EXPECT_EQ(c.policy_hidden_units, 256);
  EXPECT_EQ(c.model_hidden_units, 200);
  EXPECT_EQ(c.batch_size, 256);
  EXPECT_EQ(c.model_learning_rate, 1e-4);
  EXPECT_EQ(c.model_hidden_layers, 4);
  EXPECT_EQ(c.model_networks, 7);
  EXPECT_EQ(c.elites, 5);
  EXPECT_EQ(c.model_data_ratio, 0.5);
  EXPECT_EQ(c.policy_learning_rate, 1e-4);
  EXPECT_EQ(c.critic_learning_rate, 3e-4);
  EXPECT_EQ(c.policy_hidden_layers, 2);
  EXPECT_EQ(c.discount, 0.99);
  EXPECT_EQ(c.soft_update, 5e-3);
  EXPECT_TRUE(std::isnan(c.target_entropy));
  EXPECT_EQ(c.discriminator_learning_rate, 3e-4);
  EXPECT_EQ(c.discriminator_hidden_layers, 1);
  EXPECT_EQ(c.kl_clip_min, 1e-45);
  EXPECT_EQ(c.kl_clip_max, 10.0);
  EXPECT_EQ(c.ratio_clip_min, 1e-45);
  EXPECT_EQ(c.ratio_clip_max, 1.0);
  EXPECT_EQ(c.output_scale, 2.0);
  EXPECT_EQ(c.lambda, 5.0);
  EXPECT_EQ(c.horizon, 5);
  EXPECT_EQ(c.iterations, 3000);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, RoundTripIsByteIdentical) {
  RunConfig c = tiny_config();
  c.target_entropy = -0.75;
  c.lambda = 0.1 + 0.2;
  c.weight_mode = "literal";
  c.output_root = "/tmp/some where";
  const std::string text = serialize_config(c);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
  const std::string defaults = serialize_config(RunConfig{});
  EXPECT_EQ(serialize_config(parse_config(defaults)), defaults);
  EXPECT_NE(defaults.find("target_entropy = -dim(A)"), std::string::npos);
  EXPECT_NE(defaults.find("kl_divergence_clipping_range = 1e-45, 10"), std::string::npos);
  EXPECT_NE(defaults.find("number_of_hidden_units_per_layer = 256/200"), std::string::npos);
}

TEST(Config, PartialFilesKeepDefaultsAndAcceptBrackets) {
  const auto c = parse_config("[policy]\nlambda = 0.5\n[discriminator]\ndynamics_ratio_clipping_range = [1e-30, 1]\n");
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(c.ratio_clip_min, 1e-30);
  EXPECT_EQ(c.horizon, 5);
}

TEST(Config, InvalidValuesAreConfigErrors) {
  auto code_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return std::string(error_tag(e.code()));
    }
    return std::string("none");
  };
  EXPECT_EQ(code_of("[policy]\ndiscount_factor = 1.5\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[policy]\nlamda = 1\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[bogus]\nx = 1\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[shared]\nbatch_size = 12x\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[shared]\noptimizer = sgd\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[model]\nnumber_of_elites = 9\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[discriminator]\nweight_mode = forward\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[discriminator]\nkl_divergence_clipping_range = 10, 1\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[policy]\nprecision = half\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[run]\neval_episodes = 0\n"), "E_CONFIG");
  EXPECT_EQ(code_of("[policy]\nlambda = 1\n[policy]\nlambda = 2\n"), "E_CONFIG");
}

TEST(Config, HashIgnoresSeedAndRootOnly) {
  RunConfig a = tiny_config(), b = tiny_config();
  b.seed = 99;
  b.output_root = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 8u);
  b.lambda = 0.5;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, RunDirectoryNamingAndOverride) {
  RunConfig c = tiny_config();
  c.output_root = "root";
  unsetenv("MIDL_RL_RUN_DIR");
  EXPECT_EQ(run_directory(c), "root/" + config_hash(c) + "-s11");
  EXPECT_EQ(run_directory(c, "cli"), "cli/" + config_hash(c) + "-s11");
  setenv("MIDL_RL_RUN_DIR", "/env/root", 1);
  EXPECT_EQ(run_directory(c, "cli"), "/env/root/" + config_hash(c) + "-s11");
  unsetenv("MIDL_RL_RUN_DIR");
  RunConfig d = c;
  d.seed = 12;
  EXPECT_NE(run_directory(c), run_directory(d));
}

TEST(Config, ConvertsToComponentConfigs) {
  RunConfig c;
  c.lambda = 0.5;
  const auto t = trainer_config(c);
  EXPECT_EQ(t.agent.lambda, 0.5);
  EXPECT_EQ(t.agent.mix_fraction, 0.5);
  EXPECT_EQ(t.agent.hidden, 256);
  EXPECT_EQ(t.clips.g_hi, 10.0);
  EXPECT_EQ(t.probes, 10);
  const auto e = ensemble_config(c);
  EXPECT_EQ(e.hidden, 200);
  EXPECT_EQ(e.members, 7);
  EXPECT_EQ(e.elites, 5);
}

TEST(Metrics, LineHasFieldsInOrder) {
  agent::MetricsRecord r;
  r.iter = 3;
  r.alpha = 0.5;
  const std::string line = metrics_line(r);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["iter"], 3);
  EXPECT_EQ(line.find("{\"iter\":3,\"critic_loss\""), 0u);
  const std::vector<std::string> keys{"iter",     "critic_loss",    "actor_loss",   "alpha",
                                      "mean_q_offline", "mean_q_model", "penalty", "omega_entropy"};
  std::size_t pos = 0;
  for (const auto& k : keys) {
    const auto at = line.find("\"" + k + "\"");
    ASSERT_NE(at, std::string::npos) << k;
    EXPECT_GE(at, pos);
    pos = at;
  }
}

TEST(Stages, SeedsDifferPerStage) {
  EXPECT_NE(stage_seed(1, Stage::GenData), stage_seed(1, Stage::TrainModel));
  EXPECT_NE(stage_seed(1, Stage::GenData), stage_seed(2, Stage::GenData));
  EXPECT_EQ(stage_seed(5, Stage::Plot), stage_seed(5, Stage::Plot));
}

TEST(Evaluate, OneStepReturnIsInitialState) {
  Rng rng(3);
  const agent::Actor<double> actor(1, 1, 8, 1, {}, {-5, 2}, 1e-3, rng);
  const core::ToyMdpSpec spec;
  const auto r = evaluate(actor, spec, 2000, 1, 42);
  Rng oracle(42);
  std::uniform_real_distribution<double> u(spec.initial_lo, spec.initial_hi);
  double sum = 0;
  for (int i = 0; i < 2000; ++i) sum += u(oracle);
  EXPECT_NEAR(r.mean, sum / 2000, 1e-12);
  EXPECT_NEAR(r.mean, 0.5, 4 * std::sqrt(1.0 / 12 / 2000));
  const auto again = evaluate(actor, spec, 2000, 1, 42);
  EXPECT_EQ(again.returns, r.returns);
  EXPECT_THROW(evaluate(actor, spec, 0, 1, 42), Error);
  const agent::Actor<double> wide(2, 1, 8, 1, {}, {-5, 2}, 1e-3, rng);
  try {
    evaluate(wide, spec, 5, 1, 42);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Shape);
  }
}

TEST(Evaluate, LongerHorizonAddsNextStateRewards) {
  Rng rng(3);
  const agent::Actor<double> actor(1, 1, 8, 1, {}, {-5, 2}, 1e-3, rng);
  const auto r = evaluate(actor, {}, 50, 3, 7);
  for (double v : r.returns) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(r.std_dev, 0.0);
}

TEST(Diagnostics, ActionGridAndSvg) {
  const Vector g = action_grid({}, 401);
  EXPECT_EQ(g.size(), 401);
  EXPECT_EQ(g(0), -1.0);
  EXPECT_EQ(g(200), 0.0);
  EXPECT_EQ(g(400), 1.0);
  const std::string svg = render_svg("a<b", "x", "y", {{{0, 1}, {0, 1}, "red", true}, {{0.5}, {0.5}, "blue", false}}, {0.25});
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("<circle"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Diagnostics, AnalyticErrorMatchesClosedForm) {
  // One-member ensemble with a constant output: mean pinned to the true mean at a = 0.
  Rng rng(1);
  model::EnsembleConfig cfg;
  cfg.members = 1;
  cfg.elites = 1;
  cfg.hidden = 4;
  cfg.layers = 1;
  model::GaussianEnsemble<double> ens(1, 1, cfg, rng);
  ens.set_elites({0});
  auto& net = ens.members()[0].net;
  net.layers().back().weight.setZero();
  const auto truth = core::toy_mean_sigma(0.0);
  net.layers().back().bias << truth.mean, 0.0, std::log(truth.sigma), 0.0;
  const double sd = std::exp(ens.member_head(0, Matrix::Zero(1, 1), Matrix::Zero(1, 1)).log_std(0, 0));
  const double oracle = std::log(sd / truth.sigma) + truth.sigma * truth.sigma / (2 * sd * sd) - 0.5;
  const Vector e = analytic_model_error(ens, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  EXPECT_NEAR(e(0), oracle, 1e-12);
  // State offset enters through the delta parameterisation.
  const Vector shifted = analytic_model_error(ens, Matrix::Constant(1, 1, 0.1), Matrix::Zero(1, 1));
  EXPECT_NEAR(shifted(0), oracle + 0.01 / (2 * sd * sd), 1e-12);
  const Vector far = analytic_model_error(ens, Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.9));
  EXPECT_GT(far(0), e(0));
}

TEST(Verify, EmitsOneParseableLinePerInstance) {
  for (int theorem : {1, 2, 3}) {
    std::ostringstream out;
    const auto s = verify_theorem(theorem, 3, 100, out);
    EXPECT_EQ(s.instances, 3);
    EXPECT_EQ(s.passed, 3) << "theorem " << theorem;
    std::istringstream in(out.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      EXPECT_EQ(j["theorem"], theorem);
      EXPECT_EQ(j["seed"], 100 + n);
      EXPECT_TRUE(j.contains("margin"));
      ++n;
    }
    EXPECT_EQ(n, 3);
  }
  std::ostringstream sink;
  EXPECT_THROW(verify_theorem(4, 1, 0, sink), Error);
  EXPECT_THROW(verify_theorem(1, 0, 0, sink), Error);
}

TEST(AgentCheckpoint, RoundTripPreservesOutputs) {
  const auto cfg = tiny_config();
  const auto dir = scratch_dir("ckpt");
  gen_data(cfg, dir);
  train_model(cfg, dir);
  const auto data = core::load_dataset(join(dir, artifact::kDataset));
  auto ens = model::load_ensemble(join(dir, artifact::kModel));
  agent::Trainer<double> t(ens, data, trainer_config(cfg), 5);
  for (int i = 0; i < 3; ++i) t.iterate();
  const auto snap = snapshot(t);
  save_agent(join(dir, "a.txt"), snap);
  const auto back = load_agent(join(dir, "a.txt"));
  const Matrix s = Matrix::Random(1, 7);
  const Matrix a = Matrix::Random(1, 7);
  EXPECT_EQ(back.iteration, 3);
  EXPECT_EQ(back.log_alpha, t.entropy().log_alpha());
  EXPECT_TRUE(back.actor.mean_action(s) == t.actor().mean_action(s));
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(agent::q_values(back.critics.q[k], s, a) == agent::q_values(t.critics().q[k], s, a));
    EXPECT_TRUE(agent::q_values(back.critics.target[k], s, a) == agent::q_values(t.critics().target[k], s, a));
  }
  const Matrix s2 = Matrix::Random(1, 7);
  EXPECT_TRUE(back.discriminators.log_raw_ratio(s, a, s2) == t.discriminators().log_raw_ratio(s, a, s2));
  // Saving the reloaded snapshot reproduces the file byte for byte.
  save_agent(join(dir, "b.txt"), back);
  EXPECT_EQ(slurp(join(dir, "a.txt")), slurp(join(dir, "b.txt")));
  std::filesystem::remove_all(dir);
}

TEST(AgentCheckpoint, TruncatedFileIsIoError) {
  const auto dir = scratch_dir("trunc");
  std::filesystem::create_directories(dir);
  std::ofstream(join(dir, "x.txt")) << "midl-agent 1\niteration 3\nbox -1\n";
  try {
    load_agent(join(dir, "x.txt"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, SmokeRunEmitsArtifactsAndIsDeterministic) {
  const auto cfg = tiny_config();
  const auto a = scratch_dir("smoke_a"), b = scratch_dir("smoke_b");
  long last = -1;
  bool monotone = true;
  run_pipeline(cfg, a, [&](const agent::MetricsRecord& r) {
    monotone = monotone && r.iter == last + 1;
    last = r.iter;
  });
  EXPECT_TRUE(monotone);
  EXPECT_EQ(last, cfg.iterations - 1);
  run_pipeline(cfg, b);
  for (const char* f : {artifact::kConfig, artifact::kDataset, artifact::kModel, artifact::kMetrics, artifact::kAgent,
                        artifact::kEval}) {
    ASSERT_TRUE(std::filesystem::exists(join(a, f))) << f;
  }
  EXPECT_EQ(slurp(join(a, artifact::kMetrics)), slurp(join(b, artifact::kMetrics)));
  EXPECT_EQ(slurp(join(a, artifact::kAgent)), slurp(join(b, artifact::kAgent)));
  EXPECT_EQ(slurp(join(a, artifact::kConfig)), serialize_config(cfg));

  std::istringstream metrics(slurp(join(a, artifact::kMetrics)));
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) EXPECT_EQ(nlohmann::json::parse(line)["iter"], lines++);
  EXPECT_EQ(lines, cfg.iterations);

  const std::vector<std::pair<const char*, const std::vector<std::string>*>> csvs{
      {"dataset.csv", &kDatasetColumns},
      {"model_curve.csv", &kModelCurveColumns},
      {"error_weight.csv", &kErrorWeightColumns},
      {"q_curve.csv", &kQCurveColumns}};
  for (const auto& [name, cols] : csvs) {
    std::istringstream in(slurp(join(a, name)));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(count_columns(header), static_cast<int>(cols->size())) << name;
    int rows = 0;
    while (std::getline(in, line)) {
      EXPECT_EQ(count_columns(line), static_cast<int>(cols->size())) << name;
      ++rows;
    }
    EXPECT_GT(rows, 0) << name;
    const std::string svg = std::string(name).replace(std::string(name).size() - 3, 3, "svg");
    EXPECT_TRUE(std::filesystem::exists(join(a, svg.c_str()))) << svg;
  }
  // q_curve: 401 rows with exactly one argmax marker.
  std::istringstream q(slurp(join(a, "q_curve.csv")));
  std::getline(q, line);
  int rows = 0, marks = 0;
  while (std::getline(q, line)) {
    ++rows;
    if (line.substr(line.rfind(',') + 1) == "1") ++marks;
  }
  EXPECT_EQ(rows, 401);
  EXPECT_EQ(marks, 1);
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Pipeline, InvalidConfigFailsBeforeAnyWork) {
  RunConfig cfg = tiny_config();
  cfg.discount = 1.5;
  const auto dir = scratch_dir("invalid");
  EXPECT_THROW(run_pipeline(cfg, dir), Error);
  EXPECT_FALSE(std::filesystem::exists(dir));
}

TEST(Pipeline, MissingArtifactIsStageTagged) {
  const auto dir = scratch_dir("missing");
  std::filesystem::create_directories(dir);
  try {
    run_stage(Stage::TrainModel, tiny_config(), dir);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::TrainModel);
    EXPECT_EQ(e.code(), ErrorCode::Io);
    EXPECT_EQ(std::string(e.what()).rfind("stage train-model:", 0), 0u);
  }
  EXPECT_THROW(run_stage(Stage::Plot, tiny_config(), dir), StageError);
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, DistinctSeedsUseDistinctDirectories) {
  RunConfig a = tiny_config(), b = tiny_config();
  b.seed = a.seed + 1;
  EXPECT_NE(run_directory(a, "/tmp/x"), run_directory(b, "/tmp/x"));
}
