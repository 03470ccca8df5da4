#pragma once

#include "midl/agent/trainer.hpp"
#include "midl/core/toy_mdp.hpp"
#include "midl/model/ensemble.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace midl::harness {

/// Every knob of one toy-task run. Key names in the INI form follow the
/// hyperparameter table labels in snake case; see README for the full list.
struct RunConfig {
  // [shared]
  int policy_hidden_units = 256;
  int model_hidden_units = 200;
  long iterations = 3000;
  int batch_size = 256;

  // [model]
  double model_learning_rate = 1e-4;
  int model_hidden_layers = 4;
  int model_networks = 7;
  int elites = 5;
  double model_data_ratio = 0.5;
  int model_epochs = 400;
  double validation_fraction = 0.1;
  double model_log_std_min = -5.0;
  double model_log_std_max = 2.0;

  // [policy]
  double policy_learning_rate = 1e-4;
  double critic_learning_rate = 3e-4;
  int policy_hidden_layers = 2;
  double discount = 0.99;
  double soft_update = 5e-3;
  int soft_update_period = 1;
  /// NaN means -dim(A).
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  double alpha_learning_rate = 3e-3;
  double initial_alpha = 1.0;
  double lambda = 5.0;
  int penalty_uniform_actions = 10;
  int penalty_policy_actions = 10;
  double policy_log_std_min = -5.0;
  double policy_log_std_max = 2.0;
  std::string precision = "float";

  // [discriminator]
  double discriminator_learning_rate = 3e-4;
  int discriminator_hidden_layers = 1;
  int discriminator_hidden_units = 256;
  double kl_clip_min = ratio::kGFloor;
  double kl_clip_max = ratio::kGCeil;
  double ratio_clip_min = ratio::kRatioFloor;
  double ratio_clip_max = ratio::kRatioCeil;
  double output_scale = 2.0;
  int discriminator_batch_size = 256;
  int discriminator_steps = 50;
  int next_state_samples = 10;
  std::string weight_mode = "reverse-kl";

  // [rollout]
  int horizon = 5;
  int rollout_period = 250;
  long rollout_count = 1000;
  long buffer_capacity = 50000;

  // [data]
  long dataset_size = 1000;
  double behavior_mean = 0.0;
  double behavior_std = 0.35;
  double initial_state_min = 0.0;
  double initial_state_max = 1.0;

  // [run]
  std::uint64_t seed = 1;
  int eval_episodes = 100;
  int eval_horizon = 1;
  long checkpoint_every = 1000;
  std::string output_root = "runs";
};

/// Throws ErrorCode::Config naming the first out-of-range field.
void validate(const RunConfig& cfg);

/// Canonical INI text: fixed section and key order, shortest round-trip reals.
std::string serialize_config(const RunConfig& cfg);

/// Parses INI text. Missing keys keep their defaults; unknown sections or keys
/// and malformed values are ErrorCode::Config. The result is validated.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

/// CRC-32 of the canonical text with the seed and output root blanked, as
/// eight lowercase hex digits.
std::string config_hash(const RunConfig& cfg);

/// Output root: MIDL_RL_RUN_DIR if set, else `override_root` if nonempty, else
/// cfg.output_root. The run directory is <root>/<hash>-s<seed>.
std::string run_directory(const RunConfig& cfg, const std::string& override_root = {});

core::ToyMdpSpec toy_spec(const RunConfig& cfg);
model::EnsembleConfig ensemble_config(const RunConfig& cfg);
agent::TrainerConfig trainer_config(const RunConfig& cfg);

}  // namespace midl::harness
