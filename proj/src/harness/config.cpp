#include "midl/harness/config.hpp"

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace midl::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& where, const std::string& text, const char* want) {
  throw Error(ErrorCode::Config, "config: " + where + " = '" + text + "' is not " + want);
}

template <typename T>
T parse_number(const std::string& where, const std::string& raw) {
  const std::string text = trim(raw);
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    bad_value(where, text, std::is_floating_point_v<T> ? "a real number" : "an integer");
  }
  return v;
}

std::pair<std::string, std::string> split_pair(const std::string& where, const std::string& text, char sep) {
  const auto pos = text.find(sep);
  if (pos == std::string::npos) bad_value(where, text, "a pair");
  return {text.substr(0, pos), text.substr(pos + 1)};
}

std::string text(double v) { return format_real(v); }
std::string text(int v) { return std::to_string(v); }
std::string text(long v) { return std::to_string(v); }
std::string text(std::uint64_t v) { return std::to_string(v); }
std::string text(const std::string& v) { return v; }

template <typename T>
void assign(T& dst, const std::string& where, const std::string& raw) {
  if constexpr (std::is_same_v<T, std::string>) {
    dst = trim(raw);
  } else {
    dst = parse_number<T>(where, raw);
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field scalar(const char* section, const char* key, T RunConfig::*member) {
  return {section, key, [member](const RunConfig& c) { return text(c.*member); },
          [member](RunConfig& c, const std::string& where, const std::string& raw) { assign(c.*member, where, raw); }};
}

/// "lo, hi" with optional surrounding brackets.
Field range(const char* section, const char* key, double RunConfig::*lo, double RunConfig::*hi) {
  return {section, key, [lo, hi](const RunConfig& c) { return text(c.*lo) + ", " + text(c.*hi); },
          [lo, hi](RunConfig& c, const std::string& where, const std::string& raw) {
            std::string t = trim(raw);
            if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
            const auto [a, b] = split_pair(where, t, ',');
            c.*lo = parse_number<double>(where, a);
            c.*hi = parse_number<double>(where, b);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = RunConfig;
    std::vector<Field> f;
    f.push_back({"shared", "number_of_hidden_units_per_layer",
                 [](const C& c) { return text(c.policy_hidden_units) + "/" + text(c.model_hidden_units); },
                 [](C& c, const std::string& where, const std::string& raw) {
                   const auto [p, m] = split_pair(where, trim(raw), '/');
                   c.policy_hidden_units = parse_number<int>(where, p);
                   c.model_hidden_units = parse_number<int>(where, m);
                 }});
    f.push_back(scalar("shared", "number_of_iterations", &C::iterations));
    f.push_back(scalar("shared", "batch_size", &C::batch_size));
    f.push_back({"shared", "optimizer", [](const C&) { return std::string("adam"); },
                 [](C&, const std::string& where, const std::string& raw) {
                   if (trim(raw) != "adam") bad_value(where, trim(raw), "'adam'");
                 }});

    f.push_back(scalar("model", "model_learning_rate", &C::model_learning_rate));
    f.push_back(scalar("model", "number_of_hidden_layers", &C::model_hidden_layers));
    f.push_back(scalar("model", "number_of_model_networks", &C::model_networks));
    f.push_back(scalar("model", "number_of_elites", &C::elites));
    f.push_back(scalar("model", "ratio_of_model_data", &C::model_data_ratio));
    f.push_back(scalar("model", "epochs", &C::model_epochs));
    f.push_back(scalar("model", "validation_fraction", &C::validation_fraction));
    f.push_back(range("model", "log_std_range", &C::model_log_std_min, &C::model_log_std_max));

    f.push_back(scalar("policy", "learning_rate_policy", &C::policy_learning_rate));
    f.push_back(scalar("policy", "learning_rate_critic", &C::critic_learning_rate));
    f.push_back(scalar("policy", "number_of_hidden_layers", &C::policy_hidden_layers));
    f.push_back(scalar("policy", "discount_factor", &C::discount));
    f.push_back(scalar("policy", "soft_update_parameter", &C::soft_update));
    f.push_back(scalar("policy", "soft_update_period", &C::soft_update_period));
    f.push_back({"policy", "target_entropy",
                 [](const C& c) { return std::isnan(c.target_entropy) ? std::string("-dim(A)") : text(c.target_entropy); },
                 [](C& c, const std::string& where, const std::string& raw) {
                   const std::string t = trim(raw);
                   c.target_entropy =
                       t == "-dim(A)" ? std::numeric_limits<double>::quiet_NaN() : parse_number<double>(where, t);
                 }});
    f.push_back(scalar("policy", "alpha_learning_rate", &C::alpha_learning_rate));
    f.push_back(scalar("policy", "initial_alpha", &C::initial_alpha));
    f.push_back(scalar("policy", "lambda", &C::lambda));
    f.push_back(scalar("policy", "penalty_uniform_actions", &C::penalty_uniform_actions));
    f.push_back(scalar("policy", "penalty_policy_actions", &C::penalty_policy_actions));
    f.push_back(range("policy", "log_std_range", &C::policy_log_std_min, &C::policy_log_std_max));
    f.push_back(scalar("policy", "precision", &C::precision));

    f.push_back(scalar("discriminator", "discriminator_learning_rate", &C::discriminator_learning_rate));
    f.push_back(scalar("discriminator", "number_of_hidden_layers", &C::discriminator_hidden_layers));
    f.push_back(scalar("discriminator", "number_of_hidden_units", &C::discriminator_hidden_units));
    f.push_back(range("discriminator", "kl_divergence_clipping_range", &C::kl_clip_min, &C::kl_clip_max));
    f.push_back(range("discriminator", "dynamics_ratio_clipping_range", &C::ratio_clip_min, &C::ratio_clip_max));
    f.push_back(scalar("discriminator", "output_layer_scale", &C::output_scale));
    f.push_back(scalar("discriminator", "batch_size", &C::discriminator_batch_size));
    f.push_back(scalar("discriminator", "training_steps", &C::discriminator_steps));
    f.push_back(scalar("discriminator", "next_state_samples", &C::next_state_samples));
    f.push_back(scalar("discriminator", "weight_mode", &C::weight_mode));

    f.push_back(scalar("rollout", "horizon", &C::horizon));
    f.push_back(scalar("rollout", "period", &C::rollout_period));
    f.push_back(scalar("rollout", "count", &C::rollout_count));
    f.push_back(scalar("rollout", "buffer_capacity", &C::buffer_capacity));

    f.push_back(scalar("data", "dataset_size", &C::dataset_size));
    f.push_back(scalar("data", "behavior_mean", &C::behavior_mean));
    f.push_back(scalar("data", "behavior_std", &C::behavior_std));
    f.push_back(range("data", "initial_state_range", &C::initial_state_min, &C::initial_state_max));

    f.push_back(scalar("run", "seed", &C::seed));
    f.push_back(scalar("run", "eval_episodes", &C::eval_episodes));
    f.push_back(scalar("run", "eval_horizon", &C::eval_horizon));
    f.push_back(scalar("run", "checkpoint_every", &C::checkpoint_every));
    f.push_back(scalar("run", "output_root", &C::output_root));
    return f;
  }();
  return table;
}

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw Error(ErrorCode::Config, std::string("config: ") + field + " " + what);
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.policy_hidden_units >= 1 && c.model_hidden_units >= 1, "[shared] number_of_hidden_units_per_layer",
          "must be positive");
  require(c.iterations >= 0, "[shared] number_of_iterations", "must be nonnegative");
  require(c.batch_size >= 2, "[shared] batch_size", "must be at least 2");

  require(c.model_learning_rate > 0, "[model] model_learning_rate", "must be positive");
  require(c.model_hidden_layers >= 1, "[model] number_of_hidden_layers", "must be at least 1");
  require(c.model_networks >= 1, "[model] number_of_model_networks", "must be at least 1");
  require(c.elites >= 1 && c.elites <= c.model_networks, "[model] number_of_elites",
          "must lie in [1, number_of_model_networks]");
  require(c.model_data_ratio >= 0 && c.model_data_ratio < 1, "[model] ratio_of_model_data", "must lie in [0, 1)");
  require(c.model_epochs >= 1, "[model] epochs", "must be at least 1");
  require(c.validation_fraction >= 0 && c.validation_fraction < 1, "[model] validation_fraction", "must lie in [0, 1)");
  require(c.model_log_std_min < c.model_log_std_max, "[model] log_std_range", "must have min < max");

  require(c.policy_learning_rate > 0, "[policy] learning_rate_policy", "must be positive");
  require(c.critic_learning_rate > 0, "[policy] learning_rate_critic", "must be positive");
  require(c.policy_hidden_layers >= 1, "[policy] number_of_hidden_layers", "must be at least 1");
  require(c.discount >= 0 && c.discount < 1, "[policy] discount_factor", "must lie in [0, 1)");
  require(c.soft_update > 0 && c.soft_update < 1, "[policy] soft_update_parameter", "must lie in (0, 1)");
  require(c.soft_update_period >= 1, "[policy] soft_update_period", "must be at least 1");
  require(std::isnan(c.target_entropy) || std::isfinite(c.target_entropy), "[policy] target_entropy",
          "must be finite or -dim(A)");
  require(c.alpha_learning_rate >= 0, "[policy] alpha_learning_rate", "must be nonnegative");
  require(c.initial_alpha > 0 && std::isfinite(c.initial_alpha), "[policy] initial_alpha", "must be positive");
  require(c.lambda >= 0 && std::isfinite(c.lambda), "[policy] lambda", "must be nonnegative");
  require(c.penalty_uniform_actions >= 0 && c.penalty_policy_actions >= 0, "[policy] penalty_*_actions",
          "must be nonnegative");
  require(c.lambda == 0 || c.penalty_uniform_actions + c.penalty_policy_actions >= 1, "[policy] penalty_*_actions",
          "must total at least 1 when lambda > 0");
  require(c.policy_log_std_min < c.policy_log_std_max, "[policy] log_std_range", "must have min < max");
  require(c.precision == "float" || c.precision == "double", "[policy] precision", "must be float or double");

  require(c.discriminator_learning_rate > 0, "[discriminator] discriminator_learning_rate", "must be positive");
  require(c.discriminator_hidden_layers >= 1, "[discriminator] number_of_hidden_layers", "must be at least 1");
  require(c.discriminator_hidden_units >= 1, "[discriminator] number_of_hidden_units", "must be positive");
  require(c.kl_clip_min > 0 && c.kl_clip_min <= c.kl_clip_max, "[discriminator] kl_divergence_clipping_range",
          "must satisfy 0 < min <= max");
  require(c.ratio_clip_min > 0 && c.ratio_clip_min <= c.ratio_clip_max,
          "[discriminator] dynamics_ratio_clipping_range", "must satisfy 0 < min <= max");
  require(c.output_scale > 0, "[discriminator] output_layer_scale", "must be positive");
  require(c.discriminator_batch_size >= 1, "[discriminator] batch_size", "must be positive");
  require(c.discriminator_steps >= 0, "[discriminator] training_steps", "must be nonnegative");
  require(c.next_state_samples >= 1, "[discriminator] next_state_samples", "must be at least 1");
  ratio::g_mode_from_name(c.weight_mode);

  require(c.horizon >= 1, "[rollout] horizon", "must be at least 1");
  require(c.rollout_period >= 1, "[rollout] period", "must be at least 1");
  require(c.rollout_count >= 1, "[rollout] count", "must be at least 1");
  require(c.buffer_capacity >= 1, "[rollout] buffer_capacity", "must be at least 1");

  require(c.dataset_size >= 1, "[data] dataset_size", "must be positive");
  require(c.behavior_std > 0, "[data] behavior_std", "must be positive");
  require(c.initial_state_min < c.initial_state_max, "[data] initial_state_range", "must have min < max");

  require(c.eval_episodes >= 1, "[run] eval_episodes", "must be at least 1");
  require(c.eval_horizon >= 1, "[run] eval_horizon", "must be at least 1");
  require(c.checkpoint_every >= 0, "[run] checkpoint_every", "must be nonnegative");
  require(!c.output_root.empty(), "[run] output_root", "must be nonempty");

  const long n_model = std::lround(c.model_data_ratio * c.batch_size);
  require(c.lambda == 0 || n_model >= 1, "[model] ratio_of_model_data",
          "times batch_size must round to at least 1 when lambda > 0");
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Config, std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  std::set<std::pair<std::string, std::string>> known;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    known.insert({f.section, f.key});
    sections.insert(f.section);
  }
  for (const auto& [section, body] : tree) {
    if (!sections.count(section)) throw Error(ErrorCode::Config, "config: unknown section or stray key '" + section + "'");
    for (const auto& [key, value] : body) {
      if (!known.count({section, key})) throw Error(ErrorCode::Config, "config: unknown key [" + section + "] " + key);
    }
  }
  for (const auto& f : fields()) {
    const auto value = tree.get_optional<std::string>(pt::ptree::path_type(f.section + "." + f.key, '.'));
    if (value) f.set(cfg, "[" + f.section + "] " + f.key, *value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write config '" + path + "'");
  out << serialize_config(cfg);
  if (!out) throw Error(ErrorCode::Io, "failed writing config '" + path + "'");
}

std::string config_hash(const RunConfig& cfg) {
  RunConfig blank = cfg;
  blank.seed = 0;
  blank.output_root = "-";
  const std::string t = serialize_config(blank);
  boost::crc_32_type crc;
  crc.process_bytes(t.data(), t.size());
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(crc.checksum()));
  return buf;
}

std::string run_directory(const RunConfig& cfg, const std::string& override_root) {
  std::string root = cfg.output_root;
  if (!override_root.empty()) root = override_root;
  if (const char* env = std::getenv("MIDL_RL_RUN_DIR"); env && *env) root = env;
  return root + "/" + config_hash(cfg) + "-s" + std::to_string(cfg.seed);
}

core::ToyMdpSpec toy_spec(const RunConfig& cfg) {
  core::ToyMdpSpec s;
  s.behavior_mean = cfg.behavior_mean;
  s.behavior_std = cfg.behavior_std;
  s.dataset_size = static_cast<std::size_t>(cfg.dataset_size);
  s.initial_lo = cfg.initial_state_min;
  s.initial_hi = cfg.initial_state_max;
  return s;
}

model::EnsembleConfig ensemble_config(const RunConfig& cfg) {
  model::EnsembleConfig e;
  e.members = cfg.model_networks;
  e.elites = cfg.elites;
  e.hidden = cfg.model_hidden_units;
  e.layers = cfg.model_hidden_layers;
  e.batch_size = cfg.batch_size;
  e.learning_rate = cfg.model_learning_rate;
  e.epochs = cfg.model_epochs;
  e.validation_fraction = cfg.validation_fraction;
  e.clamp = {cfg.model_log_std_min, cfg.model_log_std_max};
  return e;
}

agent::TrainerConfig trainer_config(const RunConfig& cfg) {
  agent::TrainerConfig t;
  agent::AgentConfig& a = t.agent;
  a.hidden = cfg.policy_hidden_units;
  a.hidden_layers = cfg.policy_hidden_layers;
  a.actor_lr = cfg.policy_learning_rate;
  a.critic_lr = cfg.critic_learning_rate;
  a.alpha_lr = cfg.alpha_learning_rate;
  a.initial_alpha = cfg.initial_alpha;
  a.target_entropy = cfg.target_entropy;
  a.gamma = cfg.discount;
  a.tau = cfg.soft_update;
  a.soft_update_every = cfg.soft_update_period;
  a.lambda = cfg.lambda;
  a.mix_fraction = cfg.model_data_ratio;
  a.batch_size = cfg.batch_size;
  a.penalty_uniform_actions = cfg.penalty_uniform_actions;
  a.penalty_actor_actions = cfg.penalty_policy_actions;
  a.actor_log_std = {cfg.policy_log_std_min, cfg.policy_log_std_max};
  t.horizon = cfg.horizon;
  t.rollout_every = cfg.rollout_period;
  t.rollout_count = cfg.rollout_count;
  t.buffer_capacity = cfg.buffer_capacity;
  t.discriminator_steps = cfg.discriminator_steps;
  t.probes = cfg.next_state_samples;
  t.g_mode = ratio::g_mode_from_name(cfg.weight_mode);
  t.discriminator.hidden = cfg.discriminator_hidden_units;
  t.discriminator.hidden_layers = cfg.discriminator_hidden_layers;
  t.discriminator.learning_rate = cfg.discriminator_learning_rate;
  t.discriminator.logit_scale = cfg.output_scale;
  t.discriminator.batch_size = cfg.discriminator_batch_size;
  t.clips = {cfg.ratio_clip_min, cfg.ratio_clip_max, cfg.kl_clip_min, cfg.kl_clip_max};
  return t;
}

}  // namespace midl::harness
