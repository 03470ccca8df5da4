#pragma once

#include "midl/agent/trainer.hpp"

#include <string>

namespace midl::harness {

/// Everything needed to act, score actions and weight model samples after
/// training, in double precision. Optimizer moments are not kept, so a loaded
/// snapshot cannot resume training bit-exactly.
struct AgentSnapshot {
  long iteration = 0;
  agent::Actor<double> actor;
  agent::CriticPair<double> critics;
  double log_alpha = 0;
  ratio::DiscriminatorPair<double> discriminators;
};

template <typename Scalar>
AgentSnapshot snapshot(const agent::Trainer<Scalar>& t) {
  AgentSnapshot s;
  s.iteration = t.iteration();
  const auto& a = t.actor();
  s.actor = agent::Actor<double>::from_parts(a.net().template cast<double>(), a.box(), a.clamp(),
                                             t.config().agent.actor_lr);
  const auto& c = t.critics();
  s.critics.tau = c.tau;
  for (int k = 0; k < 2; ++k) {
    s.critics.q[k] = c.q[k].template cast<double>();
    s.critics.target[k] = c.target[k].template cast<double>();
    s.critics.opt[k] = approx::Adam<double>(s.critics.q[k], {t.config().agent.critic_lr});
  }
  s.log_alpha = t.entropy().log_alpha();
  const auto& d = t.discriminators();
  const double lr = t.config().discriminator.learning_rate;
  auto cast_disc = [lr](const ratio::Discriminator<Scalar>& src) {
    return ratio::Discriminator<double>::from_parts(src.net().template cast<double>(),
                                                    src.normalizer().template cast<double>(),
                                                    static_cast<double>(src.logit_scale()), lr);
  };
  s.discriminators.sas = cast_disc(d.sas);
  s.discriminators.sa = cast_disc(d.sa);
  s.discriminators.batch_size = d.batch_size;
  s.discriminators.clips = d.clips;
  return s;
}

/// Text format "midl-agent 1": scalars, then the actor, both critics with
/// their targets and both discriminators (normaliser + network) as approx
/// checkpoint blocks.
void save_agent(const std::string& path, const AgentSnapshot& snap);
AgentSnapshot load_agent(const std::string& path);

}  // namespace midl::harness
