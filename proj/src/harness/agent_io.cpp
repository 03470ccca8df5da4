#include "midl/harness/agent_io.hpp"

#include "midl/approx/checkpoint.hpp"

#include <charconv>
#include <fstream>

namespace midl::harness {

namespace {

constexpr int kAgentVersion = 1;

void expect(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) throw Error(ErrorCode::Io, "agent checkpoint: expected '" + want + "'");
}

double real(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorCode::Io, "agent checkpoint: truncated");
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error(ErrorCode::Io, "agent checkpoint: bad real '" + tok + "'");
  return v;
}

long integer(std::istream& in) {
  long v = 0;
  if (!(in >> v)) throw Error(ErrorCode::Io, "agent checkpoint: expected an integer");
  return v;
}

void write_vector(std::ostream& out, const char* tag, const Vector& v) {
  out << tag << ' ' << v.size();
  for (Index i = 0; i < v.size(); ++i) out << ' ' << format_real(v(i));
  out << '\n';
}

Vector read_vector(std::istream& in, const char* tag) {
  expect(in, tag);
  const long n = integer(in);
  if (n < 0) throw Error(ErrorCode::Io, "agent checkpoint: negative vector length");
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = real(in);
  return v;
}

void write_discriminator(std::ostream& out, const char* name, const ratio::Discriminator<double>& d) {
  out << "discriminator " << name << " scale " << format_real(d.logit_scale()) << '\n';
  write_vector(out, "mean", d.normalizer().mean);
  write_vector(out, "std", d.normalizer().scale);
  approx::write_mlp(out, d.net());
}

ratio::Discriminator<double> read_discriminator(std::istream& in, const char* name) {
  expect(in, "discriminator");
  expect(in, name);
  expect(in, "scale");
  const double scale = real(in);
  model::Normalizer<double> norm;
  norm.mean = read_vector(in, "mean");
  norm.scale = read_vector(in, "std");
  return ratio::Discriminator<double>::from_parts(approx::read_mlp(in), std::move(norm), scale,
                                                  ratio::DiscriminatorConfig{}.learning_rate);
}

}  // namespace

void save_agent(const std::string& path, const AgentSnapshot& snap) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write agent checkpoint '" + path + "'");
  const auto& a = snap.actor;
  const auto& clips = snap.discriminators.clips;
  out << "midl-agent " << kAgentVersion << '\n';
  out << "iteration " << snap.iteration << '\n';
  out << "box " << format_real(a.box().lo) << ' ' << format_real(a.box().hi) << '\n';
  out << "log_std " << format_real(a.clamp().lo) << ' ' << format_real(a.clamp().hi) << '\n';
  out << "log_alpha " << format_real(snap.log_alpha) << '\n';
  out << "tau " << format_real(snap.critics.tau) << '\n';
  out << "clips " << format_real(clips.ratio_lo) << ' ' << format_real(clips.ratio_hi) << ' '
      << format_real(clips.g_lo) << ' ' << format_real(clips.g_hi) << '\n';
  out << "discriminator_batch " << snap.discriminators.batch_size << '\n';
  out << "actor\n";
  approx::write_mlp(out, a.net());
  for (int k = 0; k < 2; ++k) {
    out << "critic " << k << '\n';
    approx::write_mlp(out, snap.critics.q[k]);
    out << "target " << k << '\n';
    approx::write_mlp(out, snap.critics.target[k]);
  }
  write_discriminator(out, "sas", snap.discriminators.sas);
  write_discriminator(out, "sa", snap.discriminators.sa);
  if (!out) throw Error(ErrorCode::Io, "failed writing agent checkpoint '" + path + "'");
}

AgentSnapshot load_agent(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read agent checkpoint '" + path + "'");
  expect(in, "midl-agent");
  const long version = integer(in);
  if (version != kAgentVersion) throw Error(ErrorCode::Io, "agent checkpoint: unsupported version " + std::to_string(version));
  AgentSnapshot snap;
  expect(in, "iteration");
  snap.iteration = integer(in);
  expect(in, "box");
  agent::ActionBox box;
  box.lo = real(in);
  box.hi = real(in);
  expect(in, "log_std");
  approx::LogStdClamp clamp;
  clamp.lo = real(in);
  clamp.hi = real(in);
  expect(in, "log_alpha");
  snap.log_alpha = real(in);
  expect(in, "tau");
  snap.critics.tau = real(in);
  expect(in, "clips");
  auto& clips = snap.discriminators.clips;
  clips.ratio_lo = real(in);
  clips.ratio_hi = real(in);
  clips.g_lo = real(in);
  clips.g_hi = real(in);
  expect(in, "discriminator_batch");
  snap.discriminators.batch_size = static_cast<int>(integer(in));
  expect(in, "actor");
  const agent::AgentConfig defaults;
  snap.actor = agent::Actor<double>::from_parts(approx::read_mlp(in), box, clamp, defaults.actor_lr);
  for (int k = 0; k < 2; ++k) {
    expect(in, "critic");
    if (integer(in) != k) throw Error(ErrorCode::Io, "agent checkpoint: critics out of order");
    snap.critics.q[k] = approx::read_mlp(in);
    expect(in, "target");
    if (integer(in) != k) throw Error(ErrorCode::Io, "agent checkpoint: targets out of order");
    snap.critics.target[k] = approx::read_mlp(in);
    snap.critics.opt[k] = approx::Adam<double>(snap.critics.q[k], {defaults.critic_lr});
  }
  snap.discriminators.sas = read_discriminator(in, "sas");
  snap.discriminators.sa = read_discriminator(in, "sa");
  const int s_dim = snap.actor.state_dim(), a_dim = snap.actor.action_dim();
  for (int k = 0; k < 2; ++k) {
    if (snap.critics.q[k].input_dim() != s_dim + a_dim || snap.critics.target[k].input_dim() != s_dim + a_dim) {
      throw Error(ErrorCode::Shape, "agent checkpoint: critic input does not match actor dimensions");
    }
  }
  if (snap.discriminators.sas.input_dim() != 2 * s_dim + a_dim || snap.discriminators.sa.input_dim() != s_dim + a_dim) {
    throw Error(ErrorCode::Shape, "agent checkpoint: discriminator input does not match actor dimensions");
  }
  return snap;
}

}  // namespace midl::harness
