#include "midl/approx/checkpoint.hpp"
#include "midl/model/ensemble.hpp"

#include <charconv>
#include <fstream>

namespace midl::model {

namespace {

constexpr int kEnsembleVersion = 1;

void expect(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) throw Error(ErrorCode::Io, "ensemble checkpoint: expected '" + want + "'");
}

double real(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorCode::Io, "ensemble checkpoint: truncated");
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error(ErrorCode::Io, "ensemble checkpoint: bad real '" + tok + "'");
  return v;
}

int integer(std::istream& in) {
  int v = 0;
  if (!(in >> v)) throw Error(ErrorCode::Io, "ensemble checkpoint: expected an integer");
  return v;
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ' ' << format_real(v(i));
  out << '\n';
}

}  // namespace

void save_ensemble(const std::string& path, const GaussianEnsemble<double>& ens) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write ensemble checkpoint '" + path + "'");
  out << "midl-ensemble " << kEnsembleVersion << '\n';
  out << "dims " << ens.state_dim() << ' ' << ens.action_dim() << '\n';
  out << "clamp " << format_real(ens.clamp().lo) << ' ' << format_real(ens.clamp().hi) << '\n';
  out << "mean";
  write_vector(out, ens.input_normalizer().mean);
  out << "scale";
  write_vector(out, ens.input_normalizer().scale);
  out << "elites " << ens.elites().size();
  for (int e : ens.elites()) out << ' ' << e;
  out << "\nmembers " << ens.size() << '\n';
  for (const auto& m : ens.members()) approx::write_mlp(out, m.net);
  if (!out) throw Error(ErrorCode::Io, "failed writing ensemble checkpoint '" + path + "'");
}

GaussianEnsemble<double> load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read ensemble checkpoint '" + path + "'");
  expect(in, "midl-ensemble");
  const int version = integer(in);
  if (version != kEnsembleVersion) throw Error(ErrorCode::Io, "ensemble checkpoint: unsupported version " + std::to_string(version));
  expect(in, "dims");
  const int s_dim = integer(in), a_dim = integer(in);
  if (s_dim < 1 || a_dim < 1) throw Error(ErrorCode::Io, "ensemble checkpoint: bad dimensions");
  expect(in, "clamp");
  approx::LogStdClamp clamp;
  clamp.lo = real(in);
  clamp.hi = real(in);
  Normalizer<double> norm{Vector(s_dim + a_dim), Vector(s_dim + a_dim)};
  expect(in, "mean");
  for (Index i = 0; i < norm.mean.size(); ++i) norm.mean(i) = real(in);
  expect(in, "scale");
  for (Index i = 0; i < norm.scale.size(); ++i) norm.scale(i) = real(in);
  expect(in, "elites");
  std::vector<int> elites(integer(in));
  for (auto& e : elites) e = integer(in);
  expect(in, "members");
  std::vector<EnsembleMember<double>> members(integer(in));
  for (auto& m : members) m.net = approx::read_mlp(in);
  return GaussianEnsemble<double>::from_parts(s_dim, a_dim, clamp, std::move(members), std::move(norm),
                                              std::move(elites));
}

}  // namespace midl::model
