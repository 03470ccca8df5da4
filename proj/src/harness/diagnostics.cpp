#include "midl/harness/diagnostics.hpp"

#include "midl/harness/pipeline.hpp"
#include "midl/model/rollout.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace midl::harness {

const std::vector<std::string> kDatasetColumns{"state", "action", "reward", "next_state"};
const std::vector<std::string> kModelCurveColumns{"action",     "true_mean",     "true_std",
                                                  "model_mean", "epistemic_std", "total_std"};
const std::vector<std::string> kErrorWeightColumns{"state", "action", "next_state", "error", "g", "omega"};
const std::vector<std::string> kQCurveColumns{"action", "q1", "q2", "q_min", "argmax"};

VectorX<double> analytic_model_error(const model::GaussianEnsemble<double>& ens, const Matrix& s, const Matrix& a) {
  if (s.rows() != 1 || a.rows() != 1 || s.cols() != a.cols()) {
    throw Error(ErrorCode::Shape, "analytic model error needs a 1-D state/action batch");
  }
  Vector err = Vector::Zero(s.cols());
  for (int k : ens.elites()) {
    const auto h = ens.member_head(k, s, a);
    for (Index j = 0; j < s.cols(); ++j) {
      const auto truth = core::toy_mean_sigma(a(0, j));
      err(j) += model::gaussian_kl(truth.mean, truth.sigma, s(0, j) + h.mean(0, j), std::exp(h.log_std(0, j)));
    }
  }
  return err / static_cast<double>(ens.elites().size());
}

std::vector<ErrorWeightSample> error_weight_samples(const AgentSnapshot& agent, const model::GaussianEnsemble<double>& ens,
                                                    const core::OfflineDataset& data, Index count, int probes,
                                                    ratio::GMode mode, Rng& rng) {
  if (count < 1 || data.empty()) throw Error(ErrorCode::Argument, "error/weight batch needs samples and data");
  const agent::ActionBox& box = agent.actor.box();
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_real_distribution<double> act(box.lo, box.hi);
  Matrix s(1, count), a(1, count);
  for (Index j = 0; j < count; ++j) {
    s(0, j) = data[pick(rng)].state(0);
    a(0, j) = act(rng);
  }
  const auto pred = ens.predict(s, a, rng);
  const Matrix probe_states = model::sample_probes(pred, probes, rng);
  const auto& pair = agent.discriminators;
  const auto w = ratio::normalize_weights<double>(ratio::g_from_probes(pair, s, a, probe_states, mode), pair.clips.g_lo);
  const Vector err = analytic_model_error(ens, s, a);
  std::vector<ErrorWeightSample> out(static_cast<std::size_t>(count));
  for (Index j = 0; j < count; ++j) {
    out[static_cast<std::size_t>(j)] = {s(0, j), a(0, j), pred.next_state(0, j), err(j), w.g(j), w.omega(j)};
  }
  return out;
}

std::vector<ModelCurvePoint> model_curve(const model::GaussianEnsemble<double>& ens, int points) {
  if (points < 2) throw Error(ErrorCode::Argument, "model curve needs at least two points");
  const Vector grid = action_grid({}, points);
  const Matrix s = Matrix::Zero(1, points);
  const Matrix a = grid.transpose();
  const auto n = static_cast<double>(ens.elites().size());
  Vector sum_mean = Vector::Zero(points), sum_sq_mean = Vector::Zero(points), sum_var = Vector::Zero(points);
  for (int k : ens.elites()) {
    const auto h = ens.member_head(k, s, a);
    for (int j = 0; j < points; ++j) {
      const double m = h.mean(0, j), sd = std::exp(h.log_std(0, j));
      sum_mean(j) += m;
      sum_sq_mean(j) += m * m;
      sum_var(j) += sd * sd;
    }
  }
  std::vector<ModelCurvePoint> out;
  for (int j = 0; j < points; ++j) {
    const auto truth = core::toy_mean_sigma(grid(j));
    const double mean = sum_mean(j) / n;
    const double epistemic = std::max(0.0, sum_sq_mean(j) / n - mean * mean);
    out.push_back({grid(j), truth.mean, truth.sigma, mean, std::sqrt(epistemic), std::sqrt(epistemic + sum_var(j) / n)});
  }
  return out;
}

Vector action_grid(const agent::ActionBox& box, int points) {
  if (points < 2) throw Error(ErrorCode::Argument, "action grid needs at least two points");
  Vector g(points);
  for (int i = 0; i < points; ++i) g(i) = box.lo + (box.hi - box.lo) * static_cast<double>(i) / (points - 1);
  g(points - 1) = box.hi;
  return g;
}

double greedy_action(const agent::CriticPair<double>& critics, double state, const Vector& grid) {
  const Vector q = agent::q_curve<double>(critics, Vector::Constant(1, state), grid);
  Index best = 0;
  q.maxCoeff(&best);
  return grid(best);
}

namespace {

class Csv {
 public:
  Csv(const std::string& path, const std::vector<std::string>& columns) : out_(path), path_(path) {
    if (!out_) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_real(values[i]);
    out_ << '\n';
  }
  ~Csv() = default;
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::Io, "failed writing '" + path_ + "'");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << body;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series, const std::vector<double>& marker_x) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << escape(y_label) << "</text>\n";
  for (const auto& s : series) {
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
      o << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"1.6\" fill=\"" << s.color
          << "\" fill-opacity=\"0.6\"/>\n";
      }
    }
  }
  for (double m : marker_x) {
    o << "<line x1=\"" << px(m) << "\" x2=\"" << px(m) << "\" y1=\"" << T << "\" y2=\"" << H - B
      << "\" stroke=\"red\" stroke-dasharray=\"4 3\"/>\n";
    o << "<text x=\"" << px(m) + 4 << "\" y=\"" << T + 14 << "\" fill=\"red\">a* = " << fmt(m) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_diagnostics(const RunConfig& cfg, const std::string& dir) {
  for (const char* name : {artifact::kDataset, artifact::kModel, artifact::kAgent}) {
    if (!std::filesystem::exists(join(dir, name))) {
      throw Error(ErrorCode::Io, std::string("missing artifact '") + join(dir, name) + "'");
    }
  }
  const auto data = core::load_dataset(join(dir, artifact::kDataset));
  const auto ens = model::load_ensemble(join(dir, artifact::kModel));
  const auto agent = load_agent(join(dir, artifact::kAgent));
  Rng rng(stage_seed(cfg.seed, Stage::Plot));

  // (a) offline data
  {
    Csv csv(join(dir, "dataset.csv"), kDatasetColumns);
    SvgSeries pts{{}, {}, "steelblue", false};
    for (const auto& t : data.transitions()) {
      csv.row({t.state(0), t.action(0), t.reward, t.next_state(0)});
      pts.x.push_back(t.action(0));
      pts.y.push_back(t.next_state(0));
    }
    csv.close();
    write_text(join(dir, "dataset.svg"), render_svg("Offline dataset", "action", "next state", {pts}));
  }

  // (b) model prediction at s = 0
  {
    Csv csv(join(dir, "model_curve.csv"), kModelCurveColumns);
    SvgSeries truth{{}, {}, "black", true}, mean{{}, {}, "darkorange", true}, lo{{}, {}, "orange", true},
        hi{{}, {}, "orange", true};
    for (const auto& p : model_curve(ens, 201)) {
      csv.row({p.action, p.true_mean, p.true_std, p.model_mean, p.epistemic_std, p.total_std});
      truth.x.push_back(p.action);
      truth.y.push_back(p.true_mean);
      mean.x.push_back(p.action);
      mean.y.push_back(p.model_mean);
      lo.x.push_back(p.action);
      lo.y.push_back(p.model_mean - 2 * p.total_std);
      hi.x.push_back(p.action);
      hi.y.push_back(p.model_mean + 2 * p.total_std);
    }
    csv.close();
    write_text(join(dir, "model_curve.svg"),
               render_svg("Model prediction at s = 0 (mean +/- 2 spread)", "action", "next state", {truth, mean, lo, hi}));
  }

  // (c) per-sample model error against omega
  {
    const auto rows = error_weight_samples(agent, ens, data, 1000, cfg.next_state_samples,
                                           ratio::g_mode_from_name(cfg.weight_mode), rng);
    Csv csv(join(dir, "error_weight.csv"), kErrorWeightColumns);
    SvgSeries pts{{}, {}, "purple", false};
    for (const auto& r : rows) {
      csv.row({r.state, r.action, r.next_state, r.error, r.g, r.omega});
      pts.x.push_back(r.error);
      pts.y.push_back(r.omega);
    }
    csv.close();
    write_text(join(dir, "error_weight.svg"), render_svg("Model error vs omega", "KL(true || model)", "omega", {pts}));
  }

  // (d) Q(0, a)
  {
    const Vector grid = action_grid(agent.actor.box(), 401);
    const Matrix s = Matrix::Zero(1, grid.size());
    const Matrix a = grid.transpose();
    const Vector q1 = agent::q_values(agent.critics.q[0], s, a), q2 = agent::q_values(agent.critics.q[1], s, a);
    const Vector qmin = q1.cwiseMin(q2);
    Index best = 0;
    qmin.maxCoeff(&best);
    Csv csv(join(dir, "q_curve.csv"), kQCurveColumns);
    SvgSeries line{{}, {}, "seagreen", true};
    for (Index i = 0; i < grid.size(); ++i) {
      csv.row({grid(i), q1(i), q2(i), qmin(i), i == best ? 1.0 : 0.0});
      line.x.push_back(grid(i));
      line.y.push_back(qmin(i));
    }
    csv.close();
    write_text(join(dir, "q_curve.svg"), render_svg("Q(s = 0, a)", "action", "min critic", {line}, {grid(best)}));
  }
}

}  // namespace midl::harness
