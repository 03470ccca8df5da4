#pragma once

#include "midl/harness/agent_io.hpp"
#include "midl/harness/config.hpp"

#include <string>
#include <vector>

namespace midl::harness {

/// Mean over elites of KL(true next-state law || elite Gaussian) at each
/// (s, a) column of a 1-D toy batch.
VectorX<double> analytic_model_error(const model::GaussianEnsemble<double>& ens, const Matrix& s, const Matrix& a);

/// One row of panel (c).
struct ErrorWeightSample {
  double state, action, next_state, error, g, omega;
};

/// A fresh model batch: s drawn from the dataset, a ~ U(action box), s' from
/// the ensemble. g and omega come from the snapshot's discriminators with m
/// next-state probes per sample.
std::vector<ErrorWeightSample> error_weight_samples(const AgentSnapshot& agent, const model::GaussianEnsemble<double>& ens,
                                                    const core::OfflineDataset& data, Index count, int probes,
                                                    ratio::GMode mode, Rng& rng);

/// Panel (b) row at s = 0.
struct ModelCurvePoint {
  double action, true_mean, true_std, model_mean, epistemic_std, total_std;
};
std::vector<ModelCurvePoint> model_curve(const model::GaussianEnsemble<double>& ens, int points);

/// 1 + 400 evenly spaced actions over the box, inclusive.
Vector action_grid(const agent::ActionBox& box, int points = 401);

/// First maximiser of min_k Q_k(s, a) over the grid.
double greedy_action(const agent::CriticPair<double>& critics, double state, const Vector& grid);

/// Writes dataset.csv, model_curve.csv, error_weight.csv, q_curve.csv and one
/// SVG per CSV into `dir`. Needs dataset.txt, model.txt and agent.txt there.
void emit_diagnostics(const RunConfig& cfg, const std::string& dir);

/// Column headers of the four CSVs, in file order.
extern const std::vector<std::string> kDatasetColumns;
extern const std::vector<std::string> kModelCurveColumns;
extern const std::vector<std::string> kErrorWeightColumns;
extern const std::vector<std::string> kQCurveColumns;

/// Minimal SVG plot: scatter series and polylines on shared axes.
struct SvgSeries {
  std::vector<double> x, y;
  std::string color;
  bool line = false;
};
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series, const std::vector<double>& marker_x = {});

}  // namespace midl::harness
