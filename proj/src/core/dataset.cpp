#include "midl/core/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace midl::core {

OfflineDataset::OfflineDataset(std::vector<Transition> transitions, DatasetMetadata meta)
    : transitions_(std::move(transitions)), meta_(std::move(meta)) {
  meta_.size = transitions_.size();
  for (const auto& t : transitions_) {
    if (t.state.size() != t.next_state.size()) {
      throw Error(ErrorCode::Shape, "transition state and next_state dimensions differ");
    }
    if (t.state.size() != transitions_.front().state.size() ||
        t.action.size() != transitions_.front().action.size()) {
      throw Error(ErrorCode::Shape, "transitions have inconsistent dimensions");
    }
    require_finite(t.reward, "reward in dataset");
  }
}

Index OfflineDataset::state_dim() const { return empty() ? 0 : transitions_.front().state.size(); }
Index OfflineDataset::action_dim() const { return empty() ? 0 : transitions_.front().action.size(); }

namespace {
int bin(double v, double lo, double hi, int bins) {
  const double t = (v - lo) / (hi - lo);
  return std::clamp(static_cast<int>(std::floor(t * bins)), 0, bins - 1);
}
}  // namespace

void OfflineDataset::compute_visit_counts(const VisitGrid& grid) {
  std::map<CellIndex, long> counts;
  for (const auto& t : transitions_) {
    const int si = bin(t.state(0), grid.state_lo, grid.state_hi, grid.state_bins);
    const int ai = bin(t.action(0), grid.action_lo, grid.action_hi, grid.action_bins);
    ++counts[{si, ai}];
  }
  visit_counts_ = std::move(counts);
}

Matrix OfflineDataset::states() const {
  Matrix m(state_dim(), static_cast<Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) m.col(static_cast<Index>(i)) = transitions_[i].state;
  return m;
}

Matrix OfflineDataset::actions() const {
  Matrix m(action_dim(), static_cast<Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) m.col(static_cast<Index>(i)) = transitions_[i].action;
  return m;
}

Vector OfflineDataset::rewards() const {
  Vector v(static_cast<Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v(static_cast<Index>(i)) = transitions_[i].reward;
  return v;
}

Matrix OfflineDataset::next_states() const {
  Matrix m(state_dim(), static_cast<Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) m.col(static_cast<Index>(i)) = transitions_[i].next_state;
  return m;
}

void save_dataset(const OfflineDataset& dataset, const std::string& path) {
  if (dataset.empty()) throw DatasetError("refusing to save an empty dataset", 0);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write dataset " + path);
  out << dataset.state_dim() << ' ' << dataset.action_dim() << '\n';
  std::string line;
  for (const auto& t : dataset.transitions()) {
    line.clear();
    for (Index i = 0; i < t.state.size(); ++i) line += format_real(t.state(i)) + ' ';
    for (Index i = 0; i < t.action.size(); ++i) line += format_real(t.action(i)) + ' ';
    line += format_real(t.reward) + ' ';
    for (Index i = 0; i < t.next_state.size(); ++i) line += format_real(t.next_state(i)) + ' ';
    line += t.terminal ? '1' : '0';
    out << line << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for dataset " + path);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_real(std::string_view tok, std::size_t line_no) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DatasetError("line " + std::to_string(line_no) + ": bad number '" + std::string(tok) + "'", line_no);
  }
  return v;
}

}  // namespace

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read dataset " + path);
  std::string line;
  std::size_t line_no = 0;
  Index s_dim = 0, a_dim = 0;
  bool have_header = false;
  std::vector<Transition> rows;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!have_header) {
      if (fields.size() != 2) {
        throw DatasetError("line " + std::to_string(line_no) + ": header must be 's_dim a_dim'", line_no);
      }
      s_dim = static_cast<Index>(parse_real(fields[0], line_no));
      a_dim = static_cast<Index>(parse_real(fields[1], line_no));
      if (s_dim <= 0 || a_dim <= 0) {
        throw DatasetError("line " + std::to_string(line_no) + ": dimensions must be positive", line_no);
      }
      have_header = true;
      continue;
    }
    const std::size_t expected = static_cast<std::size_t>(2 * s_dim + a_dim + 2);
    if (fields.size() != expected) {
      throw DatasetError("line " + std::to_string(line_no) + " (row " + std::to_string(rows.size()) + "): expected " +
                             std::to_string(expected) + " fields, found " + std::to_string(fields.size()),
                         line_no);
    }
    Transition t;
    t.state.resize(s_dim);
    t.action.resize(a_dim);
    t.next_state.resize(s_dim);
    std::size_t k = 0;
    for (Index i = 0; i < s_dim; ++i) t.state(i) = parse_real(fields[k++], line_no);
    for (Index i = 0; i < a_dim; ++i) t.action(i) = parse_real(fields[k++], line_no);
    t.reward = parse_real(fields[k++], line_no);
    for (Index i = 0; i < s_dim; ++i) t.next_state(i) = parse_real(fields[k++], line_no);
    const auto flag = fields[k];
    if (flag != "0" && flag != "1") {
      throw DatasetError("line " + std::to_string(line_no) + ": terminal flag must be 0 or 1", line_no);
    }
    t.terminal = flag == "1";
    if (!std::isfinite(t.reward)) {
      throw DatasetError("line " + std::to_string(line_no) + ": non-finite reward", line_no);
    }
    rows.push_back(std::move(t));
  }
  if (!have_header) throw DatasetError("empty dataset file " + path, 0);
  if (rows.empty()) throw DatasetError("dataset " + path + " has a header but no transitions", line_no);
  return OfflineDataset(std::move(rows), DatasetMetadata{"loaded:" + path, 0, 0});
}

}  // namespace midl::core
