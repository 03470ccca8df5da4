#pragma once

#include "midl/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace midl::core {

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Uniform grid over a box in (state, action) space, used to turn continuous
/// samples into |D(s,a)| visit counts.
struct VisitGrid {
  double state_lo = 0.0, state_hi = 1.0;
  double action_lo = -1.0, action_hi = 1.0;
  int state_bins = 20;
  int action_bins = 20;
};

using CellIndex = std::pair<int, int>;

struct DatasetMetadata {
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t size = 0;

  bool operator==(const DatasetMetadata&) const = default;
};

class OfflineDataset {
 public:
  OfflineDataset() = default;
  OfflineDataset(std::vector<Transition> transitions, DatasetMetadata meta = {});

  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  Index state_dim() const;
  Index action_dim() const;

  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& operator[](std::size_t i) const { return transitions_[i]; }
  const DatasetMetadata& metadata() const { return meta_; }

  const std::optional<std::map<CellIndex, long>>& visit_counts() const { return visit_counts_; }
  /// Bins the first state and action coordinates on `grid`. Samples outside
  /// the box land in the nearest edge cell so counts always sum to size().
  void compute_visit_counts(const VisitGrid& grid);

  /// Column-stacked views: states (s_dim x N), actions, rewards (N), next states.
  Matrix states() const;
  Matrix actions() const;
  Vector rewards() const;
  Matrix next_states() const;

 private:
  std::vector<Transition> transitions_;
  DatasetMetadata meta_;
  std::optional<std::map<CellIndex, long>> visit_counts_;
};

class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : Error(ErrorCode::Dataset, what), line_(line) {}
  /// 1-based line number in the file, 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void save_dataset(const OfflineDataset& dataset, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

}  // namespace midl::core
