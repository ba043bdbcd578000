#pragma once

#include <optional>
#include <vector>

#include "topoctl/params.hpp"
#include "topoctl/three_field.hpp"

namespace topoctl {

enum class Phase { kMain, kTail };

/// Metrics of one evaluated iterate.
struct IterationRecord {
  int iteration = 0;  // 0-based within its phase
  Phase phase = Phase::kMain;
  double compliance = 0.0;
  double grayness = 0.0;
  double volume = 0.0;
  double checkerboard = 0.0;
  SolverParams params;
  bool restart = false;  // a restart was applied at the top of this iteration
  bool valid = false;    // passes the snapshot validity gate

  bool operator==(const IterationRecord&) const = default;
};

/// Best valid intermediate design.
struct Snapshot {
  DensityField rho;  // raw design field
  int iteration = 0;
  double compliance = 0.0;
  SolverParams params_at_capture;
  bool valid = false;
};

inline constexpr double kValidityMinP = 3.0;
inline constexpr double kValidityVolumeTolerance = 0.005;

/// Snapshot gate: captured with p >= 3 and physical volume within 0.005 of V_f.
bool snapshot_valid(const SolverParams& params, double volume, double volume_target);

/// Everything a controller may observe about a run in progress.
struct RunState {
  int budget = 0;              // N, main-loop iterations
  double volume_target = 0.4;  // V_f
  int iteration = 0;           // index of the iteration about to execute
  SolverParams params;         // currently committed parameters
  std::vector<IterationRecord> history;  // main-loop iterations so far
  std::optional<Snapshot> best;          // best valid snapshot

  // Best compliance as shown to the agent: best valid if one exists,
  // otherwise best seen so far. Stagnation counts iterations since it
  // last improved.
  std::optional<double> tracked_best;
  int tracked_best_iteration = -1;
  int stagnation = 0;

  std::optional<double> current_compliance() const {
    if (history.empty()) return std::nullopt;
    return history.back().compliance;
  }
  std::optional<double> best_valid_compliance() const {
    if (!best) return std::nullopt;
    return best->compliance;
  }
};

}  // namespace topoctl
