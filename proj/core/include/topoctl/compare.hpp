#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topoctl/run.hpp"

namespace topoctl {

/// Supplies the completion client for an LLM-agent run. Called once per run.
using ClientFactory = std::function<std::shared_ptr<CompletionClient>(const RunConfig&)>;

/// The five controllers of the standard comparison.
std::vector<ControllerKind> standard_controllers();

struct CompareConfig {
  ProblemId problem = ProblemId::kCantilever;
  Preset preset = Preset::kFast;
  ProblemOverrides overrides;
  std::vector<ControllerKind> controllers = standard_controllers();
  std::vector<int> seeds{0, 1};
  AgentConfig agent;
  unsigned workers = 0;  // 0: one per hardware thread
  std::string out_dir;   // empty: nothing written
};

struct CellResult {
  ControllerKind controller = ControllerKind::kFixed;
  int seed = 0;
  std::optional<RunSummary> summary;  // absent when the run threw
  std::string error;                  // exception text or abort reason

  bool ok() const { return summary && !summary->aborted; }
};

struct ControllerAggregate {
  ControllerKind controller = ControllerKind::kFixed;
  int runs = 0;
  int failures = 0;
  double mean_compliance = 0.0;
  double std_compliance = 0.0;  // sample standard deviation, 0 for one run
  double mean_grayness = 0.0;
  double std_grayness = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_best_iter = 0.0;
  double mean_restarts = 0.0;
  double mean_fallbacks = 0.0;
  std::optional<double> percent_vs_fixed;  // (mean C - fixed mean C) / fixed mean C * 100
};

struct Comparison {
  CompareConfig config;
  std::vector<CellResult> cells;  // controller-major, seed-minor
  std::vector<ControllerAggregate> aggregates;
};

/// Aggregates over the successful cells, one entry per controller in the
/// order given.
std::vector<ControllerAggregate> aggregate_cells(const std::vector<CellResult>& cells,
                                                 const std::vector<ControllerKind>& order);

/// Runs every (controller, seed) cell on a worker pool. A cell that throws is
/// recorded with its error; the others still complete. With an output
/// directory, each run gets its own subdirectory and the aggregate plus tidy
/// plot data are written at the root.
Comparison run_comparison(const CompareConfig& cfg, const ClientFactory& clients);

std::string comparison_to_json(const Comparison& comparison);

/// Writes summary, trace CSV, call log (when calls exist) and final designs
/// into `dir`, and records the call-log path in the summary.
void write_run_artifacts(const std::string& dir, RunResult& result);

}  // namespace topoctl
