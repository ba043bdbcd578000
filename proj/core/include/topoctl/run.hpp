#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topoctl/agent.hpp"
#include "topoctl/controllers.hpp"
#include "topoctl/oc.hpp"
#include "topoctl/problems.hpp"
#include "topoctl/run_state.hpp"

namespace topoctl {

struct RunConfig {
  ProblemId problem = ProblemId::kCantilever;
  Preset preset = Preset::kFast;
  ProblemOverrides overrides;
  int seed = 0;
  ControllerKind controller = ControllerKind::kFixed;
  std::optional<bool> tail_enabled;  // default: every kind except fixed
  double perturbation = 0.005;       // relative seed noise on the initial field
  AgentConfig agent;
  OcConfig oc;

  bool tail() const { return tail_enabled.value_or(receives_tail(controller)); }
};

/// Uniform V_f field with multiplicative noise in [-amplitude, +amplitude],
/// passive elements zeroed, then rescaled so the mean over all elements is V_f.
DensityField initialize_design(const Mesh& mesh, double volume_fraction, std::uint64_t seed,
                               double amplitude = 0.005,
                               std::span<const std::uint8_t> passive = {});

/// Filter, projection, FE solve and sensitivities for one design.
struct Evaluation {
  PhysicalFields fields;
  double compliance = 0.0;
  std::vector<double> dc_drho;
  double grayness = 0.0;
  double volume = 0.0;
  double checkerboard = 0.0;
};

/// Owns the per-run solver context: FE system, filter cache, passive mask.
class DesignEvaluator {
 public:
  explicit DesignEvaluator(const ProblemSpec& spec);

  Evaluation evaluate(const DensityField& rho, const SolverParams& params);
  OcResult update(const DensityField& rho, const Evaluation& eval, const SolverParams& params,
                  double volume_target, OcConfig oc);

  const ProblemSpec& spec() const { return spec_; }
  const SolveStats& solve_stats() const { return fe_.stats(); }
  int filter_builds() const { return filters_.builds(); }

 private:
  DesignPipeline pipeline(const SolverParams& params);

  ProblemSpec spec_;
  FeSystem fe_;
  FilterCache filters_;
};

/// Test hook called at the top of each main-loop iteration, after any
/// restart and before evaluation. May modify the design.
using IterationHook = std::function<void(int iteration, DensityField& rho)>;

struct MainLoopResult {
  RunState state;
  DensityField last_rho;             // last evaluated design
  Evaluation last_eval;
  int restart_count = 0;
  bool aborted = false;
  std::string abort_reason;
  SolveStats solve_stats;
  int filter_builds = 0;
};

MainLoopResult run_main_loop(const RunConfig& cfg, const ProblemSpec& spec,
                             Controller& controller, const IterationHook& hook = {});

struct TailResult {
  bool from_uniform = false;
  std::vector<IterationRecord> trace;
  DensityField final_rho;
  Evaluation final_eval;
  SolveStats solve_stats;
  bool aborted = false;
  std::string abort_reason;
};

/// The shared sharpening phase: kTailIterations OC iterations at kTailParams
/// from the snapshot's raw design, or from the uniform V_f field when no
/// valid snapshot exists. Uses a fresh solver context so the result depends
/// only on the starting design.
TailResult apply_tail(const std::optional<Snapshot>& best, const ProblemSpec& spec,
                      const OcConfig& oc);

struct RunSummary {
  RunConfig config;
  Mesh mesh;
  int budget = 0;
  double final_compliance = 0.0;
  double final_grayness = 0.0;
  double final_volume = 0.0;
  std::optional<int> best_iter;  // 1-based main-loop iteration of the best valid snapshot
  std::optional<double> best_compliance;
  double wall_time_s = 0.0;
  int iterations_executed = 0;  // main + tail
  int restart_count = 0;
  int fallback_count = 0;
  int llm_calls = 0;
  bool tail_applied = false;
  bool tail_from_uniform = false;
  int precond_rebuilds = 0;
  int precond_reuses = 0;
  long cg_iterations = 0;
  int filter_builds = 0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<IterationRecord> trace;
  std::string call_log_path;
};

/// Summaries compare equal when everything except wall-clock fields matches.
bool same_outcome(const RunSummary& a, const RunSummary& b);

struct RunResult {
  RunSummary summary;
  DensityField final_rho;
  DensityField final_physical;
  std::vector<CallRecord> calls;
};

RunSummary summarize(const RunConfig& cfg, const MainLoopResult& main,
                     const std::optional<TailResult>& tail, double wall_time_s,
                     int fallback_count, int llm_calls);

/// Complete run: main loop, tail (when enabled) and summary. `client` is
/// required for the LLM agent and ignored otherwise.
RunResult execute_run(const RunConfig& cfg, std::shared_ptr<CompletionClient> client = nullptr,
                      const IterationHook& hook = {});

/// Same, with a caller-provided controller (used for custom test controllers).
RunResult execute_run_with(const RunConfig& cfg, Controller& controller,
                           const IterationHook& hook = {});

}  // namespace topoctl
