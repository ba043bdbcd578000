#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoctl/compare.hpp"

namespace topoctl {

struct MetaRange {
  double lower;
  double upper;
};

/// Hard bounds on the agent constants tunable by the outer loop.
struct MetaBounds {
  MetaRange grayness_gate{0.10, 0.35};
  MetaRange call_every{3, 15};
  MetaRange penal_ramp_iters{4, 20};
  MetaRange beta_double_every{5, 20};
  MetaRange phase_min_iters_penalization{4, 25};
  MetaRange phase_min_iters_sharpening{4, 25};

  void validate() const;
  bool contains(const AgentConfig& cfg) const;
};

/// Signed changes to agent constants; absent fields are left alone.
struct MetaDelta {
  std::optional<double> grayness_gate;
  std::optional<int> call_every;
  std::optional<int> penal_ramp_iters;
  std::optional<int> beta_double_every;
  std::optional<int> phase_min_iters_penalization;
  std::optional<int> phase_min_iters_sharpening;
  std::string note;

  bool empty() const;
};

/// Plain-text performance digest of one comparison for the meta model:
/// per-controller mean compliance, grayness and wall time, plus the current
/// constants. Controllers appear in order of first occurrence.
std::string digest_summaries(std::span<const RunSummary> summaries, const AgentConfig& cfg);

/// System text of the meta call: constants, bounds and reply format.
std::string meta_system_prompt(const MetaBounds& bounds);

/// Reads the first JSON object of a reply. Keys may appear at the top level
/// or under "delta"; both snake_case and upper-case constant names are
/// accepted. Throws MalformedResponse (no object, non-numeric or
/// non-integer value for an integer constant) or UnknownConstant.
MetaDelta parse_meta_delta(std::string_view text);

/// Adds the delta and clamps each touched constant into its bounds.
AgentConfig apply_delta(const AgentConfig& cfg, const MetaDelta& delta, const MetaBounds& bounds);

struct MetaLoopConfig {
  std::vector<ProblemId> problems{ProblemId::kCantilever, ProblemId::kMbb, ProblemId::kLBracket};
  int iters_per_problem = 5;
  Preset preset = Preset::kFast;
  ProblemOverrides overrides;
  std::vector<ControllerKind> controllers = standard_controllers();
  std::vector<int> seeds{0, 1};
  AgentConfig initial;
  MetaBounds bounds;
  unsigned workers = 0;
  std::string out_dir;  // empty: nothing written
};

struct MetaIteration {
  int index = 0;
  ProblemId problem = ProblemId::kCantilever;
  std::vector<ControllerAggregate> aggregates;
  std::string prompt;
  std::optional<std::string> response;
  std::optional<MetaDelta> delta;
  bool skipped = false;  // no usable delta; config carried over
  std::string skip_reason;
  AgentConfig config_after;
};

struct MetaResult {
  AgentConfig final_config;
  std::vector<AgentConfig> versions;  // one per applied update, in order
  std::vector<MetaIteration> iterations;
  int comparisons = 0;
};

/// Cycles through the problems for `iters_per_problem` rounds. Each outer
/// iteration runs a comparison with the current constants, asks the meta
/// client for a delta and applies it before the next comparison.
MetaResult outer_loop(const MetaLoopConfig& cfg, CompletionClient& meta_client,
                      const ClientFactory& agent_clients);

}  // namespace topoctl
