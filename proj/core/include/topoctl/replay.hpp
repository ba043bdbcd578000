#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topoctl/agent.hpp"
#include "topoctl/run.hpp"

namespace topoctl {

/// Raw responses of a call log keyed by sequence number, for ReplayClient.
std::map<int, std::optional<std::string>> replay_responses(const std::vector<CallRecord>& log);

/// Checks one logged call against the rails: post-rail parameters within the
/// admissible ranges, beta capped while the observed grayness exceeds the
/// gate, r_min not above the previously committed value, no restart without
/// a valid snapshot, and the post-rail action equal to the rails applied to
/// the logged pre-rail action. Returns a description of the first violation.
std::optional<std::string> check_rails(const CallRecord& record, const AgentConfig& cfg);

struct ReplayReport {
  bool passed = false;
  bool rails_ok = true;
  std::string first_divergence;  // empty when the replay matched
  std::vector<std::string> notes;
  int calls_checked = 0;
  RunSummary replayed;
  std::vector<CallRecord> replayed_calls;
};

/// Re-executes the recorded run against its call log and compares the calls,
/// the trace and the summary with the recording.
ReplayReport verify_replay(const RunSummary& recorded, const std::vector<CallRecord>& log);

}  // namespace topoctl
