#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoctl/clients.hpp"
#include "topoctl/controllers.hpp"

namespace topoctl {

/// Scalar snapshot of the solver state sent to the agent.
struct Observation {
  int iteration = 0;
  double budget_fraction = 0.0;
  int iters_since_best = 0;
  double compliance = 0.0;
  double best_compliance = 0.0;
  double rel_deviation = 0.0;
  double rel_change_1 = 0.0;
  double rel_change_5 = 0.0;
  double objective_slope = 0.0;
  double grayness = 0.0;
  double grayness_slope = 0.0;
  double checkerboard = 0.0;
  double volume_fraction = 0.0;
  int stagnation = 0;
  SolverParams params;
  bool best_snapshot_valid = false;
};

/// Agent constants tunable by the meta loop.
struct AgentConfig {
  double grayness_gate = 0.20;
  int call_every = 5;
  int penal_ramp_iters = 12;
  int beta_double_every = 10;
  int phase_min_iters_penalization = 22;
  int phase_min_iters_sharpening = 16;

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

/// s_G = -|(C_t - C_{t-5}) / C_t| while stagnation < 3, else 0. Uses the
/// oldest available value when fewer than six are present.
double grayness_slope(std::span<const double> compliance_history, int stagnation);

Observation build_observation(const RunState& state);

struct Prompt {
  std::string system_text;
  std::string user_text;
};

Prompt render_prompt(const Observation& obs, const AgentConfig& cfg);

/// Rough token count (4 characters per token).
std::size_t estimate_tokens(std::string_view text);

/// First balanced top-level {...} in `text` that parses as a JSON object.
std::optional<std::string> extract_json_object(std::string_view text);

/// Throws MalformedResponse when no object is found or a numeric field is
/// missing or not a number.
ControllerAction parse_action(std::string_view text);

ControllerAction apply_safety_rails(const ControllerAction& raw, const Observation& obs,
                                    double prev_r_min, bool snapshot_valid,
                                    const AgentConfig& cfg);

/// Deterministic ramp through the advisory stages used when the model is
/// unavailable or answers with something unusable.
ControllerAction fallback_action(int iteration, int budget, const AgentConfig& cfg);

struct CallRecord {
  int seq = 0;
  int iteration = 0;
  std::string prompt_system;
  std::string prompt_user;
  std::optional<std::string> raw_response;  // nullopt when the client failed
  ControllerAction action_pre_rails;
  ControllerAction action_post_rails;
  bool gate_active = false;
  bool fallback_used = false;
  double latency_ms = 0.0;
};

struct AgentDecision {
  ControllerAction action;
  CallRecord record;
};

/// Observation -> prompt -> client -> parse -> rails. Client errors are
/// retried once; any remaining failure falls back. Never throws for
/// client-side problems.
AgentDecision agent_decide(const RunState& state, CompletionClient& client,
                           const AgentConfig& cfg, int seq);

class LlmAgent final : public Controller {
 public:
  LlmAgent(AgentConfig cfg, std::shared_ptr<CompletionClient> client);

  ControllerKind kind() const override { return ControllerKind::kLlmAgent; }
  bool due(int iteration) const override { return iteration % cfg_.call_every == 0; }
  ControllerAction decide(const RunState& state) override;

  const std::vector<CallRecord>& records() const { return records_; }
  int fallback_count() const;
  const AgentConfig& config() const { return cfg_; }

 private:
  AgentConfig cfg_;
  std::shared_ptr<CompletionClient> client_;
  std::vector<CallRecord> records_;
};

// Call-log line format (one JSON object per call).
std::string action_to_json(const ControllerAction& action);
std::string call_record_to_json(const CallRecord& record);
CallRecord call_record_from_json(std::string_view line);
void write_call_log(const std::string& path, std::span<const CallRecord> records);
std::vector<CallRecord> read_call_log(const std::string& path);

}  // namespace topoctl
