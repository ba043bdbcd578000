#include "topoctl/replay.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "topoctl/clients.hpp"

namespace topoctl {

using json = nlohmann::json;

namespace {

std::string describe(const SolverParams& p) {
  std::ostringstream s;
  s << "(p " << p.p << ", beta " << p.beta << ", rmin " << p.r_min << ", move " << p.move << ")";
  return s.str();
}

bool same_decision(const ControllerAction& a, const ControllerAction& b) {
  return a.params == b.params && a.restart == b.restart;
}

std::string phase_name(Phase p) { return p == Phase::kTail ? "tail" : "main"; }

std::optional<std::string> compare_records(const IterationRecord& a, const IterationRecord& b) {
  std::ostringstream s;
  s << std::setprecision(17);
  if (a.phase != b.phase || a.iteration != b.iteration) {
    s << "record order differs (" << phase_name(a.phase) << ' ' << a.iteration << " vs "
      << phase_name(b.phase) << ' ' << b.iteration << ")";
  } else if (a.params != b.params) {
    s << "parameters " << describe(a.params) << " recorded, " << describe(b.params) << " replayed";
  } else if (a.compliance != b.compliance) {
    s << "compliance " << a.compliance << " recorded, " << b.compliance << " replayed";
  } else if (a.grayness != b.grayness) {
    s << "grayness " << a.grayness << " recorded, " << b.grayness << " replayed";
  } else if (a.volume != b.volume) {
    s << "volume " << a.volume << " recorded, " << b.volume << " replayed";
  } else if (!(a == b)) {
    s << "restart/validity flags differ";
  } else {
    return std::nullopt;
  }
  return s.str();
}

}  // namespace

std::map<int, std::optional<std::string>> replay_responses(const std::vector<CallRecord>& log) {
  std::map<int, std::optional<std::string>> out;
  for (const auto& r : log) out[r.seq] = r.raw_response;
  return out;
}

std::optional<std::string> check_rails(const CallRecord& r, const AgentConfig& cfg) {
  const auto object = extract_json_object(r.prompt_user);
  if (!object) return "call " + std::to_string(r.seq) + ": prompt carries no observation";
  double gray = 0.0;
  double prev_rmin = 0.0;
  bool valid = false;
  try {
    const json obs = json::parse(*object);
    gray = obs.at("grayness").get<double>();
    prev_rmin = obs.at("rmin").get<double>();
    valid = obs.at("best_snapshot_valid").get<bool>();
  } catch (const json::exception& e) {
    return "call " + std::to_string(r.seq) + ": unreadable observation (" + e.what() + ")";
  }
  const std::string where = "call " + std::to_string(r.seq) + " (iteration " +
                            std::to_string(r.iteration) + "): ";
  const SolverParams& p = r.action_post_rails.params;
  if (!within_bounds(p)) return where + "post-rail parameters out of range " + describe(p);
  if (gray > cfg.grayness_gate && p.beta > bounds::kGatedBetaCap) {
    return where + "beta above the gate cap while grayness exceeds the gate";
  }
  if (p.r_min > prev_rmin) return where + "r_min increased";
  if (r.action_post_rails.restart && !valid) return where + "restart without a valid snapshot";
  Observation o;
  o.grayness = gray;
  const ControllerAction again = apply_safety_rails(r.action_pre_rails, o, prev_rmin, valid, cfg);
  if (!same_decision(again, r.action_post_rails)) {
    return where + "post-rail action differs from the rails applied to the pre-rail action";
  }
  if (!same_decision(apply_safety_rails(again, o, prev_rmin, valid, cfg), again)) {
    return where + "rails are not idempotent";
  }
  return std::nullopt;
}

ReplayReport verify_replay(const RunSummary& recorded, const std::vector<CallRecord>& log) {
  ReplayReport rep;
  const AgentConfig& cfg = recorded.config.agent;
  for (const auto& r : log) {
    if (auto bad = check_rails(r, cfg)) {
      rep.rails_ok = false;
      rep.notes.push_back("rails: " + *bad);
    }
  }

  auto client = std::make_shared<ReplayClient>(replay_responses(log));
  RunResult rerun = execute_run(recorded.config, client);
  rep.replayed = rerun.summary;
  rep.replayed_calls = rerun.calls;
  for (const auto& r : rerun.calls) {
    if (auto bad = check_rails(r, cfg)) {
      rep.rails_ok = false;
      rep.notes.push_back("rails (replayed): " + *bad);
    }
  }

  auto diverge = [&](std::string what) {
    if (rep.first_divergence.empty()) rep.first_divergence = std::move(what);
  };

  const std::size_t n = std::min(log.size(), rerun.calls.size());
  for (std::size_t i = 0; i < n && rep.first_divergence.empty(); ++i) {
    const CallRecord& a = log[i];
    const CallRecord& b = rerun.calls[i];
    ++rep.calls_checked;
    const std::string where =
        "call " + std::to_string(a.seq) + " (iteration " + std::to_string(a.iteration) + "): ";
    if (a.seq != b.seq || a.iteration != b.iteration) {
      diverge(where + "replayed call " + std::to_string(b.seq) + " at iteration " +
              std::to_string(b.iteration));
    } else if (a.prompt_user != b.prompt_user || a.prompt_system != b.prompt_system) {
      diverge(where + "prompt differs");
    } else if (a.fallback_used != b.fallback_used) {
      diverge(where + (b.fallback_used ? "replay fell back" : "recording fell back"));
    } else if (!same_decision(a.action_pre_rails, b.action_pre_rails)) {
      diverge(where + "pre-rail action " + describe(a.action_pre_rails.params) + " recorded, " +
              describe(b.action_pre_rails.params) + " replayed");
    } else if (!same_decision(a.action_post_rails, b.action_post_rails)) {
      diverge(where + "post-rail action " + describe(a.action_post_rails.params) + " recorded, " +
              describe(b.action_post_rails.params) + " replayed");
    } else if (a.gate_active != b.gate_active) {
      diverge(where + "gate state differs");
    }
  }
  if (rep.first_divergence.empty() && log.size() != rerun.calls.size()) {
    diverge("call count: " + std::to_string(log.size()) + " recorded, " +
            std::to_string(rerun.calls.size()) + " replayed");
  }

  const auto& ta = recorded.trace;
  const auto& tb = rerun.summary.trace;
  for (std::size_t i = 0; i < std::min(ta.size(), tb.size()); ++i) {
    if (auto d = compare_records(ta[i], tb[i])) {
      diverge("trace " + phase_name(ta[i].phase) + " iteration " + std::to_string(ta[i].iteration) +
              ": " + *d);
      break;
    }
  }
  if (ta.size() != tb.size()) {
    diverge("trace length: " + std::to_string(ta.size()) + " recorded, " +
            std::to_string(tb.size()) + " replayed");
  }
  if (!same_outcome(recorded, rerun.summary)) diverge("summary fields differ");

  if (!rerun.calls.empty() && rerun.summary.fallback_count == static_cast<int>(rerun.calls.size())) {
    rep.notes.push_back("every replayed call fell back (" + std::to_string(rerun.calls.size()) +
                        " calls)");
  }
  rep.passed = rep.rails_ok && rep.first_divergence.empty();
  return rep;
}

}  // namespace topoctl
