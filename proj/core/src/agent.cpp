#include "topoctl/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "topoctl/errors.hpp"

namespace topoctl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void AgentConfig::validate() const {
  if (!(grayness_gate > 0.0 && grayness_gate < 1.0)) {
    throw InvalidArgument("grayness_gate must lie in (0, 1)");
  }
  if (call_every < 1 || penal_ramp_iters < 1 || beta_double_every < 1 ||
      phase_min_iters_penalization < 0 || phase_min_iters_sharpening < 0) {
    throw InvalidArgument("agent iteration constants must be positive");
  }
}

double grayness_slope(std::span<const double> c, int stagnation) {
  if (c.size() < 2 || stagnation >= 3) return 0.0;
  const double now = c.back();
  const double then = c[c.size() >= 6 ? c.size() - 6 : 0];
  return -std::abs((now - then) / now);
}

namespace {

double relative_change(std::span<const double> c, std::size_t lag) {
  if (c.size() < 2) return 0.0;
  const double then = c[c.size() > lag ? c.size() - 1 - lag : 0];
  return (c.back() - then) / then;
}

// Least-squares slope of the last (up to) five values, per iteration,
// normalised by the latest value.
double normalized_slope(std::span<const double> c) {
  const std::size_t n = std::min<std::size_t>(5, c.size());
  if (n < 2) return 0.0;
  const auto tail = c.subspan(c.size() - n);
  const double xm = (n - 1) / 2.0;
  double ym = 0.0;
  for (double y : tail) ym += y;
  ym /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (i - xm) * (tail[i] - ym);
    sxx += (i - xm) * (i - xm);
  }
  return sxy / sxx / c.back();
}

}  // namespace

Observation build_observation(const RunState& state) {
  if (state.history.empty()) throw InvalidArgument("observation needs a completed iteration");
  if (state.budget <= 0) throw InvalidArgument("budget must be positive");
  std::vector<double> c;
  c.reserve(state.history.size());
  for (const auto& r : state.history) c.push_back(r.compliance);
  const IterationRecord& last = state.history.back();

  Observation o;
  o.iteration = state.iteration;
  o.budget_fraction = std::clamp(static_cast<double>(state.iteration) / state.budget, 0.0, 1.0);
  const int last_index = last.iteration;
  o.iters_since_best = state.tracked_best_iteration >= 0
                           ? last_index - state.tracked_best_iteration
                           : last_index + 1;
  o.compliance = last.compliance;
  o.best_compliance = state.tracked_best.value_or(last.compliance);
  o.rel_deviation = (o.compliance - o.best_compliance) / o.best_compliance;
  o.rel_change_1 = relative_change(c, 1);
  o.rel_change_5 = relative_change(c, 5);
  o.objective_slope = normalized_slope(c);
  o.grayness = last.grayness;
  o.grayness_slope = grayness_slope(c, state.stagnation);
  o.checkerboard = last.checkerboard;
  o.volume_fraction = last.volume;
  o.stagnation = state.stagnation;
  o.params = state.params;
  o.best_snapshot_valid = state.best.has_value();
  return o;
}

namespace {

// Soft advisory shown to the model; the hard gate lives in the rails only.
constexpr double kAdvisoryBetaLimit = 16.0;
constexpr double kAdvisoryGrayness = 0.20;

std::string system_prompt(const AgentConfig& cfg) {
  std::ostringstream os;
  os << "You steer the continuation parameters of a density-based topology optimization "
        "solver (SIMP compliance minimization with a density filter, Heaviside projection "
        "and optimality-criteria updates). On every call you receive the current solver "
        "state as JSON. Reply with exactly one JSON object and nothing else:\n"
        "{\"p\": float, \"beta\": float, \"rmin\": float, \"move\": float, "
        "\"restart\": bool, \"note\": \"one short line\"}\n\n"
        "Parameters and hard bounds:\n"
        "- p: SIMP penalization exponent, [1.0, 5.0]\n"
        "- beta: Heaviside projection sharpness, [1.0, 64.0]\n"
        "- rmin: filter radius in elements, [1.1, 4.0]; it may only decrease during a run\n"
        "- move: OC move limit, [0.03, 0.40]\n"
        "- restart: reload the best valid snapshot; only honoured when best_snapshot_valid "
        "is true\n\n"
        "Advisory schedule by budget used (a pacing hint, not a rule):\n"
        "stage        budget    p        beta   rmin  move\n";
  const char* names[4] = {"exploration ", "penalization", "sharpening  ", "converge    "};
  for (const auto& s : kAdvisoryStages) {
    os << s.index << " " << names[s.index - 1] << " " << static_cast<int>(s.budget_begin * 100)
       << "-" << static_cast<int>(s.budget_end * 100) << "%   ";
    if (s.p_begin == s.p_end) {
      os << s.p_begin << "      ";
    } else {
      os << s.p_begin << "-" << s.p_end;
    }
    os << "  " << s.beta_begin;
    if (s.beta_begin != s.beta_end) os << "-" << s.beta_end;
    os << "  " << s.r_min << "  " << s.move << "\n";
  }
  os << "\nBeta timing:\n"
        "- keep beta <= 4 before 50% of the budget\n"
        "- stay at least "
     << cfg.phase_min_iters_penalization
     << " iterations in penalization before raising beta above 4\n"
        "- between 50% and 75% raise beta through 8 to 16, spending at least "
     << cfg.phase_min_iters_sharpening
     << " iterations there\n"
        "- use beta 32 in the last quarter\n\n"
        "When not to raise beta:\n"
        "- keep beta < "
     << kAdvisoryBetaLimit << " while grayness > " << kAdvisoryGrayness
     << "\n"
        "- if grayness_slope is near zero and grayness is high, raise p first\n"
        "- request restart only after a compliance spike well above best_compliance\n";
  return os.str();
}

std::string user_prompt(const Observation& o) {
  ordered_json j;
  j["iteration"] = o.iteration;
  j["budget_fraction"] = o.budget_fraction;
  j["iters_since_best"] = o.iters_since_best;
  j["compliance"] = o.compliance;
  j["best_compliance"] = o.best_compliance;
  j["rel_deviation"] = o.rel_deviation;
  j["rel_change_1"] = o.rel_change_1;
  j["rel_change_5"] = o.rel_change_5;
  j["objective_slope"] = o.objective_slope;
  j["grayness"] = o.grayness;
  j["grayness_slope"] = o.grayness_slope;
  j["checkerboard"] = o.checkerboard;
  j["volume_fraction"] = o.volume_fraction;
  j["stagnation_counter"] = o.stagnation;
  j["p"] = o.params.p;
  j["beta"] = o.params.beta;
  j["rmin"] = o.params.r_min;
  j["move"] = o.params.move;
  j["best_snapshot_valid"] = o.best_snapshot_valid;
  return "Current solver state:\n" + j.dump(2) + "\nRespond with the JSON action.";
}

}  // namespace

Prompt render_prompt(const Observation& obs, const AgentConfig& cfg) {
  return {system_prompt(cfg), user_prompt(obs)};
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::optional<std::string> extract_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char ch = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (ch == '\\') {
          escaped = true;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '{') {
        ++depth;
      } else if (ch == '}' && --depth == 0) {
        std::string candidate(text.substr(start, i - start + 1));
        if (json::accept(candidate) && json::parse(candidate).is_object()) return candidate;
        break;
      }
    }
  }
  return std::nullopt;
}

ControllerAction parse_action(std::string_view text) {
  const auto object = extract_json_object(text);
  if (!object) throw MalformedResponse("no JSON object in response");
  const json j = json::parse(*object);

  auto number = [&](std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
      const auto it = j.find(key);
      if (it == j.end()) continue;
      if (!it->is_number()) {
        throw MalformedResponse(std::string("field '") + key + "' is not a number");
      }
      return it->get<double>();
    }
    throw MalformedResponse(std::string("missing field '") + *keys.begin() + "'");
  };

  ControllerAction a;
  a.params.p = number({"p"});
  a.params.beta = number({"beta"});
  a.params.r_min = number({"rmin", "r_min"});
  a.params.move = number({"move"});
  if (const auto it = j.find("restart"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw MalformedResponse("field 'restart' is not a boolean");
    a.restart = it->get<bool>();
  }
  if (const auto it = j.find("note"); it != j.end() && it->is_string()) {
    a.note = it->get<std::string>();
  }
  return a;
}

ControllerAction apply_safety_rails(const ControllerAction& raw, const Observation& obs,
                                    double prev_r_min, bool snapshot_valid,
                                    const AgentConfig& cfg) {
  ControllerAction a = raw;
  a.params = clamp_to_bounds(raw.params);
  if (obs.grayness > cfg.grayness_gate) {
    a.params.beta = std::min(a.params.beta, bounds::kGatedBetaCap);
  }
  a.params.r_min = std::min(a.params.r_min, prev_r_min);
  if (!snapshot_valid) a.restart = false;
  return a;
}

ControllerAction fallback_action(int t, int n, const AgentConfig& cfg) {
  if (n <= 0) throw InvalidArgument("budget must be positive");
  const int stage2 = (8 * n + 99) / 100;
  const int stage3 = std::min(n, std::max((n + 1) / 2, stage2 + cfg.phase_min_iters_penalization));
  const int stage4 = std::min(n, std::max((3 * n + 3) / 4, stage3 + cfg.phase_min_iters_sharpening));

  ControllerAction a;
  a.note = "fallback";
  if (t < stage2) {
    a.params = {1.0 + static_cast<double>(t) / stage2, 1.0, 1.50, 0.20};
  } else if (t < stage3) {
    const double ramp = std::min(1.0, static_cast<double>(t - stage2) / cfg.penal_ramp_iters);
    const int doublings = (t - stage2) / cfg.beta_double_every;
    a.params = {2.0 + 2.5 * ramp, std::min(4.0, std::ldexp(1.0, std::min(doublings, 6))), 1.35,
                0.15};
  } else if (t < stage4) {
    const int doublings = (t - stage3) / cfg.beta_double_every;
    a.params = {4.5, std::min(16.0, std::ldexp(4.0, std::min(doublings, 6))), 1.25, 0.08};
  } else {
    a.params = {4.5, 32.0, 1.20, 0.05};
  }
  return a;
}

AgentDecision agent_decide(const RunState& state, CompletionClient& client,
                           const AgentConfig& cfg, int seq) {
  const Observation obs = build_observation(state);
  const Prompt prompt = render_prompt(obs, cfg);

  AgentDecision d;
  CallRecord& rec = d.record;
  rec.seq = seq;
  rec.iteration = state.iteration;
  rec.prompt_system = prompt.system_text;
  rec.prompt_user = prompt.user_text;
  rec.gate_active = obs.grayness > cfg.grayness_gate;

  std::string failure;
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt < 2 && !rec.raw_response; ++attempt) {
    try {
      rec.raw_response =
          client.complete({prompt.system_text, prompt.user_text, 200, seq, attempt});
    } catch (const std::exception& e) {
      failure = e.what();
    }
  }
  rec.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (rec.raw_response) {
    try {
      rec.action_pre_rails = parse_action(*rec.raw_response);
    } catch (const MalformedResponse& e) {
      failure = std::string("malformed response: ") + e.what();
      rec.fallback_used = true;
    }
  } else {
    failure = "client error: " + failure;
    rec.fallback_used = true;
  }
  if (rec.fallback_used) {
    rec.action_pre_rails = fallback_action(state.iteration, state.budget, cfg);
    rec.action_pre_rails.note = "fallback (" + failure + ")";
  }
  rec.action_post_rails =
      apply_safety_rails(rec.action_pre_rails, obs, state.params.r_min, state.best.has_value(), cfg);
  d.action = rec.action_post_rails;
  return d;
}

LlmAgent::LlmAgent(AgentConfig cfg, std::shared_ptr<CompletionClient> client)
    : cfg_(cfg), client_(std::move(client)) {
  cfg_.validate();
  if (!client_) throw InvalidArgument("LLM agent needs a completion client");
}

ControllerAction LlmAgent::decide(const RunState& state) {
  if (state.history.empty()) {
    // Nothing to observe yet: open with the first stage of the ramp.
    ControllerAction a = fallback_action(state.iteration, state.budget, cfg_);
    a.params = clamp_to_bounds(a.params);
    a.params.r_min = std::min(a.params.r_min, state.params.r_min);
    a.restart = false;
    a.note = "initial";
    return a;
  }
  AgentDecision d = agent_decide(state, *client_, cfg_, static_cast<int>(records_.size()));
  records_.push_back(std::move(d.record));
  return d.action;
}

int LlmAgent::fallback_count() const {
  return static_cast<int>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.fallback_used; }));
}

namespace {

ordered_json action_json(const ControllerAction& a) {
  ordered_json j;
  j["p"] = a.params.p;
  j["beta"] = a.params.beta;
  j["rmin"] = a.params.r_min;
  j["move"] = a.params.move;
  j["restart"] = a.restart;
  j["note"] = a.note;
  return j;
}

ControllerAction action_from(const json& j) {
  ControllerAction a;
  a.params.p = j.at("p").get<double>();
  a.params.beta = j.at("beta").get<double>();
  a.params.r_min = j.at("rmin").get<double>();
  a.params.move = j.at("move").get<double>();
  a.restart = j.at("restart").get<bool>();
  a.note = j.value("note", "");
  return a;
}

}  // namespace

std::string action_to_json(const ControllerAction& action) { return action_json(action).dump(); }

std::string call_record_to_json(const CallRecord& r) {
  ordered_json j;
  j["seq"] = r.seq;
  j["iteration"] = r.iteration;
  j["prompt_system"] = r.prompt_system;
  j["prompt_user"] = r.prompt_user;
  j["raw_response"] = r.raw_response ? ordered_json(*r.raw_response) : ordered_json(nullptr);
  j["action_pre_rails"] = action_json(r.action_pre_rails);
  j["action_post_rails"] = action_json(r.action_post_rails);
  j["gate_active"] = r.gate_active;
  j["fallback_used"] = r.fallback_used;
  j["latency_ms"] = r.latency_ms;
  return j.dump();
}

CallRecord call_record_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    CallRecord r;
    r.seq = j.at("seq").get<int>();
    r.iteration = j.at("iteration").get<int>();
    r.prompt_system = j.at("prompt_system").get<std::string>();
    r.prompt_user = j.at("prompt_user").get<std::string>();
    if (!j.at("raw_response").is_null()) r.raw_response = j.at("raw_response").get<std::string>();
    r.action_pre_rails = action_from(j.at("action_pre_rails"));
    r.action_post_rails = action_from(j.at("action_post_rails"));
    r.gate_active = j.at("gate_active").get<bool>();
    r.fallback_used = j.at("fallback_used").get<bool>();
    r.latency_ms = j.at("latency_ms").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad call record: ") + e.what());
  }
}

void write_call_log(const std::string& path, std::span<const CallRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write call log " + path);
  for (const auto& r : records) out << call_record_to_json(r) << '\n';
}

std::vector<CallRecord> read_call_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read call log " + path);
  std::vector<CallRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(call_record_from_json(line));
  }
  return out;
}

}  // namespace topoctl
