#include "topoctl/meta.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "topoctl/errors.hpp"
#include "topoctl/io.hpp"

namespace topoctl {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

bool within(const MetaRange& r, double v) { return v >= r.lower && v <= r.upper; }

enum class Key { kGate, kCallEvery, kPenalRamp, kBetaDouble, kPhasePen, kPhaseSharp };

const std::map<std::string, Key, std::less<>>& key_names() {
  static const std::map<std::string, Key, std::less<>> names = {
      {"grayness_gate", Key::kGate},
      {"gate", Key::kGate},
      {"GRAYNESS_GATE", Key::kGate},
      {"call_every", Key::kCallEvery},
      {"CALL_EVERY", Key::kCallEvery},
      {"penal_ramp_iters", Key::kPenalRamp},
      {"penal_ramp", Key::kPenalRamp},
      {"PENAL_RAMP_ITERS", Key::kPenalRamp},
      {"beta_double_every", Key::kBetaDouble},
      {"beta_double", Key::kBetaDouble},
      {"BETA_DOUBLE_EVERY", Key::kBetaDouble},
      {"phase_min_iters_penalization", Key::kPhasePen},
      {"phase_min_penalization", Key::kPhasePen},
      {"PHASE_MIN_ITERS.penalization", Key::kPhasePen},
      {"phase_min_iters_sharpening", Key::kPhaseSharp},
      {"phase_min_sharpening", Key::kPhaseSharp},
      {"PHASE_MIN_ITERS.sharpening", Key::kPhaseSharp},
  };
  return names;
}

int integer_delta(const json& v, const std::string& key) {
  if (!v.is_number()) throw MalformedResponse("delta for " + key + " is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || d != std::floor(d) || std::abs(d) > 1e6) {
    throw MalformedResponse("delta for " + key + " must be an integer");
  }
  return static_cast<int>(d);
}

int clamp_int(int v, const MetaRange& r) {
  return std::clamp(v, static_cast<int>(std::ceil(r.lower)), static_cast<int>(std::floor(r.upper)));
}

std::string num(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

void MetaBounds::validate() const {
  for (const MetaRange* r : {&grayness_gate, &call_every, &penal_ramp_iters, &beta_double_every,
                             &phase_min_iters_penalization, &phase_min_iters_sharpening}) {
    if (!(r->lower < r->upper)) throw InvalidArgument("meta bound with lower >= upper");
  }
}

bool MetaBounds::contains(const AgentConfig& c) const {
  return within(grayness_gate, c.grayness_gate) && within(call_every, c.call_every) &&
         within(penal_ramp_iters, c.penal_ramp_iters) &&
         within(beta_double_every, c.beta_double_every) &&
         within(phase_min_iters_penalization, c.phase_min_iters_penalization) &&
         within(phase_min_iters_sharpening, c.phase_min_iters_sharpening);
}

bool MetaDelta::empty() const {
  return !grayness_gate && !call_every && !penal_ramp_iters && !beta_double_every &&
         !phase_min_iters_penalization && !phase_min_iters_sharpening;
}

std::string digest_summaries(std::span<const RunSummary> summaries, const AgentConfig& cfg) {
  std::vector<ControllerKind> order;
  for (const auto& s : summaries) {
    if (std::find(order.begin(), order.end(), s.config.controller) == order.end()) {
      order.push_back(s.config.controller);
    }
  }
  std::ostringstream out;
  if (!summaries.empty()) {
    const RunConfig& c = summaries.front().config;
    out << "Problem: " << to_string(c.problem) << " (" << to_string(c.preset) << ", "
        << summaries.front().mesh.nx << "x" << summaries.front().mesh.ny;
    if (summaries.front().mesh.nz > 0) out << "x" << summaries.front().mesh.nz;
    out << ", N = " << summaries.front().budget << ")\n";
  }
  out << "Controller results (means over seeds):\n";
  for (ControllerKind kind : order) {
    double c = 0.0, g = 0.0, t = 0.0;
    int n = 0;
    int failed = 0;
    for (const auto& s : summaries) {
      if (s.config.controller != kind) continue;
      if (s.aborted) {
        ++failed;
        continue;
      }
      c += s.final_compliance;
      g += s.final_grayness;
      t += s.wall_time_s;
      ++n;
    }
    out << "- " << to_string(kind) << ": ";
    if (n == 0) {
      out << "all runs failed\n";
      continue;
    }
    out << "compliance " << num(c / n) << ", grayness " << num(g / n) << ", wall time "
        << num(t / n, 3) << " s, runs " << n;
    if (failed) out << ", failed " << failed;
    out << '\n';
  }
  out << "Current agent constants:\n"
      << "grayness_gate = " << num(cfg.grayness_gate) << '\n'
      << "call_every = " << cfg.call_every << '\n'
      << "penal_ramp_iters = " << cfg.penal_ramp_iters << '\n'
      << "beta_double_every = " << cfg.beta_double_every << '\n'
      << "phase_min_iters_penalization = " << cfg.phase_min_iters_penalization << '\n'
      << "phase_min_iters_sharpening = " << cfg.phase_min_iters_sharpening << '\n';
  return out.str();
}

std::string meta_system_prompt(const MetaBounds& b) {
  std::ostringstream out;
  out << "You tune the constants of an agent that steers a topology optimization solver.\n"
         "You receive the results of a comparison between the agent (llm_agent) and baseline\n"
         "controllers. Lower compliance is better; grayness should reach 0.\n"
         "Propose signed changes to the constants. Reply with one JSON object, e.g.\n"
         "{\"delta\": {\"grayness_gate\": 0.02, \"call_every\": -1}, \"note\": \"...\"}\n"
         "Omit constants you do not want to change. Integer constants take integer changes.\n"
         "Bounds:\n";
  auto row = [&](const char* name, const MetaRange& r) {
    out << name << " in [" << num(r.lower) << ", " << num(r.upper) << "]\n";
  };
  row("grayness_gate", b.grayness_gate);
  row("call_every", b.call_every);
  row("penal_ramp_iters", b.penal_ramp_iters);
  row("beta_double_every", b.beta_double_every);
  row("phase_min_iters_penalization", b.phase_min_iters_penalization);
  row("phase_min_iters_sharpening", b.phase_min_iters_sharpening);
  return out.str();
}

MetaDelta parse_meta_delta(std::string_view text) {
  const auto object = extract_json_object(text);
  if (!object) throw MalformedResponse("no JSON object in meta response");
  const json j = json::parse(*object);
  const json* body = &j;
  MetaDelta d;
  if (j.contains("note") && j.at("note").is_string()) d.note = j.at("note");
  if (j.contains("delta")) {
    if (!j.at("delta").is_object()) throw MalformedResponse("\"delta\" is not an object");
    body = &j.at("delta");
    if (body->contains("note") && body->at("note").is_string()) d.note = body->at("note");
  }
  for (const auto& [key, value] : body->items()) {
    if (key == "note" || (body == &j && key == "delta")) continue;
    const auto it = key_names().find(key);
    if (it == key_names().end()) throw UnknownConstant("unknown constant '" + key + "'");
    switch (it->second) {
      case Key::kGate:
        if (!value.is_number() || !std::isfinite(value.get<double>())) {
          throw MalformedResponse("delta for " + key + " is not a number");
        }
        d.grayness_gate = value.get<double>();
        break;
      case Key::kCallEvery:
        d.call_every = integer_delta(value, key);
        break;
      case Key::kPenalRamp:
        d.penal_ramp_iters = integer_delta(value, key);
        break;
      case Key::kBetaDouble:
        d.beta_double_every = integer_delta(value, key);
        break;
      case Key::kPhasePen:
        d.phase_min_iters_penalization = integer_delta(value, key);
        break;
      case Key::kPhaseSharp:
        d.phase_min_iters_sharpening = integer_delta(value, key);
        break;
    }
  }
  return d;
}

AgentConfig apply_delta(const AgentConfig& cfg, const MetaDelta& d, const MetaBounds& b) {
  b.validate();
  AgentConfig out = cfg;
  if (d.grayness_gate) {
    out.grayness_gate = std::clamp(cfg.grayness_gate + *d.grayness_gate, b.grayness_gate.lower,
                                   b.grayness_gate.upper);
  }
  if (d.call_every) out.call_every = clamp_int(cfg.call_every + *d.call_every, b.call_every);
  if (d.penal_ramp_iters) {
    out.penal_ramp_iters = clamp_int(cfg.penal_ramp_iters + *d.penal_ramp_iters, b.penal_ramp_iters);
  }
  if (d.beta_double_every) {
    out.beta_double_every =
        clamp_int(cfg.beta_double_every + *d.beta_double_every, b.beta_double_every);
  }
  if (d.phase_min_iters_penalization) {
    out.phase_min_iters_penalization =
        clamp_int(cfg.phase_min_iters_penalization + *d.phase_min_iters_penalization,
                  b.phase_min_iters_penalization);
  }
  if (d.phase_min_iters_sharpening) {
    out.phase_min_iters_sharpening =
        clamp_int(cfg.phase_min_iters_sharpening + *d.phase_min_iters_sharpening,
                  b.phase_min_iters_sharpening);
  }
  return out;
}

namespace {

ordered_json delta_json(const MetaDelta& d) {
  ordered_json j = ordered_json::object();
  if (d.grayness_gate) j["grayness_gate"] = *d.grayness_gate;
  if (d.call_every) j["call_every"] = *d.call_every;
  if (d.penal_ramp_iters) j["penal_ramp_iters"] = *d.penal_ramp_iters;
  if (d.beta_double_every) j["beta_double_every"] = *d.beta_double_every;
  if (d.phase_min_iters_penalization) j["phase_min_iters_penalization"] = *d.phase_min_iters_penalization;
  if (d.phase_min_iters_sharpening) j["phase_min_iters_sharpening"] = *d.phase_min_iters_sharpening;
  return j;
}

}  // namespace

MetaResult outer_loop(const MetaLoopConfig& cfg, CompletionClient& meta_client,
                      const ClientFactory& agent_clients) {
  if (cfg.problems.empty()) throw InvalidArgument("meta loop needs at least one problem");
  if (cfg.iters_per_problem < 0) throw InvalidArgument("iterations per problem must be >= 0");
  cfg.bounds.validate();
  cfg.initial.validate();

  MetaResult result;
  AgentConfig current = cfg.initial;
  const std::string system = meta_system_prompt(cfg.bounds);
  std::string log;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_agent_config((fs::path(cfg.out_dir) / "agent_v0.cfg").string(), current, 0);
  }

  int index = 0;
  for (int round = 0; round < cfg.iters_per_problem; ++round) {
    for (ProblemId problem : cfg.problems) {
      MetaIteration it;
      it.index = index;
      it.problem = problem;

      CompareConfig cc;
      cc.problem = problem;
      cc.preset = cfg.preset;
      cc.overrides = cfg.overrides;
      cc.controllers = cfg.controllers;
      cc.seeds = cfg.seeds;
      cc.agent = current;
      cc.workers = cfg.workers;
      if (!cfg.out_dir.empty()) {
        cc.out_dir = (fs::path(cfg.out_dir) /
                      ("iter" + std::to_string(index) + "_" + std::string(to_string(problem))))
                         .string();
      }
      const Comparison cmp = run_comparison(cc, agent_clients);
      ++result.comparisons;
      it.aggregates = cmp.aggregates;

      std::vector<RunSummary> summaries;
      for (const auto& cell : cmp.cells) {
        if (cell.summary) summaries.push_back(*cell.summary);
      }
      it.prompt = digest_summaries(summaries, current);

      try {
        CompletionRequest req{system, it.prompt, 200, index, 0};
        it.response = meta_client.complete(req);
        it.delta = parse_meta_delta(*it.response);
        current = apply_delta(current, *it.delta, cfg.bounds);
        result.versions.push_back(current);
        if (!cfg.out_dir.empty()) {
          const int v = static_cast<int>(result.versions.size());
          write_agent_config(
              (fs::path(cfg.out_dir) / ("agent_v" + std::to_string(v) + ".cfg")).string(), current, v);
        }
      } catch (const std::exception& e) {
        it.delta.reset();
        it.skipped = true;
        it.skip_reason = e.what();
      }
      it.config_after = current;

      ordered_json entry;
      entry["iteration"] = index;
      entry["problem"] = std::string(to_string(problem));
      entry["response"] = it.response ? ordered_json(*it.response) : ordered_json(nullptr);
      entry["delta"] = it.delta ? delta_json(*it.delta) : ordered_json(nullptr);
      entry["skipped"] = it.skipped;
      if (it.skipped) entry["reason"] = it.skip_reason;
      entry["config"] = agent_config_to_text(current);
      log += entry.dump() + "\n";

      result.iterations.push_back(std::move(it));
      ++index;
    }
  }
  result.final_config = current;
  if (!cfg.out_dir.empty()) {
    write_text_file((fs::path(cfg.out_dir) / "meta_log.jsonl").string(), log);
    write_agent_config((fs::path(cfg.out_dir) / "agent_final.cfg").string(), current,
                       static_cast<int>(result.versions.size()));
  }
  return result;
}

}  // namespace topoctl
