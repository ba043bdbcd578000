#include "topoctl/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "topoctl/errors.hpp"

namespace topoctl {

DensityField initialize_design(const Mesh& mesh, double volume_fraction, std::uint64_t seed,
                               double amplitude, std::span<const std::uint8_t> passive) {
  if (!(volume_fraction > 0.0 && volume_fraction < 1.0)) {
    throw InvalidArgument("volume fraction must lie in (0, 1)");
  }
  const int n = mesh.element_count();
  if (!passive.empty() && static_cast<int>(passive.size()) != n) {
    throw InvalidArgument("passive mask length differs from element count");
  }
  std::mt19937_64 rng(seed);
  DensityField rho(mesh, 0.0);
  double sum = 0.0;
  for (int e = 0; e < n; ++e) {
    // Raw 53-bit draw keeps the sequence identical across standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const bool is_void = !passive.empty() && passive[e] != 0;
    rho.values[e] = is_void ? 0.0 : volume_fraction * (1.0 + amplitude * (2.0 * u - 1.0));
    sum += rho.values[e];
  }
  if (!(sum > 0.0)) throw InvalidArgument("no active elements");
  const double scale = volume_fraction * n / sum;
  for (double& v : rho.values) v = std::clamp(v * scale, 0.0, 1.0);
  return rho;
}

DesignEvaluator::DesignEvaluator(const ProblemSpec& spec)
    : spec_(spec), fe_(spec.mesh, spec.material, spec.load, spec.solver), filters_(spec.mesh) {}

DesignPipeline DesignEvaluator::pipeline(const SolverParams& params) {
  return DesignPipeline(&filters_.get(params.r_min), ProjectionParams{params.beta, 0.5},
                        spec_.passive);
}

Evaluation DesignEvaluator::evaluate(const DensityField& rho, const SolverParams& params) {
  const DesignPipeline pipe = pipeline(params);
  Evaluation ev;
  ev.fields = pipe.forward(rho);
  const std::vector<double> moduli =
      simp_moduli(ev.fields.rho_tilde.values, params.p, spec_.material);
  const DisplacementField u = fe_.solve(moduli);
  ComplianceResult cr = fe_.compliance_and_sensitivity(u, ev.fields.rho_tilde.values, params.p);
  ev.compliance = cr.compliance;
  ev.dc_drho = pipe.backward(ev.fields, cr.sensitivity);
  ev.grayness = grayness(ev.fields.rho_tilde);
  ev.volume = volume_fraction(ev.fields.rho_tilde);
  ev.checkerboard = checkerboard_index(ev.fields.rho_tilde);
  return ev;
}

OcResult DesignEvaluator::update(const DensityField& rho, const Evaluation& eval,
                                 const SolverParams& params, double volume_target, OcConfig oc) {
  oc.move_limit = params.move;
  return oc_step(rho, eval.dc_drho, pipeline(params), volume_target, oc);
}

namespace {

// Best compliance as observed by the agent, and the stagnation counter.
void track_best(RunState& s, const IterationRecord& rec, bool new_valid_best) {
  bool improved = false;
  if (new_valid_best) {
    improved = true;
  } else if (!s.best) {
    improved = !s.tracked_best || rec.compliance < *s.tracked_best * (1.0 - 1e-12);
  }
  if (improved) {
    s.tracked_best = rec.compliance;
    s.tracked_best_iteration = rec.iteration;
    s.stagnation = 0;
  } else {
    ++s.stagnation;
  }
}

}  // namespace

MainLoopResult run_main_loop(const RunConfig& cfg, const ProblemSpec& spec,
                             Controller& controller, const IterationHook& hook) {
  MainLoopResult out;
  RunState& s = out.state;
  s.budget = spec.iterations;
  s.volume_target = spec.volume_fraction;

  DesignEvaluator evaluator(spec);
  DensityField rho = initialize_design(spec.mesh, spec.volume_fraction,
                                       static_cast<std::uint64_t>(cfg.seed), cfg.perturbation,
                                       spec.passive);
  const bool last_is_terminal = !cfg.tail();

  try {
    for (int t = 0; t < s.budget; ++t) {
      s.iteration = t;
      bool restarted = false;
      if (controller.due(t)) {
        const ControllerAction a = controller.decide(s);
        if (!within_bounds(a.params)) throw InvalidArgument("controller emitted out-of-range parameters");
        s.params = a.params;
        if (a.restart && s.best) {
          rho = s.best->rho;
          restarted = true;
          ++out.restart_count;
          s.stagnation = 0;
        }
      }
      if (hook) hook(t, rho);

      Evaluation ev = evaluator.evaluate(rho, s.params);
      IterationRecord rec;
      rec.iteration = t;
      rec.phase = Phase::kMain;
      rec.compliance = ev.compliance;
      rec.grayness = ev.grayness;
      rec.volume = ev.volume;
      rec.checkerboard = ev.checkerboard;
      rec.params = s.params;
      rec.restart = restarted;
      rec.valid = snapshot_valid(s.params, ev.volume, s.volume_target);
      s.history.push_back(rec);

      const bool new_best = rec.valid && (!s.best || rec.compliance < s.best->compliance);
      if (new_best) s.best = Snapshot{rho, t, rec.compliance, s.params, true};
      track_best(s, rec, new_best);

      out.last_rho = rho;
      if (!(last_is_terminal && t + 1 == s.budget)) {
        rho = evaluator.update(rho, ev, s.params, s.volume_target, cfg.oc).rho;
      }
      out.last_eval = std::move(ev);
    }
    s.iteration = s.budget;
  } catch (const Error& e) {
    out.aborted = true;
    out.abort_reason = e.what();
  }
  out.solve_stats = evaluator.solve_stats();
  out.filter_builds = evaluator.filter_builds();
  return out;
}

TailResult apply_tail(const std::optional<Snapshot>& best, const ProblemSpec& spec,
                      const OcConfig& oc) {
  TailResult out;
  out.from_uniform = !(best && best->valid);
  DensityField rho = out.from_uniform
                         ? initialize_design(spec.mesh, spec.volume_fraction, 0, 0.0, spec.passive)
                         : best->rho;
  DesignEvaluator evaluator(spec);
  try {
    for (int t = 0; t < kTailIterations; ++t) {
      Evaluation ev = evaluator.evaluate(rho, kTailParams);
      IterationRecord rec;
      rec.iteration = t;
      rec.phase = Phase::kTail;
      rec.compliance = ev.compliance;
      rec.grayness = ev.grayness;
      rec.volume = ev.volume;
      rec.checkerboard = ev.checkerboard;
      rec.params = kTailParams;
      rec.valid = snapshot_valid(kTailParams, ev.volume, spec.volume_fraction);
      out.trace.push_back(rec);
      out.final_rho = rho;
      if (t + 1 < kTailIterations) {
        rho = evaluator.update(rho, ev, kTailParams, spec.volume_fraction, oc).rho;
      }
      out.final_eval = std::move(ev);
    }
  } catch (const Error& e) {
    out.aborted = true;
    out.abort_reason = e.what();
  }
  out.solve_stats = evaluator.solve_stats();
  return out;
}

RunSummary summarize(const RunConfig& cfg, const MainLoopResult& main,
                     const std::optional<TailResult>& tail, double wall_time_s,
                     int fallback_count, int llm_calls) {
  RunSummary s;
  s.config = cfg;
  const ProblemSpec spec = build_problem(cfg.problem, cfg.preset, cfg.overrides);
  s.mesh = spec.mesh;
  s.budget = spec.iterations;
  s.wall_time_s = wall_time_s;
  s.restart_count = main.restart_count;
  s.fallback_count = fallback_count;
  s.llm_calls = llm_calls;
  s.trace = main.state.history;
  if (main.state.best) {
    s.best_iter = main.state.best->iteration + 1;
    s.best_compliance = main.state.best->compliance;
  }
  s.precond_rebuilds = main.solve_stats.precond_rebuilds;
  s.precond_reuses = main.solve_stats.precond_reuses;
  s.cg_iterations = main.solve_stats.cg_iterations_total;
  s.filter_builds = main.filter_builds;
  s.aborted = main.aborted;
  s.abort_reason = main.abort_reason;

  const Evaluation* final_eval = main.state.history.empty() ? nullptr : &main.last_eval;
  if (tail) {
    s.tail_applied = true;
    s.tail_from_uniform = tail->from_uniform;
    s.trace.insert(s.trace.end(), tail->trace.begin(), tail->trace.end());
    s.precond_rebuilds += tail->solve_stats.precond_rebuilds;
    s.precond_reuses += tail->solve_stats.precond_reuses;
    s.cg_iterations += tail->solve_stats.cg_iterations_total;
    if (tail->aborted) {
      s.aborted = true;
      s.abort_reason = tail->abort_reason;
    }
    final_eval = tail->trace.empty() ? final_eval : &tail->final_eval;
  }
  s.iterations_executed = static_cast<int>(s.trace.size());
  if (final_eval) {
    s.final_compliance = final_eval->compliance;
    s.final_grayness = final_eval->grayness;
    s.final_volume = final_eval->volume;
  }
  return s;
}

bool same_outcome(const RunSummary& a, const RunSummary& b) {
  return a.mesh == b.mesh && a.budget == b.budget && a.final_compliance == b.final_compliance &&
         a.final_grayness == b.final_grayness && a.final_volume == b.final_volume &&
         a.best_iter == b.best_iter && a.best_compliance == b.best_compliance &&
         a.iterations_executed == b.iterations_executed && a.restart_count == b.restart_count &&
         a.fallback_count == b.fallback_count && a.llm_calls == b.llm_calls &&
         a.tail_applied == b.tail_applied && a.tail_from_uniform == b.tail_from_uniform &&
         a.precond_rebuilds == b.precond_rebuilds && a.precond_reuses == b.precond_reuses &&
         a.cg_iterations == b.cg_iterations && a.aborted == b.aborted && a.trace == b.trace;
}

RunResult execute_run_with(const RunConfig& cfg, Controller& controller,
                           const IterationHook& hook) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec spec = build_problem(cfg.problem, cfg.preset, cfg.overrides);
  cfg.oc.validate();

  MainLoopResult main = run_main_loop(cfg, spec, controller, hook);
  std::optional<TailResult> tail;
  if (cfg.tail() && !main.aborted) tail = apply_tail(main.state.best, spec, cfg.oc);

  RunResult result;
  int fallbacks = 0;
  int calls = 0;
  if (const auto* agent = dynamic_cast<const LlmAgent*>(&controller)) {
    result.calls = agent->records();
    fallbacks = agent->fallback_count();
    calls = static_cast<int>(agent->records().size());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.summary = summarize(cfg, main, tail, wall, fallbacks, calls);
  if (tail && !tail->trace.empty()) {
    result.final_rho = tail->final_rho;
    result.final_physical = tail->final_eval.fields.rho_tilde;
  } else if (!main.state.history.empty()) {
    result.final_rho = main.last_rho;
    result.final_physical = main.last_eval.fields.rho_tilde;
  }
  return result;
}

RunResult execute_run(const RunConfig& cfg, std::shared_ptr<CompletionClient> client,
                      const IterationHook& hook) {
  if (cfg.controller == ControllerKind::kLlmAgent) {
    if (!client) throw InvalidArgument("the LLM agent needs a completion client");
    LlmAgent agent(cfg.agent, std::move(client));
    return execute_run_with(cfg, agent, hook);
  }
  auto controller = make_deterministic_controller(cfg.controller);
  return execute_run_with(cfg, *controller, hook);
}

}  // namespace topoctl
