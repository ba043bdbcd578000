// topoctl: single runs, controller comparisons, meta-optimization and
// replay verification.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "topoctl/clients.hpp"
#include "topoctl/compare.hpp"
#include "topoctl/errors.hpp"
#include "topoctl/io.hpp"
#include "topoctl/meta.hpp"
#include "topoctl/replay.hpp"
#include "topoctl/run.hpp"

namespace fs = std::filesystem;
using namespace topoctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAbort = 3;
constexpr int kExitMismatch = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshFlags {
  int nx = 0;
  int ny = 0;
  int nz = -1;
  int iters = 0;
  std::string solver;

  void add(CLI::App* app) {
    app->add_option("--nx", nx, "Override elements along x")->check(CLI::PositiveNumber);
    app->add_option("--ny", ny, "Override elements along y")->check(CLI::PositiveNumber);
    app->add_option("--nz", nz, "Override elements along z (0 for 2-D)")->check(CLI::NonNegativeNumber);
    app->add_option("--iters", iters, "Override the main-loop budget N")->check(CLI::PositiveNumber);
    app->add_option("--solver", solver, "Linear solver")->check(CLI::IsMember({"direct", "pcg"}));
  }

  ProblemOverrides overrides(ProblemId id, Preset preset) const {
    ProblemOverrides o;
    if (nx || ny || nz >= 0) {
      const Mesh base = build_problem(id, preset).mesh;
      o.mesh = Mesh(nx ? nx : base.nx, ny ? ny : base.ny, nz >= 0 ? nz : base.nz);
    }
    if (iters) o.iterations = iters;
    if (!solver.empty()) {
      LinearSolveConfig s = build_problem(id, preset).solver;
      s.mode = solver == "pcg" ? SolveMode::kPcg : SolveMode::kDirect;
      o.solver = s;
    }
    return o;
  }
};

struct LiveFlags {
  std::string model = "gpt-4o-mini";
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  double timeout_s = 30.0;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Model name for the live client")->capture_default_str();
    app->add_option("--base-url", base_url, "Base URL of the chat-completions endpoint")
        ->capture_default_str();
    app->add_option("--api-path", path, "Request path")->capture_default_str();
    app->add_option("--timeout", timeout_s, "Per-request timeout in seconds")->capture_default_str();
  }

  std::shared_ptr<CompletionClient> make() const {
    LiveClientConfig c;
    c.model = model;
    c.base_url = base_url;
    c.path = path;
    c.timeout_s = timeout_s;
    return std::make_shared<LiveHttpClient>(c);
  }
};

ClientFactory agent_client_factory(const std::string& kind, const LiveFlags& live) {
  if (kind == "mock") {
    auto mock = std::make_shared<AdvisoryMockClient>();
    return [mock](const RunConfig&) { return mock; };
  }
  if (kind == "live") {
    auto client = live.make();
    return [client](const RunConfig&) { return client; };
  }
  throw UsageError("client '" + kind + "' is not available here");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_summary(const RunSummary& s) {
  std::printf("%s %s %s seed %d: C = %.6g, G = %.4g, V = %.4f", std::string(to_string(s.config.problem)).c_str(),
              std::string(to_string(s.config.preset)).c_str(),
              std::string(to_string(s.config.controller)).c_str(), s.config.seed,
              s.final_compliance, s.final_grayness, s.final_volume);
  if (s.best_iter) std::printf(", best iter %d", *s.best_iter);
  std::printf(", %.2f s", s.wall_time_s);
  if (s.tail_applied) std::printf(s.tail_from_uniform ? ", tail from uniform density" : ", tail");
  if (s.config.controller == ControllerKind::kLlmAgent) {
    std::printf(", %d calls, %d fallbacks", s.llm_calls, s.fallback_count);
  }
  if (s.restart_count) std::printf(", %d restarts", s.restart_count);
  std::printf("\n");
  if (s.aborted) std::fprintf(stderr, "run aborted: %s\n", s.abort_reason.c_str());
}

// ---- run -------------------------------------------------------------------

struct RunFlags {
  std::string problem = "cantilever";
  std::string preset;
  std::string controller = "fixed";
  int seed = 0;
  std::string out_dir = "out";
  std::string client;
  std::string replay_log;
  std::string config;
  bool no_tail = false;
  MeshFlags mesh;
  LiveFlags live;
};

int cmd_run(const RunFlags& f) {
  RunConfig cfg;
  cfg.problem = problem_from_string(f.problem);
  const Preset default_preset =
      (cfg.problem == ProblemId::kCantilever3d || cfg.problem == ProblemId::kMbb3d) ? Preset::k3d
                                                                                   : Preset::kFast;
  cfg.preset = f.preset.empty() ? default_preset : preset_from_string(f.preset);
  cfg.controller = controller_kind_from_string(f.controller);
  cfg.seed = f.seed;
  cfg.overrides = f.mesh.overrides(cfg.problem, cfg.preset);
  if (!f.config.empty()) cfg.agent = read_agent_config(f.config);

  const bool llm = cfg.controller == ControllerKind::kLlmAgent;
  if (f.no_tail) {
    if (cfg.controller != ControllerKind::kFixed) {
      throw UsageError("--no-tail only applies to the fixed controller");
    }
    cfg.tail_enabled = false;
  }
  if (!llm && (!f.client.empty() || !f.replay_log.empty() || !f.config.empty())) {
    throw UsageError("--client, --replay-log and --config only apply to --controller llm_agent");
  }
  const std::string client_kind = f.client.empty() ? "mock" : f.client;
  if ((client_kind == "replay") != !f.replay_log.empty()) {
    throw UsageError("--client replay and --replay-log go together");
  }

  std::shared_ptr<CompletionClient> client;
  if (llm) {
    if (client_kind == "replay") {
      client = std::make_shared<ReplayClient>(replay_responses(read_call_log(f.replay_log)));
    } else {
      client = agent_client_factory(client_kind, f.live)(cfg);
    }
  }
  RunResult result = execute_run(cfg, client);
  write_run_artifacts(f.out_dir, result);
  print_summary(result.summary);
  std::printf("wrote %s\n", (fs::path(f.out_dir) / "summary.json").string().c_str());
  return result.summary.aborted ? kExitAbort : kExitOk;
}

// ---- compare ---------------------------------------------------------------

struct CompareFlags {
  std::string problem = "cantilever";
  std::string preset;
  int seeds = 2;
  std::string controllers = "fixed,three_field,expert,schedule_only,llm_agent";
  std::string out_dir = "compare";
  std::string client = "mock";
  std::string config;
  unsigned workers = 0;
  MeshFlags mesh;
  LiveFlags live;
};

int cmd_compare(const CompareFlags& f) {
  CompareConfig cc;
  cc.problem = problem_from_string(f.problem);
  cc.preset = f.preset.empty()
                  ? ((cc.problem == ProblemId::kCantilever3d || cc.problem == ProblemId::kMbb3d)
                         ? Preset::k3d
                         : Preset::kFast)
                  : preset_from_string(f.preset);
  cc.overrides = f.mesh.overrides(cc.problem, cc.preset);
  cc.controllers.clear();
  for (const auto& name : split_list(f.controllers)) {
    cc.controllers.push_back(controller_kind_from_string(name));
  }
  if (cc.controllers.empty()) throw UsageError("--controllers is empty");
  cc.seeds.clear();
  for (int s = 0; s < f.seeds; ++s) cc.seeds.push_back(s);
  if (!f.config.empty()) cc.agent = read_agent_config(f.config);
  cc.workers = f.workers;
  cc.out_dir = f.out_dir;

  const Comparison cmp = run_comparison(cc, agent_client_factory(f.client, f.live));
  std::printf("%-14s %5s %14s %12s %10s %10s\n", "controller", "runs", "C mean", "C std", "G mean",
              "vs fixed");
  for (const auto& a : cmp.aggregates) {
    std::printf("%-14s %5d %14.6g %12.4g %10.4g", std::string(to_string(a.controller)).c_str(),
                a.runs, a.mean_compliance, a.std_compliance, a.mean_grayness);
    if (a.percent_vs_fixed) {
      std::printf(" %+9.2f%%\n", *a.percent_vs_fixed);
    } else {
      std::printf(" %10s\n", "-");
    }
  }
  int failed = 0;
  for (const auto& cell : cmp.cells) {
    if (!cell.ok()) {
      ++failed;
      std::fprintf(stderr, "%s seed %d failed: %s\n", std::string(to_string(cell.controller)).c_str(),
                   cell.seed, cell.error.c_str());
    }
  }
  std::printf("wrote %s\n", (fs::path(f.out_dir) / "aggregate.json").string().c_str());
  return failed ? kExitAbort : kExitOk;
}

// ---- meta ------------------------------------------------------------------

struct MetaFlags {
  std::string problems = "cantilever,mbb,lbracket";
  int iters_per_problem = 5;
  int seeds = 2;
  std::string client = "mock";
  std::string meta_client = "live";
  std::string meta_script;
  std::string config;
  std::string out_dir = "meta";
  unsigned workers = 0;
  MeshFlags mesh;
  LiveFlags live;
};

int cmd_meta(const MetaFlags& f) {
  MetaLoopConfig mc;
  mc.problems.clear();
  for (const auto& name : split_list(f.problems)) mc.problems.push_back(problem_from_string(name));
  if (mc.problems.empty()) throw UsageError("--problems is empty");
  for (ProblemId p : mc.problems) {
    if (p == ProblemId::kCantilever3d || p == ProblemId::kMbb3d) {
      throw UsageError("the meta loop runs on the fast 2-D presets");
    }
    if (f.mesh.nz > 0) throw UsageError("--nz does not apply to the meta loop");
  }
  mc.iters_per_problem = f.iters_per_problem;
  mc.seeds.clear();
  for (int s = 0; s < f.seeds; ++s) mc.seeds.push_back(s);
  if (!f.config.empty()) mc.initial = read_agent_config(f.config);
  mc.overrides = f.mesh.overrides(ProblemId::kCantilever, Preset::kFast);
  if (f.mesh.nx == 0 && f.mesh.ny == 0) mc.overrides.mesh.reset();
  mc.workers = f.workers;
  mc.out_dir = f.out_dir;

  std::shared_ptr<CompletionClient> meta;
  if (f.meta_client == "script") {
    if (f.meta_script.empty()) throw UsageError("--meta-client script needs --meta-script");
    std::vector<std::string> lines;
    std::istringstream in(read_text_file(f.meta_script));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) lines.push_back(line);
    }
    meta = std::make_shared<ScriptedClient>(lines);
  } else {
    if (!f.meta_script.empty()) throw UsageError("--meta-script needs --meta-client script");
    meta = f.live.make();
  }

  const MetaResult res = outer_loop(mc, *meta, agent_client_factory(f.client, f.live));
  for (const auto& it : res.iterations) {
    std::printf("iteration %d (%s): %s\n", it.index, std::string(to_string(it.problem)).c_str(),
                it.skipped ? ("update skipped: " + it.skip_reason).c_str() : "update applied");
  }
  std::printf("%d comparisons, %zu config versions\n", res.comparisons, res.versions.size());
  std::printf("%s", agent_config_to_text(res.final_config, static_cast<int>(res.versions.size())).c_str());
  return kExitOk;
}

// ---- replay-verify ---------------------------------------------------------

int cmd_replay_verify(const std::string& log_path, const std::string& summary_path) {
  const RunSummary recorded = read_summary(summary_path);
  if (recorded.config.controller != ControllerKind::kLlmAgent) {
    throw UsageError("replay-verify needs the summary of an llm_agent run");
  }
  const std::vector<CallRecord> log = read_call_log(log_path);
  const ReplayReport rep = verify_replay(recorded, log);
  for (const auto& n : rep.notes) std::printf("note: %s\n", n.c_str());
  std::printf("calls checked: %d, rails %s\n", rep.calls_checked, rep.rails_ok ? "ok" : "violated");
  if (!rep.passed) {
    if (!rep.first_divergence.empty()) {
      std::printf("first divergence: %s\n", rep.first_divergence.c_str());
    }
    std::printf("replay FAILED\n");
    return kExitMismatch;
  }
  std::printf("replay matches (%zu trace records)\n", rep.replayed.trace.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive continuation for SIMP topology optimization"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Run one optimization");
  run->add_option("--problem", rf.problem, "cantilever|mbb|lbracket|cantilever3d|mbb3d")->capture_default_str();
  run->add_option("--preset", rf.preset, "fast|long|hard|3d (default: fast, or 3d for 3-D problems)");
  run->add_option("--controller", rf.controller,
                  "fixed|three_field|expert|schedule_only|tail_only|llm_agent")
      ->capture_default_str();
  run->add_option("--seed", rf.seed, "Seed of the initial perturbation")->capture_default_str();
  run->add_option("--out-dir", rf.out_dir, "Output directory")->capture_default_str();
  run->add_option("--client", rf.client, "Completion client for llm_agent (default mock)")
      ->check(CLI::IsMember({"live", "mock", "replay"}));
  run->add_option("--replay-log", rf.replay_log, "Call log to replay (with --client replay)");
  run->add_option("--config", rf.config, "Agent constants file");
  run->add_flag("--no-tail", rf.no_tail, "Skip the sharpening tail (fixed controller only)");
  rf.mesh.add(run);
  rf.live.add(run);

  CompareFlags cf;
  auto* compare = app.add_subcommand("compare", "Compare controllers over seeds");
  compare->add_option("--problem", cf.problem)->capture_default_str();
  compare->add_option("--preset", cf.preset);
  compare->add_option("--seeds", cf.seeds, "Number of seeds (0..n-1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compare->add_option("--controllers", cf.controllers, "Comma-separated controller list")
      ->capture_default_str();
  compare->add_option("--out-dir", cf.out_dir)->capture_default_str();
  compare->add_option("--client", cf.client, "Client for llm_agent runs")
      ->check(CLI::IsMember({"live", "mock"}))
      ->capture_default_str();
  compare->add_option("--config", cf.config, "Agent constants file");
  compare->add_option("--workers", cf.workers, "Worker threads (default: logical cores)");
  cf.mesh.add(compare);
  cf.live.add(compare);

  MetaFlags mf;
  auto* meta = app.add_subcommand("meta", "Tune the agent constants across problems");
  meta->add_option("--problems", mf.problems, "Comma-separated problem list")->capture_default_str();
  meta->add_option("--iters-per-problem", mf.iters_per_problem)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  meta->add_option("--seeds", mf.seeds)->check(CLI::PositiveNumber)->capture_default_str();
  meta->add_option("--client", mf.client, "Client for llm_agent runs")
      ->check(CLI::IsMember({"live", "mock"}))
      ->capture_default_str();
  meta->add_option("--meta-client", mf.meta_client, "Client for the meta calls")
      ->check(CLI::IsMember({"live", "script"}))
      ->capture_default_str();
  meta->add_option("--meta-script", mf.meta_script, "File with one meta response per line");
  meta->add_option("--config", mf.config, "Initial agent constants file");
  meta->add_option("--out-dir", mf.out_dir)->capture_default_str();
  meta->add_option("--workers", mf.workers);
  mf.mesh.add(meta);
  mf.live.add(meta);

  std::string log_path;
  std::string summary_path;
  auto* verify = app.add_subcommand("replay-verify", "Re-execute an agent run against its call log");
  verify->add_option("--replay-log", log_path, "Call log")->required();
  verify->add_option("--summary", summary_path, "Summary of the recorded run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*compare) return cmd_compare(cf);
    if (*meta) return cmd_meta(mf);
    if (*verify) return cmd_replay_verify(log_path, summary_path);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n\n%s", e.what(), app.help().c_str());
    return kExitUsage;
  } catch (const UnknownProblem& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const UnknownConstant& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
