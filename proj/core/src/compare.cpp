#include "topoctl/compare.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "topoctl/errors.hpp"
#include "topoctl/io.hpp"

namespace topoctl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<ControllerKind> standard_controllers() {
  return {ControllerKind::kFixed, ControllerKind::kThreeField, ControllerKind::kExpert,
          ControllerKind::kScheduleOnly, ControllerKind::kLlmAgent};
}

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  if (x.empty()) return m;
  // Shifted by the first value so identical samples give exactly zero spread.
  double shifted = 0.0;
  for (double v : x) shifted += v - x.front();
  m.mean = x.front() + shifted / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  }
  return m;
}

std::string cell_dir_name(ControllerKind kind, int seed) {
  return std::string(to_string(kind)) + "_seed" + std::to_string(seed);
}

}  // namespace

std::vector<ControllerAggregate> aggregate_cells(const std::vector<CellResult>& cells,
                                                 const std::vector<ControllerKind>& order) {
  std::vector<ControllerAggregate> out;
  for (ControllerKind kind : order) {
    ControllerAggregate a;
    a.controller = kind;
    std::vector<double> c, g, t, b, r, f;
    for (const auto& cell : cells) {
      if (cell.controller != kind) continue;
      if (!cell.ok()) {
        ++a.failures;
        continue;
      }
      const RunSummary& s = *cell.summary;
      ++a.runs;
      c.push_back(s.final_compliance);
      g.push_back(s.final_grayness);
      t.push_back(s.wall_time_s);
      b.push_back(s.best_iter.value_or(0));
      r.push_back(s.restart_count);
      f.push_back(s.fallback_count);
    }
    const Moments mc = moments(c);
    const Moments mg = moments(g);
    a.mean_compliance = mc.mean;
    a.std_compliance = mc.sd;
    a.mean_grayness = mg.mean;
    a.std_grayness = mg.sd;
    a.mean_wall_time_s = moments(t).mean;
    a.mean_best_iter = moments(b).mean;
    a.mean_restarts = moments(r).mean;
    a.mean_fallbacks = moments(f).mean;
    out.push_back(a);
  }
  const ControllerAggregate* fixed = nullptr;
  for (const auto& a : out) {
    if (a.controller == ControllerKind::kFixed && a.runs > 0) fixed = &a;
  }
  if (fixed) {
    const double ref = fixed->mean_compliance;
    for (auto& a : out) {
      if (a.runs > 0) a.percent_vs_fixed = (a.mean_compliance - ref) / ref * 100.0;
    }
  }
  return out;
}

void write_run_artifacts(const std::string& dir, RunResult& result) {
  fs::create_directories(dir);
  const fs::path d(dir);
  if (!result.calls.empty() || result.summary.config.controller == ControllerKind::kLlmAgent) {
    const std::string log = (d / "calls.jsonl").string();
    write_call_log(log, result.calls);
    result.summary.call_log_path = log;
  }
  write_summary((d / "summary.json").string(), result.summary);
  write_trace_csv((d / "trace.csv").string(), result.summary.trace);
  if (!result.final_physical.values.empty()) {
    write_topd((d / "design.topd").string(), result.final_rho);
    write_topd((d / "physical.topd").string(), result.final_physical);
    write_density_csv((d / "physical.csv").string(), result.final_physical);
  }
}

Comparison run_comparison(const CompareConfig& cfg, const ClientFactory& clients) {
  if (cfg.controllers.empty() || cfg.seeds.empty()) {
    throw InvalidArgument("comparison needs at least one controller and one seed");
  }
  cfg.agent.validate();
  Comparison out;
  out.config = cfg;
  for (ControllerKind kind : cfg.controllers) {
    for (int seed : cfg.seeds) out.cells.push_back(CellResult{kind, seed, std::nullopt, {}});
  }

  unsigned workers = cfg.workers ? cfg.workers : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(out.cells.size())));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < out.cells.size(); i = next++) {
      CellResult& cell = out.cells[i];
      RunConfig rc;
      rc.problem = cfg.problem;
      rc.preset = cfg.preset;
      rc.overrides = cfg.overrides;
      rc.seed = cell.seed;
      rc.controller = cell.controller;
      rc.agent = cfg.agent;
      try {
        std::shared_ptr<CompletionClient> client;
        if (cell.controller == ControllerKind::kLlmAgent) {
          if (!clients) throw InvalidArgument("no client factory for the LLM agent");
          client = clients(rc);
        }
        RunResult result = execute_run(rc, client);
        if (!cfg.out_dir.empty()) {
          write_run_artifacts((fs::path(cfg.out_dir) / cell_dir_name(cell.controller, cell.seed)).string(),
                              result);
        }
        if (result.summary.aborted) cell.error = result.summary.abort_reason;
        cell.summary = std::move(result.summary);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  out.aggregates = aggregate_cells(out.cells, cfg.controllers);

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_text_file((fs::path(cfg.out_dir) / "aggregate.json").string(), comparison_to_json(out));
    std::string plot = tidy_csv_header();
    for (const auto& cell : out.cells) {
      if (cell.summary) plot += tidy_csv_rows(*cell.summary);
    }
    write_text_file((fs::path(cfg.out_dir) / "plot.csv").string(), plot);
  }
  return out;
}

std::string comparison_to_json(const Comparison& c) {
  ordered_json j;
  j["problem"] = std::string(to_string(c.config.problem));
  j["preset"] = std::string(to_string(c.config.preset));
  j["seeds"] = c.config.seeds;
  ordered_json aggs = ordered_json::array();
  for (const auto& a : c.aggregates) {
    ordered_json e;
    e["controller"] = std::string(to_string(a.controller));
    e["runs"] = a.runs;
    e["failures"] = a.failures;
    e["mean_compliance"] = a.mean_compliance;
    e["std_compliance"] = a.std_compliance;
    e["mean_grayness"] = a.mean_grayness;
    e["std_grayness"] = a.std_grayness;
    e["mean_wall_time_s"] = a.mean_wall_time_s;
    e["mean_best_iter"] = a.mean_best_iter;
    e["mean_restarts"] = a.mean_restarts;
    e["mean_fallbacks"] = a.mean_fallbacks;
    e["percent_vs_fixed"] = a.percent_vs_fixed ? ordered_json(*a.percent_vs_fixed) : ordered_json(nullptr);
    aggs.push_back(std::move(e));
  }
  j["aggregates"] = std::move(aggs);
  ordered_json cells = ordered_json::array();
  for (const auto& cell : c.cells) {
    ordered_json e;
    e["controller"] = std::string(to_string(cell.controller));
    e["seed"] = cell.seed;
    e["ok"] = cell.ok();
    if (cell.summary) {
      e["final_compliance"] = cell.summary->final_compliance;
      e["final_grayness"] = cell.summary->final_grayness;
      e["wall_time_s"] = cell.summary->wall_time_s;
    }
    if (!cell.error.empty()) e["error"] = cell.error;
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j.dump(2);
}

}  // namespace topoctl
