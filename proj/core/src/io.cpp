#include "topoctl/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "topoctl/errors.hpp"

namespace topoctl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json mesh_json(const Mesh& m) { return {{"nx", m.nx}, {"ny", m.ny}, {"nz", m.nz}}; }
Mesh mesh_from(const json& j) { return Mesh(j.at("nx"), j.at("ny"), j.value("nz", 0)); }

ordered_json params_json(const SolverParams& p) {
  return {{"p", p.p}, {"beta", p.beta}, {"rmin", p.r_min}, {"move", p.move}};
}
SolverParams params_from(const json& j) {
  return {j.at("p"), j.at("beta"), j.at("rmin"), j.at("move")};
}

ordered_json solver_json(const LinearSolveConfig& s) {
  return {{"mode", s.mode == SolveMode::kPcg ? "pcg" : "direct"},
          {"cg_tolerance", s.cg_tolerance},
          {"cg_max_iters", s.cg_max_iters},
          {"precond_rebuild_threshold", s.precond_rebuild_threshold},
          {"preconditioner", s.preconditioner == PreconditionerKind::kTwoLevel ? "two_level" : "jacobi"}};
}
LinearSolveConfig solver_from(const json& j) {
  LinearSolveConfig s;
  s.mode = j.at("mode") == "pcg" ? SolveMode::kPcg : SolveMode::kDirect;
  s.cg_tolerance = j.at("cg_tolerance");
  s.cg_max_iters = j.at("cg_max_iters");
  s.precond_rebuild_threshold = j.at("precond_rebuild_threshold");
  s.preconditioner =
      j.at("preconditioner") == "two_level" ? PreconditionerKind::kTwoLevel : PreconditionerKind::kJacobi;
  return s;
}

ordered_json agent_json(const AgentConfig& a) {
  return {{"grayness_gate", a.grayness_gate},
          {"call_every", a.call_every},
          {"penal_ramp_iters", a.penal_ramp_iters},
          {"beta_double_every", a.beta_double_every},
          {"phase_min_iters_penalization", a.phase_min_iters_penalization},
          {"phase_min_iters_sharpening", a.phase_min_iters_sharpening}};
}
AgentConfig agent_from(const json& j) {
  AgentConfig a;
  a.grayness_gate = j.at("grayness_gate");
  a.call_every = j.at("call_every");
  a.penal_ramp_iters = j.at("penal_ramp_iters");
  a.beta_double_every = j.at("beta_double_every");
  a.phase_min_iters_penalization = j.at("phase_min_iters_penalization");
  a.phase_min_iters_sharpening = j.at("phase_min_iters_sharpening");
  return a;
}

ordered_json oc_json(const OcConfig& o) {
  return {{"damping", o.damping},
          {"bisection_tolerance", o.bisection_tolerance},
          {"lambda_low", o.lambda_low},
          {"lambda_high", o.lambda_high},
          {"bracket_expansions", o.bracket_expansions},
          {"max_bisections", o.max_bisections}};
}
OcConfig oc_from(const json& j) {
  OcConfig o;
  o.damping = j.at("damping");
  o.bisection_tolerance = j.at("bisection_tolerance");
  o.lambda_low = j.at("lambda_low");
  o.lambda_high = j.at("lambda_high");
  o.bracket_expansions = j.at("bracket_expansions");
  o.max_bisections = j.at("max_bisections");
  return o;
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["problem"] = std::string(to_string(c.problem));
  j["preset"] = std::string(to_string(c.preset));
  j["seed"] = c.seed;
  j["controller"] = std::string(to_string(c.controller));
  j["tail_enabled"] = c.tail();
  j["perturbation"] = c.perturbation;
  ordered_json ov = ordered_json::object();
  if (c.overrides.mesh) ov["mesh"] = mesh_json(*c.overrides.mesh);
  if (c.overrides.iterations) ov["iterations"] = *c.overrides.iterations;
  if (c.overrides.solver) ov["solver"] = solver_json(*c.overrides.solver);
  j["overrides"] = ov;
  j["agent"] = agent_json(c.agent);
  j["oc"] = oc_json(c.oc);
  return j;
}
RunConfig config_from(const json& j) {
  RunConfig c;
  c.problem = problem_from_string(j.at("problem").get<std::string>());
  c.preset = preset_from_string(j.at("preset").get<std::string>());
  c.seed = j.at("seed");
  c.controller = controller_kind_from_string(j.at("controller").get<std::string>());
  if (j.contains("tail_enabled")) {
    const bool tail = j.at("tail_enabled");
    if (tail != receives_tail(c.controller)) c.tail_enabled = tail;
  }
  c.perturbation = j.value("perturbation", 0.005);
  if (j.contains("overrides")) {
    const json& ov = j.at("overrides");
    if (ov.contains("mesh")) c.overrides.mesh = mesh_from(ov.at("mesh"));
    if (ov.contains("iterations")) c.overrides.iterations = ov.at("iterations").get<int>();
    if (ov.contains("solver")) c.overrides.solver = solver_from(ov.at("solver"));
  }
  if (j.contains("agent")) c.agent = agent_from(j.at("agent"));
  if (j.contains("oc")) c.oc = oc_from(j.at("oc"));
  return c;
}

ordered_json record_json(const IterationRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["phase"] = r.phase == Phase::kTail ? "tail" : "main";
  j["compliance"] = r.compliance;
  j["grayness"] = r.grayness;
  j["volume"] = r.volume;
  j["checkerboard"] = r.checkerboard;
  j["params"] = params_json(r.params);
  j["restart"] = r.restart;
  j["valid"] = r.valid;
  return j;
}
IterationRecord record_from(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration");
  r.phase = j.at("phase") == "tail" ? Phase::kTail : Phase::kMain;
  r.compliance = j.at("compliance");
  r.grayness = j.at("grayness");
  r.volume = j.at("volume");
  r.checkerboard = j.at("checkerboard");
  r.params = params_from(j.at("params"));
  r.restart = j.at("restart");
  r.valid = j.at("valid");
  return r;
}

template <class F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) { return config_json(cfg).dump(2); }

RunConfig run_config_from_json(std::string_view text) {
  return guarded("run config", [&] { return config_from(json::parse(text)); });
}

std::string summary_to_json(const RunSummary& s) {
  ordered_json j;
  j["format"] = "topoctl-summary";
  j["version"] = 1;
  j["config"] = config_json(s.config);
  j["mesh"] = mesh_json(s.mesh);
  j["budget"] = s.budget;
  j["final_compliance"] = s.final_compliance;
  j["final_grayness"] = s.final_grayness;
  j["final_volume"] = s.final_volume;
  j["best_iter"] = s.best_iter ? ordered_json(*s.best_iter) : ordered_json(nullptr);
  j["best_compliance"] = s.best_compliance ? ordered_json(*s.best_compliance) : ordered_json(nullptr);
  j["wall_time_s"] = s.wall_time_s;
  j["iterations_executed"] = s.iterations_executed;
  j["restart_count"] = s.restart_count;
  j["fallback_count"] = s.fallback_count;
  j["llm_calls"] = s.llm_calls;
  j["tail_applied"] = s.tail_applied;
  j["tail_from_uniform"] = s.tail_from_uniform;
  j["precond_rebuilds"] = s.precond_rebuilds;
  j["precond_reuses"] = s.precond_reuses;
  j["cg_iterations"] = s.cg_iterations;
  j["filter_builds"] = s.filter_builds;
  j["aborted"] = s.aborted;
  j["abort_reason"] = s.abort_reason;
  j["call_log"] = s.call_log_path;
  ordered_json trace = ordered_json::array();
  for (const auto& r : s.trace) trace.push_back(record_json(r));
  j["trace"] = std::move(trace);
  return j.dump(1);
}

RunSummary summary_from_json(std::string_view text) {
  return guarded("summary", [&] {
    const json j = json::parse(text);
    if (j.value("format", "") != "topoctl-summary") throw IoError("not a run summary");
    RunSummary s;
    s.config = config_from(j.at("config"));
    s.mesh = mesh_from(j.at("mesh"));
    s.budget = j.at("budget");
    s.final_compliance = j.at("final_compliance");
    s.final_grayness = j.at("final_grayness");
    s.final_volume = j.at("final_volume");
    if (!j.at("best_iter").is_null()) s.best_iter = j.at("best_iter").get<int>();
    if (!j.at("best_compliance").is_null()) s.best_compliance = j.at("best_compliance").get<double>();
    s.wall_time_s = j.at("wall_time_s");
    s.iterations_executed = j.at("iterations_executed");
    s.restart_count = j.at("restart_count");
    s.fallback_count = j.at("fallback_count");
    s.llm_calls = j.at("llm_calls");
    s.tail_applied = j.at("tail_applied");
    s.tail_from_uniform = j.at("tail_from_uniform");
    s.precond_rebuilds = j.at("precond_rebuilds");
    s.precond_reuses = j.at("precond_reuses");
    s.cg_iterations = j.at("cg_iterations");
    s.filter_builds = j.at("filter_builds");
    s.aborted = j.at("aborted");
    s.abort_reason = j.at("abort_reason");
    s.call_log_path = j.at("call_log");
    for (const auto& r : j.at("trace")) s.trace.push_back(record_from(r));
    return s;
  });
}

void write_summary(const std::string& path, const RunSummary& summary) {
  write_text_file(path, summary_to_json(summary));
}

RunSummary read_summary(const std::string& path) { return summary_from_json(read_text_file(path)); }

void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& trace) {
  auto out = open_out(path);
  out << "iteration,phase,compliance,grayness,volume,p,beta,rmin,move\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << (r.phase == Phase::kTail ? "tail" : "main") << ','
        << fmt(r.compliance) << ',' << fmt(r.grayness) << ',' << fmt(r.volume) << ','
        << fmt(r.params.p) << ',' << fmt(r.params.beta) << ',' << fmt(r.params.r_min) << ','
        << fmt(r.params.move) << '\n';
  }
}

std::string tidy_csv_header() { return "iteration,controller,seed,C,G,p,beta,rmin,move\n"; }

std::string tidy_csv_rows(const RunSummary& s) {
  std::ostringstream out;
  const std::string controller(to_string(s.config.controller));
  int main_count = 0;
  for (const auto& r : s.trace) {
    if (r.phase == Phase::kMain) ++main_count;
  }
  for (const auto& r : s.trace) {
    const int it = r.phase == Phase::kTail ? main_count + r.iteration : r.iteration;
    out << it << ',' << controller << ',' << s.config.seed << ',' << fmt(r.compliance) << ','
        << fmt(r.grayness) << ',' << fmt(r.params.p) << ',' << fmt(r.params.beta) << ','
        << fmt(r.params.r_min) << ',' << fmt(r.params.move) << '\n';
  }
  return out.str();
}

namespace {

constexpr char kTopdMagic[4] = {'T', 'O', 'P', 'D'};
constexpr std::uint32_t kTopdVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw IoError("truncated density file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_topd(const std::string& path, const DensityField& field) {
  auto out = open_out(path, true);
  out.write(kTopdMagic, 4);
  put_le<std::uint32_t>(out, kTopdVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.mesh.nx));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.mesh.ny));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.mesh.nz));
  for (double v : field.values) put_le<double>(out, v);
}

DensityField read_topd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTopdMagic, 4) != 0) {
    throw IoError(path + " is not a TOPD file");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kTopdVersion) throw IoError("unsupported TOPD version " + std::to_string(version));
  const auto nx = get_le<std::uint32_t>(in);
  const auto ny = get_le<std::uint32_t>(in);
  const auto nz = get_le<std::uint32_t>(in);
  if (nx == 0 || ny == 0 || nx > 100000 || ny > 100000 || nz > 100000) {
    throw IoError("bad TOPD dimensions");
  }
  DensityField f(Mesh(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)), 0.0);
  for (double& v : f.values) v = get_le<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in " + path);
  return f;
}

void write_density_csv(const std::string& path, const DensityField& field) {
  auto out = open_out(path);
  out << "i,j,k,value\n";
  const Mesh& m = field.mesh;
  const int nz = m.nz > 0 ? m.nz : 1;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < m.ny; ++j) {
      for (int i = 0; i < m.nx; ++i) {
        out << i << ',' << j << ',' << k << ',' << fmt(field.values[m.element_index(i, j, k)])
            << '\n';
      }
    }
  }
}

namespace {

constexpr std::string_view kConfigHeader = "# topoctl agent config";

}  // namespace

std::string agent_config_to_text(const AgentConfig& cfg, int version) {
  std::ostringstream out;
  out << kConfigHeader << '\n';
  out << "version = " << version << '\n';
  out << "grayness_gate = " << fmt(cfg.grayness_gate) << '\n';
  out << "call_every = " << cfg.call_every << '\n';
  out << "penal_ramp_iters = " << cfg.penal_ramp_iters << '\n';
  out << "beta_double_every = " << cfg.beta_double_every << '\n';
  out << "phase_min_iters_penalization = " << cfg.phase_min_iters_penalization << '\n';
  out << "phase_min_iters_sharpening = " << cfg.phase_min_iters_sharpening << '\n';
  return out.str();
}

AgentConfig agent_config_from_text(std::string_view text) {
  AgentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  bool version = false;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  auto parse_int = [&](const std::string& v, const std::string& key) {
    std::size_t used = 0;
    int out = 0;
    try {
      out = std::stoi(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw IoError("config: " + key + " expects an integer");
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (lineno == 1) {
      if (line != kConfigHeader) throw IoError("config: missing header line");
      header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "version") {
      parse_int(value, key);
      version = true;
    } else if (key == "grayness_gate") {
      std::size_t used = 0;
      try {
        cfg.grayness_gate = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || value.empty()) throw IoError("config: grayness_gate expects a number");
    } else if (key == "call_every") {
      cfg.call_every = parse_int(value, key);
    } else if (key == "penal_ramp_iters") {
      cfg.penal_ramp_iters = parse_int(value, key);
    } else if (key == "beta_double_every") {
      cfg.beta_double_every = parse_int(value, key);
    } else if (key == "phase_min_iters_penalization") {
      cfg.phase_min_iters_penalization = parse_int(value, key);
    } else if (key == "phase_min_iters_sharpening") {
      cfg.phase_min_iters_sharpening = parse_int(value, key);
    } else {
      throw UnknownConstant("config: unknown key '" + key + "'");
    }
  }
  if (!header || !version) throw IoError("config: missing header or version");
  cfg.validate();
  return cfg;
}

void write_agent_config(const std::string& path, const AgentConfig& cfg, int version) {
  write_text_file(path, agent_config_to_text(cfg, version));
}

AgentConfig read_agent_config(const std::string& path) {
  return agent_config_from_text(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  auto out = open_out(path, true);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace topoctl
