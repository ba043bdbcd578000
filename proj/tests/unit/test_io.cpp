#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "topoctl/errors.hpp"
#include "topoctl/io.hpp"

using namespace topoctl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("topoctl_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

RunConfig sample_config() {
  RunConfig c;
  c.problem = ProblemId::kLBracket;
  c.preset = Preset::kLong;
  ProblemOverrides o;
  o.mesh = Mesh(20, 20);
  o.iterations = 15;
  LinearSolveConfig s;
  s.mode = SolveMode::kPcg;
  s.preconditioner = PreconditionerKind::kTwoLevel;
  s.cg_tolerance = 1e-9;
  o.solver = s;
  c.overrides = o;
  c.seed = 7;
  c.controller = ControllerKind::kLlmAgent;
  c.tail_enabled = true;
  c.agent.grayness_gate = 0.3;
  c.agent.call_every = 3;
  c.oc.damping = 0.6;
  return c;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("run config round trip") {
  const RunConfig c = sample_config();
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  CHECK(back.problem == c.problem);
  CHECK(back.preset == c.preset);
  CHECK(back.overrides == c.overrides);
  CHECK(back.seed == c.seed);
  CHECK(back.controller == c.controller);
  CHECK(back.tail() == c.tail());
  RunConfig fixed_with_tail;
  fixed_with_tail.tail_enabled = true;
  CHECK(run_config_from_json(run_config_to_json(fixed_with_tail)).tail());
  CHECK(back.perturbation == c.perturbation);
  CHECK(back.agent == c.agent);
  CHECK(back.oc.damping == c.oc.damping);
  CHECK_THROWS_AS(run_config_from_json("{\"problem\": 3}"), IoError);
  CHECK_THROWS_AS(run_config_from_json("not json"), IoError);
}

TEST_CASE("summary round trip") {
  TempDir dir;
  RunConfig c;
  ProblemOverrides o;
  o.mesh = Mesh(12, 6);
  o.iterations = 12;
  c.overrides = o;
  c.controller = ControllerKind::kExpert;
  const RunSummary s = execute_run(c).summary;
  write_summary(dir.file("s.json"), s);
  const RunSummary back = read_summary(dir.file("s.json"));
  CHECK(same_outcome(s, back));
  CHECK(back.wall_time_s == s.wall_time_s);
  CHECK(back.config.controller == ControllerKind::kExpert);
  CHECK(back.config.overrides == c.overrides);

  write_bytes(dir.file("bad.json"), "{\"format\": \"other\"}");
  CHECK_THROWS_AS(read_summary(dir.file("bad.json")), IoError);
  CHECK_THROWS_AS(read_summary(dir.file("missing.json")), IoError);
}

TEST_CASE("trace and tidy CSV") {
  TempDir dir;
  RunSummary s;
  s.config.controller = ControllerKind::kThreeField;
  s.config.seed = 2;
  IterationRecord a;
  a.iteration = 0;
  a.compliance = 10.5;
  IterationRecord b = a;
  b.iteration = 1;
  IterationRecord t = a;
  t.phase = Phase::kTail;
  t.iteration = 0;
  s.trace = {a, b, t};
  write_trace_csv(dir.file("trace.csv"), s.trace);
  const std::string text = read_bytes(dir.file("trace.csv"));
  CHECK(text.rfind("iteration,phase,compliance,grayness,volume,p,beta,rmin,move\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(text.find("0,tail,10.5,") != std::string::npos);

  const std::string rows = tidy_csv_rows(s);
  CHECK(rows.find("2,three_field,2,10.5,") != std::string::npos);  // tail row after 2 main rows
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 3);
  CHECK(tidy_csv_header() == "iteration,controller,seed,C,G,p,beta,rmin,move\n");
}

TEST_CASE("TOPD round trip and layout") {
  TempDir dir;
  for (const Mesh& m : {Mesh(5, 3), Mesh(3, 2, 4)}) {
    const auto f = testing::random_field(m, 3, 0.0, 1.0);
    write_topd(dir.file("f.topd"), f);
    CHECK(read_topd(dir.file("f.topd")) == f);
    const std::string bytes = read_bytes(dir.file("f.topd"));
    CHECK(bytes.size() == 4 + 4 * 4 + 8 * f.size());
    CHECK(bytes.substr(0, 4) == "TOPD");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version, little endian
    CHECK(static_cast<unsigned char>(bytes[8]) == m.nx);
  }
  const auto good = read_bytes(dir.file("f.topd"));
  write_bytes(dir.file("trunc.topd"), good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(read_topd(dir.file("trunc.topd")), IoError);
  write_bytes(dir.file("extra.topd"), good + "x");
  CHECK_THROWS_AS(read_topd(dir.file("extra.topd")), IoError);
  write_bytes(dir.file("magic.topd"), "TOPX" + good.substr(4));
  CHECK_THROWS_AS(read_topd(dir.file("magic.topd")), IoError);
  std::string v2 = good;
  v2[4] = 2;
  write_bytes(dir.file("v2.topd"), v2);
  CHECK_THROWS_AS(read_topd(dir.file("v2.topd")), IoError);
  std::string zero = good;
  zero[8] = 0;
  write_bytes(dir.file("zero.topd"), zero);
  CHECK_THROWS_AS(read_topd(dir.file("zero.topd")), IoError);
  CHECK_THROWS_AS(read_topd(dir.file("none.topd")), IoError);
}

TEST_CASE("density CSV") {
  TempDir dir;
  const Mesh m(2, 2, 2);
  DensityField f(m, 0.0);
  f.values[m.element_index(1, 0, 1)] = 0.75;
  write_density_csv(dir.file("d.csv"), f);
  const std::string text = read_bytes(dir.file("d.csv"));
  CHECK(text.rfind("i,j,k,value\n", 0) == 0);
  CHECK(text.find("1,0,1,0.75\n") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}

TEST_CASE("agent config text") {
  TempDir dir;
  AgentConfig c;
  c.grayness_gate = 0.275;
  c.call_every = 7;
  c.phase_min_iters_sharpening = 9;
  write_agent_config(dir.file("a.cfg"), c, 3);
  CHECK(read_agent_config(dir.file("a.cfg")) == c);
  const std::string text = read_bytes(dir.file("a.cfg"));
  CHECK(text.rfind("# topoctl agent config\nversion = 3\n", 0) == 0);

  const std::string head = "# topoctl agent config\nversion = 1\n";
  CHECK(agent_config_from_text(head) == AgentConfig{});
  CHECK(agent_config_from_text(head + "# note\n\ncall_every = 2\n").call_every == 2);
  CHECK_THROWS_AS(agent_config_from_text(head + "temperature = 1\n"), UnknownConstant);
  CHECK_THROWS_AS(agent_config_from_text(head + "call_every = 2.5\n"), IoError);
  CHECK_THROWS_AS(agent_config_from_text(head + "grayness_gate = high\n"), IoError);
  CHECK_THROWS_AS(agent_config_from_text(head + "call_every\n"), IoError);
  CHECK_THROWS_AS(agent_config_from_text("call_every = 2\n"), IoError);
  CHECK_THROWS_AS(agent_config_from_text("# topoctl agent config\ncall_every = 2\n"), IoError);
  CHECK_THROWS_AS(agent_config_from_text(head + "call_every = 0\n"), InvalidArgument);
}
