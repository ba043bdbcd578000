#include <doctest.h>

#include <algorithm>

#include "topoctl/errors.hpp"
#include "topoctl/problems.hpp"

using namespace topoctl;

namespace {

struct Row {
  ProblemId id;
  Preset preset;
  Mesh mesh;
  int n;
};

const Row kTable[] = {
    {ProblemId::kCantilever, Preset::kFast, Mesh(60, 30), 100},
    {ProblemId::kCantilever, Preset::kLong, Mesh(120, 60), 300},
    {ProblemId::kCantilever, Preset::kHard, Mesh(180, 90), 300},
    {ProblemId::kMbb, Preset::kLong, Mesh(120, 60), 300},
    {ProblemId::kLBracket, Preset::kLong, Mesh(120, 60), 300},
    {ProblemId::kCantilever3d, Preset::k3d, Mesh(40, 20, 10), 300},
    {ProblemId::kMbb3d, Preset::k3d, Mesh(40, 20, 10), 300},
};

bool loads_touch_passive(const ProblemSpec& s) {
  const Mesh& m = s.mesh;
  for (const auto& [dof, f] : s.load.forces) {
    const int node = dof / m.dim();
    const int i = node % (m.nx + 1);
    const int j = (node / (m.nx + 1)) % (m.ny + 1);
    // any element sharing the node that is solid means the load is carried
    bool carried = false;
    for (int di : {-1, 0}) {
      for (int dj : {-1, 0}) {
        const int ei = i + di, ej = j + dj;
        if (ei < 0 || ej < 0 || ei >= m.nx || ej >= m.ny) continue;
        if (m.dim() == 2 && !s.passive[m.element_index(ei, ej)]) carried = true;
      }
    }
    if (m.dim() == 2 && !carried) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("benchmark table") {
  for (const auto& row : kTable) {
    CAPTURE(to_string(row.id));
    const ProblemSpec s = build_problem(row.id, row.preset);
    CHECK(s.mesh == row.mesh);
    CHECK(s.iterations == row.n);
    CHECK(s.volume_fraction == 0.40);
    CHECK(s.passive.size() == static_cast<std::size_t>(row.mesh.element_count()));
    CHECK(std::is_sorted(s.load.fixed_dofs.begin(), s.load.fixed_dofs.end()));
    double total = 0.0;
    for (const auto& [dof, f] : s.load.forces) total += f;
    CHECK(total == doctest::Approx(-1.0));
    CHECK(s.solver.mode == (row.mesh.dim() == 3 ? SolveMode::kPcg : SolveMode::kDirect));
  }
  // fast presets for the 2-D problems used by the meta loop
  CHECK(build_problem(ProblemId::kMbb, Preset::kFast).mesh == Mesh(60, 30));
  CHECK(build_problem(ProblemId::kLBracket, Preset::kFast).iterations == 100);
}

TEST_CASE("every problem is solvable at uniform density") {
  for (auto id : {ProblemId::kCantilever, ProblemId::kMbb, ProblemId::kLBracket}) {
    ProblemOverrides o;
    o.mesh = Mesh(20, 10);
    const auto s = build_problem(id, Preset::kFast, o);
    FeSystem fe(s.mesh, s.material, s.load, s.solver);
    std::vector<double> e(s.mesh.element_count(), 0.4 * 0.4 * 0.4);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (s.passive[i]) e[i] = s.material.Emin;
    }
    const auto u = fe.solve(e);
    CHECK(fe.compliance(u) > 0.0);
    CHECK(fe.relative_residual(e, u) < 1e-8);
    CHECK_FALSE(loads_touch_passive(s));
  }
  for (auto id : {ProblemId::kCantilever3d, ProblemId::kMbb3d}) {
    ProblemOverrides o;
    o.mesh = Mesh(8, 4, 2);
    const auto s = build_problem(id, Preset::k3d, o);
    FeSystem fe(s.mesh, s.material, s.load, s.solver);
    const std::vector<double> e(s.mesh.element_count(), 0.064);
    CHECK(fe.compliance(fe.solve(e)) > 0.0);
  }
}

TEST_CASE("L-bracket void region") {
  const auto s = build_problem(ProblemId::kLBracket, Preset::kLong);
  int count = 0;
  for (auto v : s.passive) count += v;
  CHECK(count == 48 * 24);
  const Mesh& m = s.mesh;
  CHECK(s.passive[m.element_index(119, 59)] == 1);
  CHECK(s.passive[m.element_index(72, 36)] == 1);
  CHECK(s.passive[m.element_index(71, 59)] == 0);
  CHECK(s.passive[m.element_index(119, 35)] == 0);
  ProblemOverrides tiny;
  tiny.mesh = Mesh(2, 1);
  CHECK_THROWS_AS(build_problem(ProblemId::kLBracket, Preset::kFast, tiny), InvalidArgument);
}

TEST_CASE("names and errors") {
  for (auto id : {ProblemId::kCantilever, ProblemId::kMbb, ProblemId::kLBracket,
                  ProblemId::kCantilever3d, ProblemId::kMbb3d}) {
    CHECK(problem_from_string(to_string(id)) == id);
  }
  for (auto p : {Preset::kFast, Preset::kLong, Preset::kHard, Preset::k3d}) {
    CHECK(preset_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(problem_from_string("bridge"), UnknownProblem);
  CHECK_THROWS_AS(preset_from_string("huge"), UnknownProblem);
  CHECK_THROWS_AS(build_problem(ProblemId::kMbb, Preset::kHard), UnknownProblem);
  CHECK_THROWS_AS(build_problem(ProblemId::kCantilever3d, Preset::kFast), UnknownProblem);
  ProblemOverrides o;
  o.mesh = Mesh(4, 4, 4);
  CHECK_THROWS_AS(build_problem(ProblemId::kCantilever, Preset::kFast, o), InvalidArgument);
  o = {};
  o.iterations = 0;
  CHECK_THROWS_AS(build_problem(ProblemId::kCantilever, Preset::kFast, o), InvalidArgument);
}

TEST_CASE("overrides") {
  ProblemOverrides o;
  o.mesh = Mesh(16, 8, 4);
  o.iterations = 60;
  LinearSolveConfig direct;
  o.solver = direct;
  const auto s = build_problem(ProblemId::kCantilever3d, Preset::k3d, o);
  CHECK(s.mesh == Mesh(16, 8, 4));
  CHECK(s.iterations == 60);
  CHECK(s.solver.mode == SolveMode::kDirect);
}
