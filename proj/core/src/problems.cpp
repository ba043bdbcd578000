#include "topoctl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topoctl/errors.hpp"

namespace topoctl {

std::string_view to_string(ProblemId id) {
  switch (id) {
    case ProblemId::kCantilever: return "cantilever";
    case ProblemId::kMbb: return "mbb";
    case ProblemId::kLBracket: return "lbracket";
    case ProblemId::kCantilever3d: return "cantilever3d";
    case ProblemId::kMbb3d: return "mbb3d";
  }
  return "unknown";
}

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::kFast: return "fast";
    case Preset::kLong: return "long";
    case Preset::kHard: return "hard";
    case Preset::k3d: return "3d";
  }
  return "unknown";
}

ProblemId problem_from_string(std::string_view name) {
  for (auto id : {ProblemId::kCantilever, ProblemId::kMbb, ProblemId::kLBracket,
                  ProblemId::kCantilever3d, ProblemId::kMbb3d}) {
    if (name == to_string(id)) return id;
  }
  throw UnknownProblem("unknown problem '" + std::string(name) + "'");
}

Preset preset_from_string(std::string_view name) {
  for (auto p : {Preset::kFast, Preset::kLong, Preset::kHard, Preset::k3d}) {
    if (name == to_string(p)) return p;
  }
  throw UnknownProblem("unknown preset '" + std::string(name) + "'");
}

namespace {

bool is_3d(ProblemId id) { return id == ProblemId::kCantilever3d || id == ProblemId::kMbb3d; }

bool preset_allowed(ProblemId id, Preset preset) {
  switch (id) {
    case ProblemId::kCantilever:
      return preset == Preset::kFast || preset == Preset::kLong || preset == Preset::kHard;
    case ProblemId::kMbb:
    case ProblemId::kLBracket:
      return preset == Preset::kFast || preset == Preset::kLong;
    case ProblemId::kCantilever3d:
    case ProblemId::kMbb3d:
      return preset == Preset::k3d;
  }
  return false;
}

struct PresetRow {
  Mesh mesh;
  int iterations;
};

PresetRow preset_row(Preset preset) {
  switch (preset) {
    case Preset::kFast: return {Mesh(60, 30), 100};
    case Preset::kLong: return {Mesh(120, 60), 300};
    case Preset::kHard: return {Mesh(180, 90), 300};
    case Preset::k3d: return {Mesh(40, 20, 10), 300};
  }
  throw UnknownProblem("unknown preset");
}

void fix(LoadCase& load, const Mesh& m, int node, int component) {
  load.fixed_dofs.push_back(node * m.dim() + component);
}

void fix_all(LoadCase& load, const Mesh& m, int node) {
  for (int c = 0; c < m.dim(); ++c) fix(load, m, node, c);
}

void add_force(LoadCase& load, const Mesh& m, int node, int component, double value) {
  load.forces[node * m.dim() + component] += value;
}

}  // namespace

ProblemSpec build_problem(ProblemId id, Preset preset, const ProblemOverrides& overrides) {
  if (!preset_allowed(id, preset)) {
    throw UnknownProblem("no preset '" + std::string(to_string(preset)) + "' for problem '" +
                         std::string(to_string(id)) + "'");
  }
  ProblemSpec spec;
  spec.id = id;
  spec.preset = preset;
  const PresetRow row = preset_row(preset);
  spec.mesh = overrides.mesh.value_or(row.mesh);
  spec.iterations = overrides.iterations.value_or(row.iterations);
  if (spec.iterations < 1) throw InvalidArgument("iteration budget must be positive");
  if ((spec.mesh.dim() == 3) != is_3d(id)) {
    throw InvalidArgument("mesh override dimension does not match problem");
  }

  const Mesh& m = spec.mesh;
  spec.passive.assign(m.element_count(), 0);
  LoadCase& load = spec.load;

  switch (id) {
    case ProblemId::kCantilever: {
      for (int j = 0; j <= m.ny; ++j) fix_all(load, m, m.node_index(0, j));
      add_force(load, m, m.node_index(m.nx, m.ny / 2), 1, -1.0);
      break;
    }
    case ProblemId::kMbb: {
      for (int j = 0; j <= m.ny; ++j) fix(load, m, m.node_index(0, j), 0);
      fix(load, m, m.node_index(m.nx, 0), 1);
      add_force(load, m, m.node_index(0, m.ny), 1, -1.0);
      break;
    }
    case ProblemId::kLBracket: {
      const int void_x = static_cast<int>(std::lround(0.4 * m.nx));
      const int void_y = static_cast<int>(std::lround(0.4 * m.ny));
      if (void_x < 1 || void_y < 1 || void_x >= m.nx || void_y >= m.ny) {
        throw InvalidArgument("mesh too small for the L-bracket geometry");
      }
      for (int j = m.ny - void_y; j < m.ny; ++j) {
        for (int i = m.nx - void_x; i < m.nx; ++i) spec.passive[m.element_index(i, j)] = 1;
      }
      for (int i = 0; i <= m.nx - void_x; ++i) fix_all(load, m, m.node_index(i, m.ny));
      add_force(load, m, m.node_index(m.nx, m.ny - void_y), 1, -1.0);
      break;
    }
    case ProblemId::kCantilever3d: {
      for (int k = 0; k <= m.nz; ++k) {
        for (int j = 0; j <= m.ny; ++j) fix_all(load, m, m.node_index(0, j, k));
      }
      for (int k = 0; k <= m.nz; ++k) {
        add_force(load, m, m.node_index(m.nx, m.ny / 2, k), 1, -1.0 / (m.nz + 1));
      }
      break;
    }
    case ProblemId::kMbb3d: {
      for (int k = 0; k <= m.nz; ++k) {
        for (int j = 0; j <= m.ny; ++j) fix(load, m, m.node_index(0, j, k), 0);
      }
      for (int k = 0; k <= m.nz; ++k) {
        fix(load, m, m.node_index(m.nx, 0, k), 1);
        fix(load, m, m.node_index(m.nx, 0, k), 2);
      }
      for (int k = 0; k <= m.nz; ++k) {
        add_force(load, m, m.node_index(0, m.ny, k), 1, -1.0 / (m.nz + 1));
      }
      break;
    }
  }
  std::sort(load.fixed_dofs.begin(), load.fixed_dofs.end());
  load.fixed_dofs.erase(std::unique(load.fixed_dofs.begin(), load.fixed_dofs.end()),
                        load.fixed_dofs.end());

  if (overrides.solver) {
    spec.solver = *overrides.solver;
  } else if (is_3d(id)) {
    spec.solver.mode = SolveMode::kPcg;
  }
  return spec;
}

}  // namespace topoctl
