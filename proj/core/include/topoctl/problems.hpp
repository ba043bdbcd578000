#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "topoctl/fem.hpp"

namespace topoctl {

enum class ProblemId { kCantilever, kMbb, kLBracket, kCantilever3d, kMbb3d };
enum class Preset { kFast, kLong, kHard, k3d };

std::string_view to_string(ProblemId id);
std::string_view to_string(Preset preset);
ProblemId problem_from_string(std::string_view name);
Preset preset_from_string(std::string_view name);

/// Optional deviations from a preset, e.g. reduced meshes for tests.
struct ProblemOverrides {
  std::optional<Mesh> mesh;
  std::optional<int> iterations;
  std::optional<LinearSolveConfig> solver;

  bool operator==(const ProblemOverrides&) const = default;
};

struct ProblemSpec {
  ProblemId id = ProblemId::kCantilever;
  Preset preset = Preset::kFast;
  Mesh mesh;
  int iterations = 0;  // N, main-loop budget
  double volume_fraction = 0.40;
  Material material;
  LoadCase load;
  std::vector<std::uint8_t> passive;  // 1 = forced void
  LinearSolveConfig solver;
};

/// Geometry, supports and loads (unit element size, unit total load):
///   cantilever    left edge clamped, downward load at right edge mid-height
///   mbb           half beam: symmetry (ux = 0) on the left edge, roller (uy = 0)
///                 at the bottom-right corner, downward load at the top-left corner
///   lbracket      upper-right 2/5 x 2/5 of the box is void; top edge of the
///                 vertical limb clamped; downward load at the upper corner of
///                 the horizontal limb's free end
///   cantilever3d  x = 0 face clamped, downward line load along z at the
///                 free end mid-height
///   mbb3d         symmetry face x = 0, roller line (uy = uz = 0) along the
///                 bottom far edge, downward line load along the top edge at x = 0
ProblemSpec build_problem(ProblemId id, Preset preset, const ProblemOverrides& overrides = {});

}  // namespace topoctl
