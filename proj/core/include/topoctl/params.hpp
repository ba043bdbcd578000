#pragma once

#include <string>
#include <string_view>

namespace topoctl {

/// The four continuation parameters a controller sets each decision step.
struct SolverParams {
  double p = 3.0;      ///< SIMP penalization exponent
  double beta = 1.0;   ///< Heaviside sharpness
  double r_min = 1.5;  ///< density filter radius, element units
  double move = 0.2;   ///< OC move limit

  bool operator==(const SolverParams&) const = default;
};

/// Admissible parameter ranges enforced on every committed action.
namespace bounds {
inline constexpr double kPMin = 1.0;
inline constexpr double kPMax = 5.0;
inline constexpr double kBetaMin = 1.0;
inline constexpr double kBetaMax = 64.0;
inline constexpr double kRMinMin = 1.1;
inline constexpr double kRMinMax = 4.0;
inline constexpr double kMoveMin = 0.03;
inline constexpr double kMoveMax = 0.40;
// Hard cap on beta while the design is still gray.
inline constexpr double kGatedBetaCap = 8.0;
}  // namespace bounds

bool within_bounds(const SolverParams& params);

/// Clamp every field into its admissible range.
SolverParams clamp_to_bounds(SolverParams params);

struct ControllerAction {
  SolverParams params;
  bool restart = false;
  std::string note;  // audit only, never read by the solver

  bool operator==(const ControllerAction&) const = default;
};

enum class ControllerKind {
  kFixed,
  kThreeField,
  kExpert,
  kScheduleOnly,
  kTailOnly,
  kLlmAgent,
};

std::string_view to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(std::string_view name);

/// Continuation controllers receive the standardized tail; fixed does not.
bool receives_tail(ControllerKind kind);

/// Parameters of the shared sharpening tail and its length.
inline constexpr SolverParams kTailParams{4.5, 32.0, 1.20, 0.05};
inline constexpr int kTailIterations = 40;

/// One row of the four-stage advisory schedule.
struct AdvisoryStage {
  int index;            // 1..4
  double budget_begin;  // fraction of N
  double budget_end;
  double p_begin;
  double p_end;
  double beta_begin;
  double beta_end;
  double r_min;
  double move;
};

inline constexpr AdvisoryStage kAdvisoryStages[4] = {
    {1, 0.00, 0.08, 1.0, 2.0, 1.0, 1.0, 1.50, 0.20},
    {2, 0.08, 0.50, 2.0, 4.5, 1.0, 4.0, 1.35, 0.15},
    {3, 0.50, 0.75, 4.5, 4.5, 4.0, 16.0, 1.25, 0.08},
    {4, 0.75, 1.00, 4.5, 4.5, 32.0, 32.0, 1.20, 0.05},
};

/// Stage containing budget fraction `f` (f >= 0.75 is always stage 4).
const AdvisoryStage& advisory_stage_at(double budget_fraction);

}  // namespace topoctl
