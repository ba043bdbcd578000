#include "topoctl/params.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topoctl/errors.hpp"
#include "topoctl/run_state.hpp"

namespace topoctl {

bool within_bounds(const SolverParams& p) {
  return p.p >= bounds::kPMin && p.p <= bounds::kPMax && p.beta >= bounds::kBetaMin &&
         p.beta <= bounds::kBetaMax && p.r_min >= bounds::kRMinMin &&
         p.r_min <= bounds::kRMinMax && p.move >= bounds::kMoveMin &&
         p.move <= bounds::kMoveMax;
}

SolverParams clamp_to_bounds(SolverParams p) {
  p.p = std::clamp(p.p, bounds::kPMin, bounds::kPMax);
  p.beta = std::clamp(p.beta, bounds::kBetaMin, bounds::kBetaMax);
  p.r_min = std::clamp(p.r_min, bounds::kRMinMin, bounds::kRMinMax);
  p.move = std::clamp(p.move, bounds::kMoveMin, bounds::kMoveMax);
  return p;
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kFixed: return "fixed";
    case ControllerKind::kThreeField: return "three_field";
    case ControllerKind::kExpert: return "expert";
    case ControllerKind::kScheduleOnly: return "schedule_only";
    case ControllerKind::kTailOnly: return "tail_only";
    case ControllerKind::kLlmAgent: return "llm_agent";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(std::string_view name) {
  for (auto kind : {ControllerKind::kFixed, ControllerKind::kThreeField, ControllerKind::kExpert,
                    ControllerKind::kScheduleOnly, ControllerKind::kTailOnly,
                    ControllerKind::kLlmAgent}) {
    if (name == to_string(kind)) return kind;
  }
  throw InvalidArgument("unknown controller '" + std::string(name) + "'");
}

bool receives_tail(ControllerKind kind) { return kind != ControllerKind::kFixed; }

const AdvisoryStage& advisory_stage_at(double f) {
  for (const auto& stage : kAdvisoryStages) {
    if (f < stage.budget_end && stage.index < 4) return stage;
  }
  return kAdvisoryStages[3];
}

bool snapshot_valid(const SolverParams& params, double volume, double volume_target) {
  return params.p >= kValidityMinP &&
         std::abs(volume - volume_target) <= kValidityVolumeTolerance;
}

}  // namespace topoctl
