#pragma once

#include <memory>
#include <optional>

#include "topoctl/params.hpp"
#include "topoctl/run_state.hpp"

namespace topoctl {

/// Common interface of all continuation controllers. `due` says whether the
/// controller is consulted at an iteration; between decisions the last
/// committed action holds.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControllerKind kind() const = 0;
  virtual bool due(int iteration) const {
    (void)iteration;
    return true;
  }
  virtual ControllerAction decide(const RunState& state) = 0;
};

ControllerAction decide_fixed(int iteration);

/// p ramps 1.0 -> 4.5 over 30 iterations; beta = 2 at iteration 30 and
/// doubles every 10 iterations (cap 64); r_min ramps 1.50 -> 1.20 over the
/// final quarter of the budget; move 0.2.
ControllerAction decide_three_field(int iteration, int budget);

/// p = 1 + 0.75 floor(t/10) capped at 4.5; beta starts doubling from 2 at
/// the first iteration with p >= 3; restart when C > 1.12 C* and a valid
/// snapshot exists.
ControllerAction decide_expert(int iteration, std::optional<double> current_compliance,
                               std::optional<double> best_valid_compliance);

/// Advisory schedule executed open-loop by budget fraction.
ControllerAction decide_schedule_only(int iteration, int budget);

/// Schedule-only parameters at a budget fraction in [0, 1].
SolverParams schedule_at_fraction(double budget_fraction);

ControllerAction decide_tail_only(int iteration);

inline constexpr double kExpertRestartRatio = 1.12;

/// Factory for the deterministic kinds (everything except the LLM agent).
std::unique_ptr<Controller> make_deterministic_controller(ControllerKind kind);

}  // namespace topoctl
