#include "topoctl/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "topoctl/errors.hpp"

namespace topoctl {

namespace {

// beta = 2 at `start`, doubling every `period` iterations, capped at 64.
double doubling_beta(int iteration, int start, int period) {
  if (iteration < start) return 1.0;
  const int doublings = (iteration - start) / period;
  return std::min(bounds::kBetaMax, std::ldexp(2.0, std::min(doublings, 10)));
}

constexpr int kRampIterations = 30;
constexpr int kBetaPeriod = 10;

}  // namespace

ControllerAction decide_fixed(int /*iteration*/) {
  return {SolverParams{3.0, 1.0, 1.5, 0.2}, false, "fixed"};
}

ControllerAction decide_three_field(int iteration, int budget) {
  if (budget <= 0) throw InvalidArgument("budget must be positive");
  ControllerAction a;
  a.params.p = std::min(4.5, 1.0 + 3.5 * iteration / double(kRampIterations));
  a.params.beta = doubling_beta(iteration, kRampIterations, kBetaPeriod);
  const double late = (iteration - 0.75 * budget) / (0.25 * budget);
  a.params.r_min = 1.5 - 0.3 * std::clamp(late, 0.0, 1.0);
  a.params.move = 0.2;
  a.note = "three_field";
  return a;
}

ControllerAction decide_expert(int iteration, std::optional<double> current_compliance,
                               std::optional<double> best_valid_compliance) {
  ControllerAction a;
  a.params.p = std::min(4.5, 1.0 + 0.75 * (iteration / 10));
  // First multiple of 10 at which the step ramp reaches p >= 3.
  const int sharpen_from = 10 * static_cast<int>(std::ceil((3.0 - 1.0) / 0.75));
  a.params.beta = doubling_beta(iteration, sharpen_from, kBetaPeriod);
  a.params.r_min = 1.5;
  a.params.move = 0.2;
  a.restart = current_compliance && best_valid_compliance &&
              *current_compliance > kExpertRestartRatio * *best_valid_compliance;
  a.note = a.restart ? "expert: compliance spike, restart" : "expert";
  return a;
}

SolverParams schedule_at_fraction(double f) {
  f = std::clamp(f, 0.0, 1.0);
  const AdvisoryStage& s = advisory_stage_at(f);
  const double within = std::clamp((f - s.budget_begin) / (s.budget_end - s.budget_begin), 0.0, 1.0);
  SolverParams p;
  p.p = s.p_begin + (s.p_end - s.p_begin) * within;
  const int doublings = static_cast<int>(std::lround(std::log2(s.beta_end / s.beta_begin)));
  const int step = std::min(doublings, static_cast<int>(std::floor(within * (doublings + 1) + 1e-9)));
  p.beta = std::ldexp(s.beta_begin, step);
  p.r_min = s.r_min;
  p.move = s.move;
  return p;
}

ControllerAction decide_schedule_only(int iteration, int budget) {
  if (budget <= 0) throw InvalidArgument("budget must be positive");
  return {schedule_at_fraction(static_cast<double>(iteration) / budget), false, "schedule_only"};
}

ControllerAction decide_tail_only(int /*iteration*/) {
  return {SolverParams{1.0, 1.0, 1.5, 0.2}, false, "tail_only"};
}

namespace {

class FixedController final : public Controller {
 public:
  ControllerKind kind() const override { return ControllerKind::kFixed; }
  ControllerAction decide(const RunState& s) override { return decide_fixed(s.iteration); }
};

class ThreeFieldController final : public Controller {
 public:
  ControllerKind kind() const override { return ControllerKind::kThreeField; }
  ControllerAction decide(const RunState& s) override {
    return decide_three_field(s.iteration, s.budget);
  }
};

class ExpertController final : public Controller {
 public:
  ControllerKind kind() const override { return ControllerKind::kExpert; }
  ControllerAction decide(const RunState& s) override {
    return decide_expert(s.iteration, s.current_compliance(), s.best_valid_compliance());
  }
};

class ScheduleOnlyController final : public Controller {
 public:
  ControllerKind kind() const override { return ControllerKind::kScheduleOnly; }
  ControllerAction decide(const RunState& s) override {
    return decide_schedule_only(s.iteration, s.budget);
  }
};

class TailOnlyController final : public Controller {
 public:
  ControllerKind kind() const override { return ControllerKind::kTailOnly; }
  ControllerAction decide(const RunState& s) override { return decide_tail_only(s.iteration); }
};

}  // namespace

std::unique_ptr<Controller> make_deterministic_controller(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kFixed: return std::make_unique<FixedController>();
    case ControllerKind::kThreeField: return std::make_unique<ThreeFieldController>();
    case ControllerKind::kExpert: return std::make_unique<ExpertController>();
    case ControllerKind::kScheduleOnly: return std::make_unique<ScheduleOnlyController>();
    case ControllerKind::kTailOnly: return std::make_unique<TailOnlyController>();
    case ControllerKind::kLlmAgent: break;
  }
  throw InvalidArgument("the LLM agent is not a deterministic controller");
}

}  // namespace topoctl
