#include "topoctl/oc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "topoctl/errors.hpp"

namespace topoctl {

void OcConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("OC damping must lie in (0, 1]");
  if (!(bisection_tolerance > 0.0)) throw InvalidArgument("bisection tolerance must be positive");
  if (!(lambda_low > 0.0 && lambda_low < lambda_high)) {
    throw InvalidArgument("OC multiplier bracket must be positive and ordered");
  }
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw InvalidArgument("move limit must lie in (0, 1]");
}

OcResult oc_step(const DensityField& rho, std::span<const double> dc_drho,
                 const DesignPipeline& pipeline, double volume_target, const OcConfig& cfg) {
  cfg.validate();
  const std::size_t n = rho.size();
  if (dc_drho.size() != n) throw InvalidArgument("sensitivity length differs from design");
  if (!(volume_target > 0.0 && volume_target < 1.0)) {
    throw InvalidArgument("volume target must lie in (0, 1)");
  }

  // dV/drho through the same chain as the objective.
  const PhysicalFields fields = pipeline.forward(rho);
  const std::vector<double> unit(n, 1.0 / static_cast<double>(n));
  const std::vector<double> dv = pipeline.backward(fields, unit);

  std::vector<double> lower(n), upper(n), ratio(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (pipeline.is_passive(e)) {
      lower[e] = upper[e] = 0.0;
      ratio[e] = 0.0;
      continue;
    }
    lower[e] = std::max(0.0, rho.values[e] - cfg.move_limit);
    upper[e] = std::min(1.0, rho.values[e] + cfg.move_limit);
    const double gain = std::max(0.0, -dc_drho[e]);
    ratio[e] = dv[e] > 0.0 ? gain / dv[e] : 0.0;
  }

  DensityField candidate(rho.mesh, 0.0);
  auto update = [&](double lambda) {
    for (std::size_t e = 0; e < n; ++e) {
      const double b = ratio[e] / lambda;
      const double x = rho.values[e] * std::pow(b, cfg.damping);
      candidate.values[e] = std::clamp(x, lower[e], upper[e]);
    }
    return pipeline.physical_volume(candidate);
  };

  OcResult out;
  const double tol = cfg.bisection_tolerance * volume_target;

  // Extremes reachable under the move/box limits.
  DensityField extreme(rho.mesh, std::vector<double>(upper));
  const double v_max = pipeline.physical_volume(extreme);
  extreme.values = lower;
  const double v_min = pipeline.physical_volume(extreme);
  if (volume_target >= v_max - tol || volume_target <= v_min + tol) {
    const bool take_upper = volume_target >= v_max - tol;
    out.rho = DensityField(rho.mesh, take_upper ? upper : lower);
    out.volume = take_upper ? v_max : v_min;
    out.volume_feasible = std::abs(out.volume - volume_target) <= tol;
    out.lambda = take_upper ? 0.0 : HUGE_VAL;
    return out;
  }

  double lo = cfg.lambda_low;
  double hi = cfg.lambda_high;
  double v_lo = update(lo);
  double v_hi = update(hi);
  for (int k = 0; k < cfg.bracket_expansions && !(v_lo >= volume_target && v_hi <= volume_target);
       ++k) {
    if (v_lo < volume_target) v_lo = update(lo /= 10.0);
    if (v_hi > volume_target) v_hi = update(hi *= 10.0);
  }
  if (!(v_lo >= volume_target && v_hi <= volume_target)) {
    std::ostringstream os;
    os << "OC bisection bracket [" << lo << ", " << hi << "] gives volumes [" << v_hi << ", "
       << v_lo << "] which do not enclose the target " << volume_target;
    throw BisectionFailure(os.str());
  }

  double best_lambda = lo;
  double best_volume = v_lo;
  for (int it = 0; it < cfg.max_bisections; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double v = update(mid);
    ++out.bisections;
    if (std::abs(v - volume_target) < std::abs(best_volume - volume_target)) {
      best_lambda = mid;
      best_volume = v;
    }
    if (std::abs(v - volume_target) <= tol) break;
    if (v > volume_target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 < 1e-15) break;
  }
  out.volume = update(best_lambda);
  out.lambda = best_lambda;
  out.rho = candidate;
  out.volume_feasible = std::abs(out.volume - volume_target) <= tol;
  return out;
}

}  // namespace topoctl
