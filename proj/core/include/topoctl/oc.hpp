#pragma once

#include <span>

#include "topoctl/three_field.hpp"

namespace topoctl {

struct OcConfig {
  double damping = 0.5;
  double bisection_tolerance = 1e-6;  // relative volume error
  double lambda_low = 1e-9;
  double lambda_high = 1e9;
  double move_limit = 0.2;
  int bracket_expansions = 3;
  int max_bisections = 200;

  void validate() const;
};

struct OcResult {
  DensityField rho;
  double lambda = 0.0;
  double volume = 0.0;           // physical volume fraction of the new design
  bool volume_feasible = true;   // false: move/box limits kept V_f out of reach
  int bisections = 0;
};

/// Multiplicative optimality-criteria update
///   rho_new = clamp(rho * B^damping, max(0, rho - move), min(1, rho + move)),
///   B_e = -dC/drho_e / (lambda dV/drho_e),
/// with lambda found by bisection so the physical volume fraction (after the
/// pipeline's filter and projection) matches `volume_target`. dV/drho is
/// chained through `pipeline` at the current design. Passive elements stay 0.
OcResult oc_step(const DensityField& rho, std::span<const double> dc_drho,
                 const DesignPipeline& pipeline, double volume_target, const OcConfig& cfg);

}  // namespace topoctl
