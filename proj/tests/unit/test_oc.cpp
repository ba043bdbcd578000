#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "topoctl/errors.hpp"
#include "topoctl/oc.hpp"

using namespace topoctl;

namespace {

// Classic 88-line OC update with arithmetic bisection, no filter or projection.
std::vector<double> reference_oc(const std::vector<double>& x, const std::vector<double>& dc,
                                 double volfrac, double move) {
  const double n = double(x.size());
  double l1 = 0.0, l2 = 1e9;
  std::vector<double> xnew(x.size());
  while ((l2 - l1) / (l1 + l2) > 1e-12) {
    const double lmid = 0.5 * (l2 + l1);
    double sum = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double b = std::sqrt(-dc[e] / (1.0 / n) / lmid);
      xnew[e] = std::max(0.0, std::max(x[e] - move, std::min(1.0, std::min(x[e] + move, x[e] * b))));
      sum += xnew[e];
    }
    if (sum / n > volfrac) l1 = lmid; else l2 = lmid;
  }
  return xnew;
}

}  // namespace

TEST_CASE("matches the reference update without filtering") {
  const Mesh m(12, 6);
  const auto rho = testing::random_values(m.element_count(), 3, 0.2, 0.6);
  const auto dc = testing::random_values(m.element_count(), 4, -5.0, -0.1);
  OcConfig cfg;
  cfg.bisection_tolerance = 1e-10;
  const auto r = oc_step(DensityField(m, rho), dc, DesignPipeline::identity(), 0.4, cfg);
  CHECK(r.volume_feasible);
  CHECK(r.volume == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(testing::max_abs_diff(r.rho.values, reference_oc(rho, dc, 0.4, 0.2)) < 1e-7);
}

TEST_CASE("hits the physical volume through filter and projection") {
  const Mesh m(20, 10);
  const auto k = build_filter(m, 1.5);
  const DesignPipeline pipe(&k, ProjectionParams{4.0, 0.5});
  const auto rho = testing::random_field(m, 5, 0.3, 0.5);
  const auto dc = testing::random_values(m.element_count(), 6, -3.0, -0.01);
  OcConfig cfg;
  const auto r = oc_step(rho, dc, pipe, 0.4, cfg);
  CHECK(r.volume_feasible);
  CHECK(std::abs(pipe.physical_volume(r.rho) - 0.4) <= 1e-6 * 0.4 * 1.0001);
  CHECK(r.bisections > 0);
}

TEST_CASE("move and box limits") {
  const Mesh m(10, 10);
  const auto rho = testing::random_values(m.element_count(), 7, 0.0, 1.0);
  const auto dc = testing::random_values(m.element_count(), 8, -100.0, -1e-6);
  for (double move : {0.03, 0.1, 0.4}) {
    OcConfig cfg;
    cfg.move_limit = move;
    const auto r = oc_step(DensityField(m, rho), dc, DesignPipeline::identity(), 0.5, cfg);
    for (std::size_t e = 0; e < rho.size(); ++e) {
      CHECK(std::abs(r.rho.values[e] - rho[e]) <= move + 1e-15);
      CHECK(r.rho.values[e] >= 0.0);
      CHECK(r.rho.values[e] <= 1.0);
    }
  }
}

TEST_CASE("passive elements stay void") {
  const Mesh m(8, 8);
  std::vector<std::uint8_t> passive(m.element_count(), 0);
  for (int e = 0; e < 16; ++e) passive[e] = 1;
  const auto k = build_filter(m, 1.5);
  const DesignPipeline pipe(&k, ProjectionParams{2.0, 0.5}, passive);
  const auto rho = testing::random_field(m, 9, 0.2, 0.6);
  const auto dc = testing::random_values(m.element_count(), 10, -2.0, -0.5);
  const auto r = oc_step(rho, dc, pipe, 0.35, OcConfig{});
  for (int e = 0; e < 16; ++e) CHECK(r.rho.values[e] == 0.0);
  CHECK(r.volume_feasible);
}

TEST_CASE("unreachable target is flagged") {
  const Mesh m(5, 5);
  const DensityField rho(m, 0.1);
  const std::vector<double> dc(m.element_count(), -1.0);
  OcConfig cfg;
  cfg.move_limit = 0.05;
  const auto r = oc_step(rho, dc, DesignPipeline::identity(), 0.5, cfg);
  CHECK_FALSE(r.volume_feasible);
  for (double v : r.rho.values) CHECK(v == doctest::Approx(0.15));
  const auto low = oc_step(DensityField(m, 0.9), dc, DesignPipeline::identity(), 0.5, cfg);
  CHECK_FALSE(low.volume_feasible);
  for (double v : low.rho.values) CHECK(v == doctest::Approx(0.85));
}

TEST_CASE("stronger sensitivity receives more material") {
  const Mesh m(2, 1);
  const DensityField rho(m, 0.5);
  const std::vector<double> dc{-4.0, -1.0};
  const auto r = oc_step(rho, dc, DesignPipeline::identity(), 0.5, OcConfig{});
  CHECK(r.rho.values[0] > r.rho.values[1]);
  CHECK(r.rho.values[0] + r.rho.values[1] == doctest::Approx(1.0).epsilon(1e-6));
  // damping 0.5: x_e proportional to sqrt(-dc_e) away from the limits
  CHECK(r.rho.values[0] / r.rho.values[1] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("invalid arguments") {
  const Mesh m(2, 2);
  const DensityField rho(m, 0.5);
  const std::vector<double> dc(4, -1.0);
  OcConfig cfg;
  CHECK_THROWS_AS(oc_step(rho, std::vector<double>(3, -1.0), DesignPipeline::identity(), 0.5, cfg),
                  InvalidArgument);
  CHECK_THROWS_AS(oc_step(rho, dc, DesignPipeline::identity(), 1.5, cfg), InvalidArgument);
  cfg.damping = 0.0;
  CHECK_THROWS_AS(oc_step(rho, dc, DesignPipeline::identity(), 0.5, cfg), InvalidArgument);
}
