#include <doctest.h>

#include <cmath>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "test_support.hpp"
#include "topoctl/errors.hpp"
#include "topoctl/three_field.hpp"

using namespace topoctl;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// O(n^2) filter straight from the definition.
std::vector<double> brute_filter(const Mesh& m, double r, const std::vector<double>& rho) {
  const int n = m.element_count();
  std::vector<double> out(n);
  for (int e = 0; e < n; ++e) {
    const auto ce = m.centroid(e);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto ci = m.centroid(i);
      const double d = std::sqrt((ce[0] - ci[0]) * (ce[0] - ci[0]) + (ce[1] - ci[1]) * (ce[1] - ci[1]) +
                                 (ce[2] - ci[2]) * (ce[2] - ci[2]));
      const double h = std::max(0.0, r - d);
      num += h * rho[i];
      den += h;
    }
    out[e] = num / den;
  }
  return out;
}

double heaviside_reference(double x, double beta, double eta) {
  const Big b(beta), n(eta), v(x);
  const Big num = tanh(b * n) + tanh(b * (v - n));
  const Big den = tanh(b * n) + tanh(b * (Big(1) - n));
  return static_cast<double>(num / den);
}

// 2x2 windows counted by hand, 2-D only.
double brute_checkerboard(const Mesh& m, const std::vector<double>& v) {
  int windows = 0, hits = 0;
  for (int j = 0; j + 1 < m.ny; ++j) {
    for (int i = 0; i + 1 < m.nx; ++i) {
      ++windows;
      const bool a = v[j * m.nx + i] > 0.5, b = v[j * m.nx + i + 1] > 0.5;
      const bool c = v[(j + 1) * m.nx + i] > 0.5, d = v[(j + 1) * m.nx + i + 1] > 0.5;
      if (a != b && a != c && a == d) ++hits;
    }
  }
  return double(hits) / windows;
}

}  // namespace

TEST_CASE("filter matches the brute-force definition") {
  for (const Mesh& m : {Mesh(9, 5), Mesh(4, 3, 3)}) {
    for (double r : {0.5, 1.1, 1.5, 2.0, 2.7, 4.0}) {
      const auto rho = testing::random_values(m.element_count(), 21);
      const auto k = build_filter(m, r);
      const auto got = apply_filter(k, DensityField(m, rho));
      CHECK(testing::max_abs_diff(got.values, brute_filter(m, r, rho)) < 1e-14);
    }
  }
}

TEST_CASE("filter basics") {
  const Mesh m(7, 4);
  const auto k = build_filter(m, 1.5);
  // a constant field is unchanged
  const auto c = apply_filter(k, DensityField(m, 0.37));
  for (double v : c.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  // r <= 1 keeps only the element itself
  const auto rho = testing::random_values(m.element_count(), 2);
  CHECK(apply_filter(build_filter(m, 1.0), DensityField(m, rho)).values == rho);
  CHECK_THROWS_AS(build_filter(m, 0.0), InvalidArgument);
  CHECK_THROWS_AS(build_filter(m, -1.0), InvalidArgument);
}

TEST_CASE("filter transpose is the adjoint") {
  for (const Mesh& m : {Mesh(11, 6), Mesh(3, 4, 2)}) {
    const auto k = build_filter(m, 2.2);
    const auto x = testing::random_values(m.element_count(), 4, -1.0, 1.0);
    const auto y = testing::random_values(m.element_count(), 5, -1.0, 1.0);
    const auto fx = apply_filter(k, DensityField(m, x));
    const auto fty = apply_filter_transpose(k, y);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lhs += fx.values[i] * y[i];
      rhs += x[i] * fty[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("Heaviside projection against extended precision") {
  for (double beta : {1.0, 2.0, 8.0, 32.0, 64.0}) {
    const ProjectionParams pp{beta, 0.5};
    for (double x = 0.0; x <= 1.0; x += 0.03125) {
      CHECK(std::abs(heaviside(x, pp) - heaviside_reference(x, beta, 0.5)) < 1e-14);
    }
    CHECK(std::abs(heaviside(0.0, pp)) < 1e-15);
    CHECK(std::abs(heaviside(1.0, pp) - 1.0) < 1e-15);
    CHECK(heaviside(0.5, pp) == doctest::Approx(0.5));
  }
  // beta = 1 is close to the identity but not equal to it
  CHECK(heaviside(0.25, {1.0, 0.5}) == doctest::Approx(0.2350037).epsilon(1e-6));
  // other thresholds still fix the end points
  CHECK(std::abs(heaviside(1.0, {16.0, 0.3}) - 1.0) < 1e-15);
}

TEST_CASE("Heaviside derivative against central differences") {
  for (double beta : {1.0, 4.0, 32.0}) {
    const ProjectionParams pp{beta, 0.5};
    for (double x = 0.01; x < 1.0; x += 0.07) {
      const double h = 1e-6;
      const double fd = (heaviside(x + h, pp) - heaviside(x - h, pp)) / (2 * h);
      CHECK(heaviside_derivative(x, pp) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(heaviside_derivative(x, pp) > 0.0);
    }
  }
}

TEST_CASE("pipeline gradient against central differences") {
  const Mesh m(8, 5);
  const auto k = build_filter(m, 1.8);
  std::vector<std::uint8_t> passive(m.element_count(), 0);
  passive[7] = 1;
  const DesignPipeline pipe(&k, ProjectionParams{6.0, 0.5}, passive);
  const auto rho = testing::random_field(m, 8);
  const auto w = testing::random_values(m.element_count(), 9, -1.0, 1.0);
  auto objective = [&](const DensityField& r) {
    const auto f = pipe.forward(r);
    double s = 0.0;
    for (std::size_t e = 0; e < w.size(); ++e) s += w[e] * f.rho_tilde.values[e];
    return s;
  };
  const auto fields = pipe.forward(rho);
  CHECK(fields.rho_tilde.values[7] == 0.0);
  const auto grad = pipe.backward(fields, w);
  for (int i = 0; i < m.element_count(); ++i) {
    auto plus = rho, minus = rho;
    plus.values[i] += 1e-6;
    minus.values[i] -= 1e-6;
    const double fd = (objective(plus) - objective(minus)) / 2e-6;
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-8));
  }
}

TEST_CASE("identity pipeline") {
  const Mesh m(4, 4);
  const auto rho = testing::random_field(m, 1);
  const auto p = DesignPipeline::identity();
  const auto f = p.forward(rho);
  CHECK(f.rho_tilde == rho);
  CHECK(f.rho_bar == rho);
  CHECK(p.physical_volume(rho) == doctest::Approx(volume_fraction(rho)));
}

TEST_CASE("grayness and volume") {
  const Mesh m(4, 1);
  CHECK(grayness(DensityField(m, std::vector<double>{0, 1, 0, 1})) == 0.0);
  CHECK(grayness(DensityField(m, 0.5)) == doctest::Approx(1.0));
  CHECK(grayness(DensityField(m, std::vector<double>{0.5, 1, 0, 1})) == doctest::Approx(0.25));
  CHECK(volume_fraction(DensityField(m, std::vector<double>{0.2, 0.4, 0.6, 0.0})) ==
        doctest::Approx(0.3));
}

TEST_CASE("checkerboard index") {
  const Mesh m(6, 4);
  std::vector<double> checker(m.element_count());
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) checker[j * m.nx + i] = (i + j) % 2 ? 1.0 : 0.0;
  }
  CHECK(checkerboard_index(DensityField(m, checker)) == 1.0);
  CHECK(checkerboard_index(DensityField(m, 1.0)) == 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = testing::random_values(m.element_count(), seed, 0.0, 1.0);
    CHECK(checkerboard_index(DensityField(m, v)) == doctest::Approx(brute_checkerboard(m, v)));
  }
  // 3-D checkerboard counts all three plane families
  const Mesh h(3, 3, 3);
  std::vector<double> c3(h.element_count());
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) c3[h.element_index(i, j, k)] = (i + j + k) % 2 ? 1.0 : 0.0;
  CHECK(checkerboard_index(DensityField(h, c3)) == 1.0);
}

TEST_CASE("filter cache keys on the radius") {
  FilterCache cache(Mesh(10, 5));
  const auto& a = cache.get(1.5);
  const auto& b = cache.get(1.5 + 1e-14);
  CHECK(&a == &b);
  CHECK(cache.builds() == 1);
  cache.get(1.35);
  cache.get(1.5);
  CHECK(cache.builds() == 2);
}

TEST_CASE("density field size must match the mesh") {
  CHECK_THROWS_AS(DensityField(Mesh(2, 2), std::vector<double>(3, 0.5)), InvalidArgument);
}
