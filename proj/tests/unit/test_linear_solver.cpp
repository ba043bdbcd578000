#include <doctest.h>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "topoctl/errors.hpp"
#include "topoctl/linear_solver.hpp"
#include "topoctl/problems.hpp"

using namespace topoctl;

namespace {

// 1-D Laplacian with a positive shift, SPD.
Eigen::SparseMatrix<double> laplacian(int n, double shift) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0 + shift);
    if (i > 0) t.emplace_back(i, i - 1, -1.0);
    if (i + 1 < n) t.emplace_back(i, i + 1, -1.0);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

TEST_CASE("config validation") {
  LinearSolveConfig c;
  CHECK_NOTHROW(c.validate());
  c.cg_tolerance = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.cg_max_iters = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.precond_rebuild_threshold = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("Jacobi PCG on a small SPD system") {
  const auto a = laplacian(50, 0.01);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(50, -1.0, 2.0);
  JacobiPreconditioner m;
  m.build(a);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(50);
  const auto r = preconditioned_cg(a, b, m, x, 1e-12, 500);
  CHECK(r.converged);
  const Eigen::VectorXd ref = Eigen::MatrixXd(a).ldlt().solve(b);
  CHECK((x - ref).norm() / ref.norm() < 1e-10);
  CHECK(r.relative_residual <= 1e-12);

  // warm start at the solution needs no iterations
  Eigen::VectorXd warm = ref;
  CHECK(preconditioned_cg(a, b, m, warm, 1e-8, 500).iterations == 0);

  Eigen::VectorXd cold = Eigen::VectorXd::Zero(50);
  CHECK_FALSE(preconditioned_cg(a, b, m, cold, 1e-12, 3).converged);
}

TEST_CASE("Jacobi spectral radius estimate") {
  const auto a = laplacian(40, 0.0);
  const Eigen::VectorXd inv = Eigen::VectorXd::Constant(40, 0.5);
  // eigenvalues of D^-1 A are 1 - cos(k pi / 41), max close to 2
  const double rho = estimate_jacobi_spectral_radius(a, inv, 200);
  CHECK(rho == doctest::Approx(1.0 + std::cos(M_PI / 41.0)).epsilon(1e-2));
}

TEST_CASE("two-level preconditioner is SPD and effective") {
  ProblemOverrides o;
  o.mesh = Mesh(24, 12);
  const ProblemSpec spec = build_problem(ProblemId::kCantilever, Preset::kFast, o);
  FeSystem fe(spec.mesh, spec.material, spec.load);
  const Eigen::SparseMatrix<double> a =
      fe.assemble(simp_moduli(testing::random_values(spec.mesh.element_count(), 13), 3.0, spec.material));
  const int n = static_cast<int>(a.rows());
  const Eigen::VectorXd b = Eigen::VectorXd::Random(n);

  auto pcg_iterations = [&](PreconditionerKind kind) {
    LinearSolveConfig cfg;
    cfg.mode = SolveMode::kPcg;
    cfg.preconditioner = kind;
    FeSystem sys(spec.mesh, spec.material, spec.load, cfg);
    const auto rho = testing::random_values(spec.mesh.element_count(), 13);
    sys.solve(simp_moduli(rho, 3.0, spec.material));
    return sys.stats().cg_iterations_last;
  };
  const int jacobi = pcg_iterations(PreconditionerKind::kJacobi);
  const int two_level = pcg_iterations(PreconditionerKind::kTwoLevel);
  CHECK(two_level < jacobi);

  // symmetry of the preconditioner action: x^T M y == y^T M x
  std::vector<int> agg(n), comp(n);
  for (int i = 0; i < n; ++i) {
    agg[i] = (i / 2) / 8;
    comp[i] = i % 2;
  }
  TwoLevelPreconditioner m(agg, comp);
  m.build(a);
  CHECK(m.coarse_size() > 0);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(n);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(n);
  Eigen::VectorXd mx, my;
  m.apply(x, mx);
  m.apply(y, my);
  CHECK(y.dot(mx) == doctest::Approx(x.dot(my)).epsilon(1e-8));
  CHECK(x.dot(mx) > 0.0);
  CHECK(y.dot(my) > 0.0);

  Eigen::VectorXd sol = Eigen::VectorXd::Zero(n);
  const auto r = preconditioned_cg(a, b, m, sol, 1e-10, 2000);
  CHECK(r.converged);
  CHECK((a * sol - b).norm() / b.norm() <= 1e-10);
}

TEST_CASE("make_preconditioner") {
  CHECK(dynamic_cast<JacobiPreconditioner*>(
            make_preconditioner(PreconditionerKind::kJacobi, {}, {}).get()) != nullptr);
  CHECK(dynamic_cast<TwoLevelPreconditioner*>(
            make_preconditioner(PreconditionerKind::kTwoLevel, {0, 0}, {0, 1}).get()) != nullptr);
}
