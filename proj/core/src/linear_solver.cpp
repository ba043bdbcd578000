#include "topoctl/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "topoctl/errors.hpp"

namespace topoctl {

void LinearSolveConfig::validate() const {
  if (!(cg_tolerance > 0.0)) throw InvalidArgument("cg_tolerance must be positive");
  if (cg_max_iters < 1) throw InvalidArgument("cg_max_iters must be positive");
  if (!(precond_rebuild_threshold > 0.0 && precond_rebuild_threshold < 1.0)) {
    throw InvalidArgument("precond_rebuild_threshold must lie in (0, 1)");
  }
}

namespace {

Eigen::VectorXd inverse_diagonal(const Eigen::SparseMatrix<double>& a) {
  Eigen::VectorXd d = a.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw SingularSystem("non-positive diagonal entry in stiffness matrix");
    d[i] = 1.0 / d[i];
  }
  return d;
}

}  // namespace

void JacobiPreconditioner::build(const Eigen::SparseMatrix<double>& a) {
  inv_diag_ = inverse_diagonal(a);
}

void JacobiPreconditioner::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  z = inv_diag_.cwiseProduct(r);
}

double estimate_jacobi_spectral_radius(const Eigen::SparseMatrix<double>& a,
                                       const Eigen::VectorXd& inv_diag, int iterations) {
  // Deterministic start vector so repeated builds give identical weights.
  Eigen::VectorXd v(a.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * std::sin(0.7 * i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = inv_diag.cwiseProduct(a * v);
    lambda = w.norm();
    if (lambda == 0.0) break;
    v = w / lambda;
  }
  return lambda;
}

TwoLevelPreconditioner::TwoLevelPreconditioner(std::vector<int> aggregate_of,
                                               std::vector<int> component_of)
    : aggregate_of_(std::move(aggregate_of)), component_of_(std::move(component_of)) {
  if (aggregate_of_.size() != component_of_.size()) {
    throw InvalidArgument("aggregate and component maps differ in length");
  }
}

void TwoLevelPreconditioner::build(const Eigen::SparseMatrix<double>& a) {
  const auto n = static_cast<int>(a.rows());
  if (n != static_cast<int>(aggregate_of_.size())) {
    throw InvalidArgument("aggregate map does not match matrix size");
  }
  a_copy_ = a;
  inv_diag_ = inverse_diagonal(a_copy_);
  // Overestimate slightly; power iteration approaches lambda_max from below.
  const double lambda_max = 1.1 * estimate_jacobi_spectral_radius(a_copy_, inv_diag_);
  smoother_weight_ = 1.0 / lambda_max;

  // Tentative prolongator: piecewise-constant translation per aggregate.
  std::map<std::pair<int, int>, int> column_of;
  std::map<int, int> column_count;
  for (int r = 0; r < n; ++r) {
    const auto key = std::make_pair(aggregate_of_[r], component_of_[r]);
    auto [it, inserted] = column_of.emplace(key, static_cast<int>(column_of.size()));
    ++column_count[it->second];
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n);
  for (int r = 0; r < n; ++r) {
    const int col = column_of.at({aggregate_of_[r], component_of_[r]});
    triplets.emplace_back(r, col, 1.0 / std::sqrt(static_cast<double>(column_count[col])));
  }
  Eigen::SparseMatrix<double> tentative(n, static_cast<int>(column_of.size()));
  tentative.setFromTriplets(triplets.begin(), triplets.end());

  // P = (I - w D^-1 A) P_tent
  const double omega = (4.0 / 3.0) / lambda_max;
  Eigen::SparseMatrix<double> ap = a_copy_ * tentative;
  Eigen::SparseMatrix<double> dap = inv_diag_.asDiagonal() * ap;
  prolongator_ = tentative - omega * dap;
  prolongator_.prune(0.0);
  prolongator_.makeCompressed();

  Eigen::SparseMatrix<double> coarse = prolongator_.transpose() * (a_copy_ * prolongator_);
  coarse_.compute(coarse);
  if (coarse_.info() != Eigen::Success) {
    throw SingularSystem("coarse-level factorization failed");
  }
}

void TwoLevelPreconditioner::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  z = smoother_weight_ * inv_diag_.cwiseProduct(r);
  Eigen::VectorXd res = r - a_copy_ * z;
  Eigen::VectorXd coarse_rhs = prolongator_.transpose() * res;
  z += prolongator_ * coarse_.solve(coarse_rhs);
  res = r - a_copy_ * z;
  z += smoother_weight_ * inv_diag_.cwiseProduct(res);
}

std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind,
                                                    std::vector<int> aggregate_of,
                                                    std::vector<int> component_of) {
  if (kind == PreconditionerKind::kTwoLevel) {
    return std::make_unique<TwoLevelPreconditioner>(std::move(aggregate_of),
                                                    std::move(component_of));
  }
  return std::make_unique<JacobiPreconditioner>();
}

CgResult preconditioned_cg(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b,
                           const Preconditioner& m, Eigen::VectorXd& x, double tol,
                           int max_iters) {
  CgResult out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    out.converged = true;
    return out;
  }
  if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());

  Eigen::VectorXd r = b - a * x;
  double rnorm = r.norm();
  out.relative_residual = rnorm / bnorm;
  if (out.relative_residual <= tol) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXd z;
  m.apply(r, z);
  Eigen::VectorXd p = z;
  Eigen::VectorXd q(b.size());
  double rz = r.dot(z);

  for (int it = 1; it <= max_iters; ++it) {
    q.noalias() = a * p;
    const double pq = p.dot(q);
    if (!(pq > 0.0)) break;  // loss of positive definiteness
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    rnorm = r.norm();
    out.iterations = it;
    out.relative_residual = rnorm / bnorm;
    if (out.relative_residual <= tol) {
      // Confirm against the true residual; the recursive one drifts.
      out.relative_residual = (b - a * x).norm() / bnorm;
      if (out.relative_residual <= tol) {
        out.converged = true;
        return out;
      }
      r = b - a * x;
    }
    m.apply(r, z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return out;
}

}  // namespace topoctl
