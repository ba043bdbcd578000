#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>

namespace topoctl {

enum class SolveMode { kDirect, kPcg };
enum class PreconditionerKind { kJacobi, kTwoLevel };

struct LinearSolveConfig {
  SolveMode mode = SolveMode::kDirect;
  double cg_tolerance = 1e-8;
  int cg_max_iters = 10000;
  double precond_rebuild_threshold = 0.15;
  PreconditionerKind preconditioner = PreconditionerKind::kJacobi;

  void validate() const;
  bool operator==(const LinearSolveConfig&) const = default;
};

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void build(const Eigen::SparseMatrix<double>& a) = 0;
  virtual void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const = 0;
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  void build(const Eigen::SparseMatrix<double>& a) override;
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const override;

 private:
  Eigen::VectorXd inv_diag_;
};

/// Two-level additive-multiplicative preconditioner: damped Jacobi smoothing
/// around a coarse correction built from a smoothed aggregation prolongator.
/// `aggregate_of` maps each unknown to its aggregate, `component_of` to its
/// displacement component; one coarse unknown per (aggregate, component).
class TwoLevelPreconditioner final : public Preconditioner {
 public:
  TwoLevelPreconditioner(std::vector<int> aggregate_of, std::vector<int> component_of);

  void build(const Eigen::SparseMatrix<double>& a) override;
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const override;

  int coarse_size() const { return static_cast<int>(prolongator_.cols()); }

 private:
  std::vector<int> aggregate_of_;
  std::vector<int> component_of_;
  Eigen::SparseMatrix<double> a_copy_;  // operator the hierarchy was built for
  Eigen::VectorXd inv_diag_;
  double smoother_weight_ = 0.0;
  Eigen::SparseMatrix<double> prolongator_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> coarse_;
};

std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind,
                                                    std::vector<int> aggregate_of,
                                                    std::vector<int> component_of);

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for SPD `a`. `x` holds the initial
/// guess on entry. Convergence is ||b - a x|| <= tol ||b||.
CgResult preconditioned_cg(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b,
                           const Preconditioner& m, Eigen::VectorXd& x, double tol,
                           int max_iters);

/// Largest eigenvalue estimate of D^-1 A by power iteration.
double estimate_jacobi_spectral_radius(const Eigen::SparseMatrix<double>& a,
                                       const Eigen::VectorXd& inv_diag, int iterations = 20);

}  // namespace topoctl
