#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "topoctl/linear_solver.hpp"

namespace topoctl {

/// Structured grid of unit elements. nz == 0 selects the 2-D (plane stress) model.
///
/// Elements, nodes and DOFs are numbered x-fastest:
///   element (i, j, k) -> (k * ny + j) * nx + i
///   node    (i, j, k) -> (k * (ny + 1) + j) * (nx + 1) + i
///   dof     (node, c) -> node * dim + c
/// with y pointing up in 2-D.
struct Mesh {
  int nx = 1;
  int ny = 1;
  int nz = 0;

  Mesh() = default;
  Mesh(int nx_, int ny_, int nz_ = 0);

  int dim() const { return nz > 0 ? 3 : 2; }
  int element_count() const { return nx * ny * (nz > 0 ? nz : 1); }
  int node_count() const { return (nx + 1) * (ny + 1) * (nz > 0 ? nz + 1 : 1); }
  int dof_count() const { return node_count() * dim(); }

  int element_index(int i, int j, int k = 0) const { return (k * ny + j) * nx + i; }
  int node_index(int i, int j, int k = 0) const {
    return (k * (ny + 1) + j) * (nx + 1) + i;
  }
  std::array<double, 3> centroid(int element) const;

  bool operator==(const Mesh&) const = default;
};

struct Material {
  double E0 = 1.0;
  double Emin = 1e-9;
  double nu = 0.3;

  void validate() const;
};

/// Dirichlet (zero displacement) DOFs and nodal point forces.
struct LoadCase {
  std::vector<int> fixed_dofs;
  std::map<int, double> forces;

  void validate(const Mesh& mesh) const;
};

using ElementMatrix = Eigen::MatrixXd;
using DisplacementField = Eigen::VectorXd;

/// Element stiffness of a unit square (Q4, plane stress) or unit cube (H8)
/// with Young's modulus 1, integrated with 2-point Gauss rules per axis.
ElementMatrix element_stiffness(double nu, int dim);

/// Same, scaled by the solid modulus E0 of `material`.
ElementMatrix element_stiffness(const Material& material, int dim);

/// SIMP interpolation E = Emin + rho^p (E0 - Emin), elementwise.
std::vector<double> simp_moduli(std::span<const double> rho_tilde, double p,
                                const Material& material);

/// True iff the preconditioner built for `prev` should be rebuilt for `next`:
/// max_e |next_e - prev_e| / prev_e > threshold. An empty `prev` means no
/// preconditioner exists yet.
bool maybe_rebuild_preconditioner(std::span<const double> prev,
                                  std::span<const double> next, double threshold);

struct ComplianceResult {
  double compliance = 0.0;
  std::vector<double> sensitivity;  // dC / d rho_tilde
};

struct SolveStats {
  int solves = 0;
  int cg_iterations_last = 0;
  long cg_iterations_total = 0;
  int precond_rebuilds = 0;
  int precond_reuses = 0;
  double last_relative_residual = 0.0;
};

/// Finite-element model for a fixed mesh and load case. Owns the reduced
/// sparsity pattern, the symbolic factorization and the PCG preconditioner,
/// so one instance belongs to one run.
class FeSystem {
 public:
  FeSystem(Mesh mesh, Material material, LoadCase load, LinearSolveConfig config = {});

  const Mesh& mesh() const { return mesh_; }
  const Material& material() const { return material_; }
  const LoadCase& load() const { return load_; }
  const LinearSolveConfig& config() const { return config_; }
  const ElementMatrix& unit_element_matrix() const { return ke_; }
  const SolveStats& stats() const { return stats_; }
  int free_dof_count() const { return static_cast<int>(free_dofs_.size()); }

  /// Solve K(E) U = F for per-element moduli E. Fixed DOFs are zero in the
  /// returned full-length field.
  DisplacementField solve(std::span<const double> moduli);

  /// C = F^T U and dC/d rho_tilde_e = -p rho_e^(p-1) (E0 - Emin) u_e^T k0 u_e.
  ComplianceResult compliance_and_sensitivity(const DisplacementField& u,
                                              std::span<const double> rho_tilde,
                                              double p) const;

  double compliance(const DisplacementField& u) const;

  /// u_e^T k0 u_e per element (k0 at unit modulus).
  std::vector<double> element_energies(const DisplacementField& u) const;

  /// ||K U - F|| / ||F|| over the free DOFs.
  double relative_residual(std::span<const double> moduli, const DisplacementField& u);

  std::span<const int> element_dofs(int element) const;

  /// Reduced (free-DOF) stiffness matrix for the given moduli.
  const Eigen::SparseMatrix<double>& assemble(std::span<const double> moduli);

 private:
  void build_pattern();
  Eigen::VectorXd solve_direct();
  Eigen::VectorXd solve_pcg(std::span<const double> moduli);

  Mesh mesh_;
  Material material_;
  LoadCase load_;
  LinearSolveConfig config_;
  ElementMatrix ke_;
  int dofs_per_element_ = 0;

  std::vector<int> element_dofs_;  // element_count * dofs_per_element
  std::vector<int> reduced_index_;  // full dof -> reduced index or -1
  std::vector<int> free_dofs_;
  // For each element, positions of its (a, b) free-free entries in the CSC
  // value array, -1 where either DOF is fixed.
  std::vector<int> scatter_;
  Eigen::SparseMatrix<double> k_reduced_;
  Eigen::VectorXd f_reduced_;
  Eigen::VectorXd f_full_;

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt_;
  bool analyzed_ = false;

  std::unique_ptr<Preconditioner> preconditioner_;
  std::vector<double> precond_moduli_;
  Eigen::VectorXd warm_start_;

  SolveStats stats_;
};

}  // namespace topoctl
