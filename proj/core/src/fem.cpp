#include "topoctl/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "topoctl/errors.hpp"

namespace topoctl {

Mesh::Mesh(int nx_, int ny_, int nz_) : nx(nx_), ny(ny_), nz(nz_) {
  if (nx < 1 || ny < 1 || nz < 0) {
    std::ostringstream os;
    os << "invalid mesh " << nx << "x" << ny << "x" << nz;
    throw InvalidArgument(os.str());
  }
}

std::array<double, 3> Mesh::centroid(int element) const {
  const int i = element % nx;
  const int j = (element / nx) % ny;
  const int k = element / (nx * ny);
  return {i + 0.5, j + 0.5, nz > 0 ? k + 0.5 : 0.0};
}

void Material::validate() const {
  if (!(Emin > 0.0 && Emin < E0)) throw InvalidArgument("material requires 0 < Emin < E0");
  if (!(nu > 0.0 && nu < 0.5)) throw InvalidArgument("material requires 0 < nu < 0.5");
}

void LoadCase::validate(const Mesh& mesh) const {
  if (fixed_dofs.empty()) throw InvalidArgument("load case has no fixed DOFs");
  const int ndof = mesh.dof_count();
  for (int d : fixed_dofs) {
    if (d < 0 || d >= ndof) throw InvalidArgument("fixed DOF out of range");
  }
  for (const auto& [dof, value] : forces) {
    if (dof < 0 || dof >= ndof) throw InvalidArgument("loaded DOF out of range");
    if (std::binary_search(fixed_dofs.begin(), fixed_dofs.end(), dof)) {
      throw InvalidArgument("force applied on a fixed DOF");
    }
  }
}

namespace {

// Local node corner offsets; counter-clockwise bottom face, then top face.
constexpr int kCorner2d[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
constexpr int kCorner3d[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                 {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

ElementMatrix q4_stiffness(double nu) {
  Eigen::Matrix3d d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0;
  d *= 1.0 / (1.0 - nu * nu);

  const double g = 1.0 / std::sqrt(3.0);
  ElementMatrix ke = ElementMatrix::Zero(8, 8);
  for (double xi : {-g, g}) {
    for (double eta : {-g, g}) {
      Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double sx = 2.0 * kCorner2d[a][0] - 1.0;
        const double sy = 2.0 * kCorner2d[a][1] - 1.0;
        // d/dx = 2 d/dxi on the unit square
        const double dndx = 2.0 * 0.25 * sx * (1.0 + sy * eta);
        const double dndy = 2.0 * 0.25 * sy * (1.0 + sx * xi);
        b(0, 2 * a) = dndx;
        b(1, 2 * a + 1) = dndy;
        b(2, 2 * a) = dndy;
        b(2, 2 * a + 1) = dndx;
      }
      ke += b.transpose() * d * b * 0.25;  // detJ = 1/4, weights 1
    }
  }
  return (ke + ke.transpose()) * 0.5;
}

ElementMatrix h8_stiffness(double nu) {
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  const double c = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d(i, j) = c * (i == j ? 1.0 - nu : nu);
    d(i + 3, i + 3) = c * (1.0 - 2.0 * nu) / 2.0;
  }

  const double g = 1.0 / std::sqrt(3.0);
  ElementMatrix ke = ElementMatrix::Zero(24, 24);
  for (double xi : {-g, g}) {
    for (double eta : {-g, g}) {
      for (double zeta : {-g, g}) {
        Eigen::Matrix<double, 6, 24> b = Eigen::Matrix<double, 6, 24>::Zero();
        for (int a = 0; a < 8; ++a) {
          const double sx = 2.0 * kCorner3d[a][0] - 1.0;
          const double sy = 2.0 * kCorner3d[a][1] - 1.0;
          const double sz = 2.0 * kCorner3d[a][2] - 1.0;
          const double dndx = 2.0 * 0.125 * sx * (1.0 + sy * eta) * (1.0 + sz * zeta);
          const double dndy = 2.0 * 0.125 * sy * (1.0 + sx * xi) * (1.0 + sz * zeta);
          const double dndz = 2.0 * 0.125 * sz * (1.0 + sx * xi) * (1.0 + sy * eta);
          b(0, 3 * a) = dndx;
          b(1, 3 * a + 1) = dndy;
          b(2, 3 * a + 2) = dndz;
          b(3, 3 * a) = dndy;
          b(3, 3 * a + 1) = dndx;
          b(4, 3 * a + 1) = dndz;
          b(4, 3 * a + 2) = dndy;
          b(5, 3 * a) = dndz;
          b(5, 3 * a + 2) = dndx;
        }
        ke += b.transpose() * d * b * 0.125;  // detJ = 1/8
      }
    }
  }
  return (ke + ke.transpose()) * 0.5;
}

}  // namespace

ElementMatrix element_stiffness(double nu, int dim) {
  if (dim == 2) return q4_stiffness(nu);
  if (dim == 3) return h8_stiffness(nu);
  throw InvalidArgument("element_stiffness: dim must be 2 or 3");
}

ElementMatrix element_stiffness(const Material& material, int dim) {
  material.validate();
  return element_stiffness(material.nu, dim) * material.E0;
}

std::vector<double> simp_moduli(std::span<const double> rho_tilde, double p,
                                const Material& material) {
  std::vector<double> e(rho_tilde.size());
  const double range = material.E0 - material.Emin;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = material.Emin + std::pow(rho_tilde[i], p) * range;
  }
  return e;
}

bool maybe_rebuild_preconditioner(std::span<const double> prev,
                                  std::span<const double> next, double threshold) {
  if (prev.empty()) return true;
  if (prev.size() != next.size()) throw InvalidArgument("stiffness arrays differ in length");
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (std::abs(next[i] - prev[i]) / prev[i] > threshold) return true;
  }
  return false;
}

FeSystem::FeSystem(Mesh mesh, Material material, LoadCase load, LinearSolveConfig config)
    : mesh_(mesh), material_(material), load_(std::move(load)), config_(config) {
  material_.validate();
  config_.validate();
  std::sort(load_.fixed_dofs.begin(), load_.fixed_dofs.end());
  load_.fixed_dofs.erase(std::unique(load_.fixed_dofs.begin(), load_.fixed_dofs.end()),
                         load_.fixed_dofs.end());
  load_.validate(mesh_);
  ke_ = element_stiffness(material_.nu, mesh_.dim());
  dofs_per_element_ = static_cast<int>(ke_.rows());
  build_pattern();
}

std::span<const int> FeSystem::element_dofs(int element) const {
  return {element_dofs_.data() + static_cast<std::size_t>(element) * dofs_per_element_,
          static_cast<std::size_t>(dofs_per_element_)};
}

void FeSystem::build_pattern() {
  const int dim = mesh_.dim();
  const int nel = mesh_.element_count();
  const int nodes_per_element = dim == 2 ? 4 : 8;
  element_dofs_.resize(static_cast<std::size_t>(nel) * dofs_per_element_);

  for (int e = 0; e < nel; ++e) {
    const int i = e % mesh_.nx;
    const int j = (e / mesh_.nx) % mesh_.ny;
    const int k = e / (mesh_.nx * mesh_.ny);
    for (int a = 0; a < nodes_per_element; ++a) {
      const int node = dim == 2 ? mesh_.node_index(i + kCorner2d[a][0], j + kCorner2d[a][1])
                                : mesh_.node_index(i + kCorner3d[a][0], j + kCorner3d[a][1],
                                                   k + kCorner3d[a][2]);
      for (int c = 0; c < dim; ++c) {
        element_dofs_[static_cast<std::size_t>(e) * dofs_per_element_ + a * dim + c] =
            node * dim + c;
      }
    }
  }

  const int ndof = mesh_.dof_count();
  reduced_index_.assign(ndof, 0);
  for (int d : load_.fixed_dofs) reduced_index_[d] = -1;
  free_dofs_.clear();
  for (int d = 0; d < ndof; ++d) {
    if (reduced_index_[d] == 0) {
      reduced_index_[d] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(d);
    }
  }
  const int nfree = static_cast<int>(free_dofs_.size());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nel) * dofs_per_element_ * dofs_per_element_);
  for (int e = 0; e < nel; ++e) {
    const auto dofs = element_dofs(e);
    for (int a = 0; a < dofs_per_element_; ++a) {
      const int ra = reduced_index_[dofs[a]];
      if (ra < 0) continue;
      for (int b = 0; b < dofs_per_element_; ++b) {
        const int rb = reduced_index_[dofs[b]];
        if (rb >= 0) triplets.emplace_back(ra, rb, 0.0);
      }
    }
  }
  k_reduced_.resize(nfree, nfree);
  k_reduced_.setFromTriplets(triplets.begin(), triplets.end());
  k_reduced_.makeCompressed();

  const int* outer = k_reduced_.outerIndexPtr();
  const int* inner = k_reduced_.innerIndexPtr();
  const std::size_t block = static_cast<std::size_t>(dofs_per_element_) * dofs_per_element_;
  scatter_.assign(static_cast<std::size_t>(nel) * block, -1);
  for (int e = 0; e < nel; ++e) {
    const auto dofs = element_dofs(e);
    for (int a = 0; a < dofs_per_element_; ++a) {
      const int ra = reduced_index_[dofs[a]];
      if (ra < 0) continue;
      for (int b = 0; b < dofs_per_element_; ++b) {
        const int rb = reduced_index_[dofs[b]];
        if (rb < 0) continue;
        const int* begin = inner + outer[rb];
        const int* end = inner + outer[rb + 1];
        const int* hit = std::lower_bound(begin, end, ra);
        scatter_[e * block + a * dofs_per_element_ + b] = static_cast<int>(hit - inner);
      }
    }
  }

  f_full_ = Eigen::VectorXd::Zero(ndof);
  for (const auto& [dof, value] : load_.forces) f_full_[dof] = value;
  f_reduced_.resize(nfree);
  for (int r = 0; r < nfree; ++r) f_reduced_[r] = f_full_[free_dofs_[r]];

  if (config_.mode == SolveMode::kPcg) {
    std::vector<int> aggregate_of(nfree);
    std::vector<int> component_of(nfree);
    const int ax = (mesh_.nx + 2) / 2;
    const int ay = (mesh_.ny + 2) / 2;
    for (int r = 0; r < nfree; ++r) {
      const int dof = free_dofs_[r];
      const int node = dof / dim;
      const int i = node % (mesh_.nx + 1);
      const int j = (node / (mesh_.nx + 1)) % (mesh_.ny + 1);
      const int k = node / ((mesh_.nx + 1) * (mesh_.ny + 1));
      aggregate_of[r] = ((k / 2) * ay + j / 2) * ax + i / 2;
      component_of[r] = dof % dim;
    }
    preconditioner_ = make_preconditioner(config_.preconditioner, std::move(aggregate_of),
                                          std::move(component_of));
  }
}

const Eigen::SparseMatrix<double>& FeSystem::assemble(std::span<const double> moduli) {
  const int nel = mesh_.element_count();
  if (static_cast<int>(moduli.size()) != nel) {
    throw InvalidArgument("stiffness array length differs from element count");
  }
  double* values = k_reduced_.valuePtr();
  std::fill(values, values + k_reduced_.nonZeros(), 0.0);
  const std::size_t block = static_cast<std::size_t>(dofs_per_element_) * dofs_per_element_;
  const double* ke = ke_.data();  // column-major; ke is symmetric
  for (int e = 0; e < nel; ++e) {
    const double scale = moduli[e];
    const int* pos = scatter_.data() + e * block;
    for (std::size_t ab = 0; ab < block; ++ab) {
      if (pos[ab] >= 0) values[pos[ab]] += scale * ke[ab];
    }
  }
  return k_reduced_;
}

DisplacementField FeSystem::solve(std::span<const double> moduli) {
  for (double e : moduli) {
    if (!(e > 0.0)) throw InvalidArgument("element modulus must be positive");
  }
  assemble(moduli);
  Eigen::VectorXd x =
      config_.mode == SolveMode::kDirect ? solve_direct() : solve_pcg(moduli);
  ++stats_.solves;

  DisplacementField u = DisplacementField::Zero(mesh_.dof_count());
  for (int r = 0; r < static_cast<int>(free_dofs_.size()); ++r) u[free_dofs_[r]] = x[r];
  return u;
}

Eigen::VectorXd FeSystem::solve_direct() {
  if (!analyzed_) {
    llt_.analyzePattern(k_reduced_);
    analyzed_ = true;
  }
  llt_.factorize(k_reduced_);
  if (llt_.info() != Eigen::Success) {
    throw SingularSystem("stiffness factorization failed: constrained system is singular");
  }
  Eigen::VectorXd x = llt_.solve(f_reduced_);
  const double fnorm = f_reduced_.norm();
  const double res = fnorm > 0.0 ? (k_reduced_ * x - f_reduced_).norm() / fnorm : 0.0;
  if (!x.allFinite() || res > 1e-6) {
    std::ostringstream os;
    os << "direct solve inaccurate (relative residual " << res
       << "): constrained system is singular or ill-posed";
    throw SingularSystem(os.str());
  }
  stats_.last_relative_residual = res;
  return x;
}

Eigen::VectorXd FeSystem::solve_pcg(std::span<const double> moduli) {
  if (maybe_rebuild_preconditioner(precond_moduli_, moduli,
                                   config_.precond_rebuild_threshold)) {
    preconditioner_->build(k_reduced_);
    precond_moduli_.assign(moduli.begin(), moduli.end());
    ++stats_.precond_rebuilds;
  } else {
    ++stats_.precond_reuses;
  }
  Eigen::VectorXd x = warm_start_.size() == f_reduced_.size()
                          ? warm_start_
                          : Eigen::VectorXd::Zero(f_reduced_.size());
  const CgResult r = preconditioned_cg(k_reduced_, f_reduced_, *preconditioner_, x,
                                       config_.cg_tolerance, config_.cg_max_iters);
  stats_.cg_iterations_last = r.iterations;
  stats_.cg_iterations_total += r.iterations;
  stats_.last_relative_residual = r.relative_residual;
  if (!r.converged) {
    std::ostringstream os;
    os << "PCG did not converge in " << r.iterations << " iterations (relative residual "
       << r.relative_residual << ", tolerance " << config_.cg_tolerance << ")";
    throw CgNoConvergence(os.str(), r.iterations, r.relative_residual);
  }
  warm_start_ = x;
  return x;
}

double FeSystem::compliance(const DisplacementField& u) const { return f_full_.dot(u); }

std::vector<double> FeSystem::element_energies(const DisplacementField& u) const {
  const int nel = mesh_.element_count();
  std::vector<double> energy(nel);
  Eigen::VectorXd ue(dofs_per_element_);
  for (int e = 0; e < nel; ++e) {
    const auto dofs = element_dofs(e);
    for (int a = 0; a < dofs_per_element_; ++a) ue[a] = u[dofs[a]];
    energy[e] = ue.dot(ke_ * ue);
  }
  return energy;
}

ComplianceResult FeSystem::compliance_and_sensitivity(const DisplacementField& u,
                                                      std::span<const double> rho_tilde,
                                                      double p) const {
  if (static_cast<int>(rho_tilde.size()) != mesh_.element_count()) {
    throw InvalidArgument("density array length differs from element count");
  }
  ComplianceResult out;
  out.compliance = compliance(u);
  const std::vector<double> energy = element_energies(u);
  const double range = material_.E0 - material_.Emin;
  out.sensitivity.resize(energy.size());
  for (std::size_t e = 0; e < energy.size(); ++e) {
    out.sensitivity[e] = -p * std::pow(rho_tilde[e], p - 1.0) * range * energy[e];
  }
  return out;
}

double FeSystem::relative_residual(std::span<const double> moduli, const DisplacementField& u) {
  assemble(moduli);
  Eigen::VectorXd x(free_dofs_.size());
  for (int r = 0; r < static_cast<int>(free_dofs_.size()); ++r) x[r] = u[free_dofs_[r]];
  const double fnorm = f_reduced_.norm();
  return fnorm > 0.0 ? (k_reduced_ * x - f_reduced_).norm() / fnorm : 0.0;
}

}  // namespace topoctl
