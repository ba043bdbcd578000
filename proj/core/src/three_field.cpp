#include "topoctl/three_field.hpp"

#include <algorithm>
#include <cmath>

#include "topoctl/errors.hpp"

namespace topoctl {

DensityField::DensityField(Mesh m, std::vector<double> v) : mesh(m), values(std::move(v)) {
  if (static_cast<int>(values.size()) != mesh.element_count()) {
    throw InvalidArgument("density field length differs from element count");
  }
}

FilterKernel build_filter(const Mesh& mesh, double r_min) {
  if (!(r_min > 0.0)) throw InvalidArgument("filter radius must be positive");
  FilterKernel k;
  k.mesh = mesh;
  k.r_min = r_min;
  const int reach = static_cast<int>(std::ceil(r_min)) - 1;
  const int nz = mesh.nz > 0 ? mesh.nz : 1;
  const int reach_z = mesh.nz > 0 ? reach : 0;
  const int nel = mesh.element_count();
  k.row_begin.reserve(nel + 1);
  k.row_begin.push_back(0);
  k.weight_sum.resize(nel);

  for (int kz = 0; kz < nz; ++kz) {
    for (int j = 0; j < mesh.ny; ++j) {
      for (int i = 0; i < mesh.nx; ++i) {
        double sum = 0.0;
        for (int dk = -reach_z; dk <= reach_z; ++dk) {
          const int k2 = kz + dk;
          if (k2 < 0 || k2 >= nz) continue;
          for (int dj = -reach; dj <= reach; ++dj) {
            const int j2 = j + dj;
            if (j2 < 0 || j2 >= mesh.ny) continue;
            for (int di = -reach; di <= reach; ++di) {
              const int i2 = i + di;
              if (i2 < 0 || i2 >= mesh.nx) continue;
              const double dist = std::sqrt(double(di * di + dj * dj + dk * dk));
              const double h = r_min - dist;
              if (h <= 0.0) continue;
              k.neighbor.push_back(mesh.element_index(i2, j2, k2));
              k.weight.push_back(h);
              sum += h;
            }
          }
        }
        k.weight_sum[mesh.element_index(i, j, kz)] = sum;
        k.row_begin.push_back(static_cast<int>(k.neighbor.size()));
      }
    }
  }
  return k;
}

DensityField apply_filter(const FilterKernel& kernel, const DensityField& rho) {
  if (!(rho.mesh == kernel.mesh)) throw InvalidArgument("filter mesh mismatch");
  DensityField out(rho.mesh, 0.0);
  const int nel = rho.mesh.element_count();
  for (int e = 0; e < nel; ++e) {
    double acc = 0.0;
    for (int n = kernel.row_begin[e]; n < kernel.row_begin[e + 1]; ++n) {
      acc += kernel.weight[n] * rho.values[kernel.neighbor[n]];
    }
    out.values[e] = acc / kernel.weight_sum[e];
  }
  return out;
}

std::vector<double> apply_filter_transpose(const FilterKernel& kernel,
                                           std::span<const double> x) {
  const int nel = kernel.mesh.element_count();
  if (static_cast<int>(x.size()) != nel) throw InvalidArgument("filter size mismatch");
  std::vector<double> out(nel, 0.0);
  // H is symmetric, so row i of H lists every e with H_ei > 0.
  for (int i = 0; i < nel; ++i) {
    double acc = 0.0;
    for (int n = kernel.row_begin[i]; n < kernel.row_begin[i + 1]; ++n) {
      const int e = kernel.neighbor[n];
      acc += kernel.weight[n] * x[e] / kernel.weight_sum[e];
    }
    out[i] = acc;
  }
  return out;
}

double heaviside(double rho_bar, const ProjectionParams& pp) {
  const double a = std::tanh(pp.beta * pp.eta);
  const double den = a + std::tanh(pp.beta * (1.0 - pp.eta));
  return (a + std::tanh(pp.beta * (rho_bar - pp.eta))) / den;
}

double heaviside_derivative(double rho_bar, const ProjectionParams& pp) {
  const double den = std::tanh(pp.beta * pp.eta) + std::tanh(pp.beta * (1.0 - pp.eta));
  const double t = std::tanh(pp.beta * (rho_bar - pp.eta));
  return pp.beta * (1.0 - t * t) / den;
}

DensityField heaviside_project(const DensityField& rho_bar, const ProjectionParams& pp) {
  DensityField out(rho_bar.mesh, 0.0);
  for (std::size_t e = 0; e < out.size(); ++e) {
    out.values[e] = std::clamp(heaviside(rho_bar.values[e], pp), 0.0, 1.0);
  }
  return out;
}

std::vector<double> projection_derivative(const DensityField& rho_bar,
                                          const ProjectionParams& pp) {
  std::vector<double> out(rho_bar.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = heaviside_derivative(rho_bar.values[e], pp);
  }
  return out;
}

std::vector<double> chain_sensitivity(std::span<const double> dc_drho_tilde,
                                      const FilterKernel& kernel,
                                      std::span<const double> drho_tilde_drho_bar) {
  if (dc_drho_tilde.size() != drho_tilde_drho_bar.size()) {
    throw InvalidArgument("sensitivity arrays differ in length");
  }
  std::vector<double> product(dc_drho_tilde.size());
  for (std::size_t e = 0; e < product.size(); ++e) {
    product[e] = dc_drho_tilde[e] * drho_tilde_drho_bar[e];
  }
  return apply_filter_transpose(kernel, product);
}

double grayness(const DensityField& rho_tilde) {
  if (rho_tilde.values.empty()) return 0.0;
  double acc = 0.0;
  for (double r : rho_tilde.values) acc += r * (1.0 - r);
  return 4.0 * acc / static_cast<double>(rho_tilde.size());
}

double volume_fraction(const DensityField& rho_tilde) {
  if (rho_tilde.values.empty()) return 0.0;
  double acc = 0.0;
  for (double r : rho_tilde.values) acc += r;
  return acc / static_cast<double>(rho_tilde.size());
}

double checkerboard_index(const DensityField& rho_tilde) {
  const Mesh& m = rho_tilde.mesh;
  const int nz = m.nz > 0 ? m.nz : 1;
  auto solid = [&](int i, int j, int k) {
    return rho_tilde.values[m.element_index(i, j, k)] > 0.5;
  };
  // a b / c d alternates iff a == d, b == c, a != b.
  auto alternating = [](bool a, bool b, bool c, bool d) { return a == d && b == c && a != b; };

  long windows = 0;
  long hits = 0;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j + 1 < m.ny; ++j) {
      for (int i = 0; i + 1 < m.nx; ++i) {
        ++windows;
        hits += alternating(solid(i, j, k), solid(i + 1, j, k), solid(i, j + 1, k),
                            solid(i + 1, j + 1, k));
      }
    }
  }
  if (m.nz > 0) {
    for (int k = 0; k + 1 < nz; ++k) {
      for (int j = 0; j < m.ny; ++j) {
        for (int i = 0; i + 1 < m.nx; ++i) {
          ++windows;
          hits += alternating(solid(i, j, k), solid(i + 1, j, k), solid(i, j, k + 1),
                              solid(i + 1, j, k + 1));
        }
      }
      for (int j = 0; j + 1 < m.ny; ++j) {
        for (int i = 0; i < m.nx; ++i) {
          ++windows;
          hits += alternating(solid(i, j, k), solid(i, j + 1, k), solid(i, j, k + 1),
                              solid(i, j + 1, k + 1));
        }
      }
    }
  }
  return windows == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(windows);
}

const FilterKernel& FilterCache::get(double r_min) {
  auto it = kernels_.lower_bound(r_min - 1e-12);
  if (it != kernels_.end() && std::abs(it->first - r_min) <= 1e-12) return it->second;
  ++builds_;
  return kernels_.emplace(r_min, build_filter(mesh_, r_min)).first->second;
}

DesignPipeline::DesignPipeline(const FilterKernel* filter,
                               std::optional<ProjectionParams> projection,
                               std::span<const std::uint8_t> passive)
    : filter_(filter), projection_(projection), passive_(passive) {}

DesignPipeline DesignPipeline::identity(std::span<const std::uint8_t> passive) {
  return DesignPipeline(nullptr, std::nullopt, passive);
}

PhysicalFields DesignPipeline::forward(const DensityField& rho) const {
  PhysicalFields f;
  f.rho_bar = filter_ ? apply_filter(*filter_, rho) : rho;
  if (projection_) {
    f.rho_tilde = heaviside_project(f.rho_bar, *projection_);
    f.dtilde_dbar = projection_derivative(f.rho_bar, *projection_);
  } else {
    f.rho_tilde = f.rho_bar;
    f.dtilde_dbar.assign(rho.size(), 1.0);
  }
  for (std::size_t e = 0; e < passive_.size(); ++e) {
    if (passive_[e]) {
      f.rho_tilde.values[e] = 0.0;
      f.dtilde_dbar[e] = 0.0;
    }
  }
  return f;
}

std::vector<double> DesignPipeline::backward(const PhysicalFields& fields,
                                             std::span<const double> d_drho_tilde) const {
  if (filter_) return chain_sensitivity(d_drho_tilde, *filter_, fields.dtilde_dbar);
  std::vector<double> out(d_drho_tilde.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = d_drho_tilde[e] * fields.dtilde_dbar[e];
  return out;
}

double DesignPipeline::physical_volume(const DensityField& rho) const {
  const DensityField bar = filter_ ? apply_filter(*filter_, rho) : rho;
  double acc = 0.0;
  for (std::size_t e = 0; e < bar.size(); ++e) {
    if (is_passive(e)) continue;
    acc += projection_ ? std::clamp(heaviside(bar.values[e], *projection_), 0.0, 1.0)
                       : bar.values[e];
  }
  return acc / static_cast<double>(bar.size());
}

}  // namespace topoctl
