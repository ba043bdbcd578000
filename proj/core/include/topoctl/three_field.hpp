#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "topoctl/fem.hpp"

namespace topoctl {

/// Per-element density values on a mesh. Used for the design field and both
/// derived fields (filtered, projected).
struct DensityField {
  Mesh mesh;
  std::vector<double> values;

  DensityField() = default;
  DensityField(Mesh m, double fill) : mesh(m), values(m.element_count(), fill) {}
  DensityField(Mesh m, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  bool operator==(const DensityField&) const = default;
};

/// Linear density filter: rho_bar_e = sum_i H_ei rho_i / sum_i H_ei with
/// H_ei = max(0, r_min - |x_e - x_i|) between element centroids. Stored in
/// CSR form; the neighbourhood relation is symmetric.
struct FilterKernel {
  Mesh mesh;
  double r_min = 0.0;
  std::vector<int> row_begin;  // element_count + 1
  std::vector<int> neighbor;
  std::vector<double> weight;
  std::vector<double> weight_sum;

  std::span<const int> neighbors_of(int e) const {
    return {neighbor.data() + row_begin[e], neighbor.data() + row_begin[e + 1]};
  }
  std::span<const double> weights_of(int e) const {
    return {weight.data() + row_begin[e], weight.data() + row_begin[e + 1]};
  }
};

struct ProjectionParams {
  double beta = 1.0;
  double eta = 0.5;
};

FilterKernel build_filter(const Mesh& mesh, double r_min);

DensityField apply_filter(const FilterKernel& kernel, const DensityField& rho);

/// Adjoint of apply_filter: out_i = sum_e H_ei x_e / sum_j H_ej.
std::vector<double> apply_filter_transpose(const FilterKernel& kernel,
                                           std::span<const double> x);

double heaviside(double rho_bar, const ProjectionParams& pp);
double heaviside_derivative(double rho_bar, const ProjectionParams& pp);

DensityField heaviside_project(const DensityField& rho_bar, const ProjectionParams& pp);
std::vector<double> projection_derivative(const DensityField& rho_bar,
                                          const ProjectionParams& pp);

/// dC/d rho_i = sum_e H_ei / (sum H)_e * d rho_tilde_e/d rho_bar_e * dC/d rho_tilde_e.
std::vector<double> chain_sensitivity(std::span<const double> dc_drho_tilde,
                                      const FilterKernel& kernel,
                                      std::span<const double> drho_tilde_drho_bar);

/// G = 4/N sum rho(1 - rho).
double grayness(const DensityField& rho_tilde);

/// Fraction of 2x2 element windows whose thresholded pattern (rho > 0.5)
/// alternates exactly. 3-D fields count windows in the xy, xz and yz planes.
double checkerboard_index(const DensityField& rho_tilde);

double volume_fraction(const DensityField& rho_tilde);

/// Caches filter kernels by radius; a radius change larger than 1e-12
/// selects (or builds) a different kernel.
class FilterCache {
 public:
  explicit FilterCache(Mesh mesh) : mesh_(mesh) {}
  const FilterKernel& get(double r_min);
  int builds() const { return builds_; }

 private:
  Mesh mesh_;
  std::map<double, FilterKernel> kernels_;
  int builds_ = 0;
};

/// The three fields of one evaluation.
struct PhysicalFields {
  DensityField rho_bar;
  DensityField rho_tilde;
  std::vector<double> dtilde_dbar;
};

/// rho -> rho_bar -> rho_tilde with passive (void) elements forced to zero.
/// A missing filter or projection acts as the identity.
class DesignPipeline {
 public:
  DesignPipeline(const FilterKernel* filter, std::optional<ProjectionParams> projection,
                 std::span<const std::uint8_t> passive = {});

  static DesignPipeline identity(std::span<const std::uint8_t> passive = {});

  PhysicalFields forward(const DensityField& rho) const;

  /// Chain an objective gradient w.r.t. rho_tilde back to rho.
  std::vector<double> backward(const PhysicalFields& fields,
                               std::span<const double> d_drho_tilde) const;

  double physical_volume(const DensityField& rho) const;

  bool is_passive(std::size_t e) const { return !passive_.empty() && passive_[e] != 0; }
  std::span<const std::uint8_t> passive() const { return passive_; }

 private:
  const FilterKernel* filter_;
  std::optional<ProjectionParams> projection_;
  std::span<const std::uint8_t> passive_;
};

}  // namespace topoctl
