#pragma once

// Extended implicit moving least squares (EIMLS) signed field.
//
// For a query x with k nearest cloud points p_i (normals n_i):
//
//   alpha(x) = sum_i w_i(x) (x - p_i).n_i / sum_i w_i(x)
//   w_i(x)   = phi(|p_i - x| / h(x))
//   h(x)     = max(|p_nn(x) - x| / l, h0)
//
// where l is the kernel's numeric support radius (l_gamma for the Gaussian),
// so the nearest point's weight never drops below 10^-gamma and alpha is
// finite everywhere. The truncated field is epsilon * tanh(alpha / epsilon).

#include "eimesh/parallel.hpp"
#include "eimesh/pointcloud.hpp"
#include "eimesh/spatial.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eimesh {

enum class Kernel { gaussian, compact, interpolatory };

Kernel parse_kernel(const std::string& name);
std::string to_string(Kernel k);

struct EimlsConfig {
  double h0 = 0.003;      // base space parameter (meters)
  double gamma = 7.0;     // weights below 10^-gamma count as numerically zero
  int k = 80;             // neighbors summed per query
  double epsilon = 0.005; // tanh truncation width (meters)
  Kernel kernel = Kernel::gaussian;

  void validate() const;
};

// sqrt(2 gamma ln 10): radius beyond which exp(-x^2/2) < 10^-gamma.
double l_gamma(double gamma);

// phi(x): gaussian exp(-x^2/2); compact (1-x^2)^4 on [0,1); interpolatory 1/x^2.
double kernel_weight(Kernel kernel, double x);

// Largest x with phi(x) >= 10^-gamma. Gaussian: l_gamma. Compact:
// sqrt(1 - 10^(-gamma/4)). Interpolatory never underflows; l_gamma is used.
double support_radius(Kernel kernel, double gamma);

// epsilon * tanh(value / epsilon). tanh rounds to +-1 for |value| > ~19
// epsilon; those results are moved one ulp inward so |result| < epsilon.
inline double truncate_tanh(double value, double epsilon) {
  const double r = epsilon * std::tanh(value / epsilon);
  if (std::abs(r) >= epsilon) return std::copysign(std::nextafter(epsilon, 0.0), r);
  return r;
}

class EimlsField {
 public:
  EimlsField(OrientedPointCloud cloud, EimlsConfig config);

  const OrientedPointCloud& cloud() const { return cloud_; }
  const NeighborIndex& index() const { return index_; }
  const EimlsConfig& config() const { return config_; }
  int dim() const { return cloud_.dim; }
  double l_gamma() const { return l_gamma_; }

  double h_extended(const Vec3& x) const;
  double eval(const Vec3& x) const;
  double eval_truncated(const Vec3& x) const;

  // Plain IMLS with a constant space parameter; weights below 10^-gamma are
  // zeroed. Empty when every weight vanishes.
  std::optional<double> eval_plain_imls(const Vec3& x, double h_const) const;

  // Central finite differences with step h0/10.
  Vec3 gradient(const Vec3& x) const;

 private:
  double weighted_mean(const Vec3& x, const std::vector<Neighbor>& nb, double h, double floor) const;

  OrientedPointCloud cloud_;
  EimlsConfig config_;
  NeighborIndex index_;
  double l_gamma_;
  double support_;
  std::size_t k_eff_;
};

// Field values at arbitrary points (the per-node sampling hot spot).
std::vector<double> sample_at(const EimlsField& field, std::span<const Vec3> points, bool truncated,
                              Exec exec = Exec::parallel);

// Dense samples on an axis-aligned grid; x varies fastest, then y, then z.
struct ScalarGrid {
  int dim = 2;
  std::array<int, 3> resolution{1, 1, 1};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Zero();
  std::vector<double> values;

  std::size_t index(int i, int j, int k = 0) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution[1]) * static_cast<std::size_t>(k));
  }
  Vec3 position(int i, int j, int k = 0) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
};

enum class GridMode { eimls, truncated, plain_imls };

// Plain-IMLS grids code undefined samples as NaN.
ScalarGrid sample_on_grid(const EimlsField& field, const Box& domain, std::array<int, 3> resolution,
                          GridMode mode, double plain_h = 0.0, Exec exec = Exec::parallel);

inline ScalarGrid sample_on_grid(const EimlsField& field, const Box& domain, std::array<int, 3> resolution,
                                 bool truncated, Exec exec = Exec::parallel) {
  return sample_on_grid(field, domain, resolution, truncated ? GridMode::truncated : GridMode::eimls, 0.0, exec);
}

}  // namespace eimesh
