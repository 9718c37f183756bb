#include "eimesh/eimls.hpp"

#include <cmath>
#include <limits>

namespace eimesh {

Kernel parse_kernel(const std::string& name) {
  if (name == "gaussian") return Kernel::gaussian;
  if (name == "compact") return Kernel::compact;
  if (name == "interpolatory") return Kernel::interpolatory;
  throw InvalidArgument("unknown kernel '" + name + "' (gaussian, compact, interpolatory)");
}

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::gaussian: return "gaussian";
    case Kernel::compact: return "compact";
    case Kernel::interpolatory: return "interpolatory";
  }
  return "?";
}

void EimlsConfig::validate() const {
  require(h0 > 0.0 && std::isfinite(h0), "eimls: h0 must be > 0");
  require(gamma > 0.0 && std::isfinite(gamma), "eimls: gamma must be > 0");
  require(k >= 1, "eimls: k must be >= 1");
  require(epsilon > 0.0 && std::isfinite(epsilon), "eimls: epsilon must be > 0");
}

double l_gamma(double gamma) {
  require(gamma > 0.0, "l_gamma: gamma must be > 0");
  return std::sqrt(2.0 * gamma * std::log(10.0));
}

double kernel_weight(Kernel kernel, double x) {
  require(x >= 0.0, "kernel_weight: argument must be >= 0");
  switch (kernel) {
    case Kernel::gaussian: return std::exp(-0.5 * x * x);
    case Kernel::compact: {
      if (x >= 1.0) return 0.0;
      const double t = 1.0 - x * x;
      return (t * t) * (t * t);
    }
    case Kernel::interpolatory:
      require(x > 0.0, "kernel_weight: interpolatory kernel is singular at 0");
      return 1.0 / (x * x);
  }
  return 0.0;
}

double support_radius(Kernel kernel, double gamma) {
  if (kernel == Kernel::compact) {
    require(gamma > 0.0, "support_radius: gamma must be > 0");
    return std::sqrt(1.0 - std::pow(10.0, -gamma / 4.0));
  }
  return l_gamma(gamma);
}

EimlsField::EimlsField(OrientedPointCloud cloud, EimlsConfig config)
    : cloud_(std::move(cloud)),
      config_(config),
      index_((config.validate(), cloud_.points), cloud_.dim),
      l_gamma_(eimesh::l_gamma(config.gamma)),
      support_(support_radius(config.kernel, config.gamma)),
      k_eff_(std::min<std::size_t>(static_cast<std::size_t>(config.k), cloud_.size())) {
  if (!cloud_.has_normals()) throw PreconditionError("eimls: cloud has no normals");
  cloud_.validate();
}

double EimlsField::h_extended(const Vec3& x) const {
  const Neighbor nn = index_.nearest(x);
  return std::max(std::sqrt(nn.dist2) / support_, config_.h0);
}

double EimlsField::weighted_mean(const Vec3& x, const std::vector<Neighbor>& nb, double h,
                                 double floor) const {
  const int dim = cloud_.dim;
  double num = 0.0;
  double den = 0.0;
  const double inv_2h2 = 1.0 / (2.0 * h * h);
  for (const auto& n : nb) {
    double w = 0.0;
    switch (config_.kernel) {
      case Kernel::gaussian: w = std::exp(-n.dist2 * inv_2h2); break;
      case Kernel::compact: w = kernel_weight(Kernel::compact, std::sqrt(n.dist2) / h); break;
      case Kernel::interpolatory: w = (h * h) / n.dist2; break;
    }
    if (w < floor) w = 0.0;
    const Vec3& p = cloud_.points[n.index];
    const Vec3& nrm = cloud_.normals[n.index];
    double signed_dist = 0.0;
    for (int a = 0; a < dim; ++a) signed_dist += (x[a] - p[a]) * nrm[a];
    num += w * signed_dist;
    den += w;
  }
  if (floor == 0.0 && !(den > 0.0))
    throw InternalError("eimls: zero weight sum (kernel support bound violated)");
  return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

double EimlsField::eval(const Vec3& x) const {
  thread_local std::vector<Neighbor> nb;
  index_.knn(x, k_eff_, nb);
  if (config_.kernel == Kernel::interpolatory && nb.front().dist2 == 0.0) return 0.0;
  const double h = std::max(std::sqrt(nb.front().dist2) / support_, config_.h0);
  return weighted_mean(x, nb, h, 0.0);
}

double EimlsField::eval_truncated(const Vec3& x) const { return truncate_tanh(eval(x), config_.epsilon); }

std::optional<double> EimlsField::eval_plain_imls(const Vec3& x, double h_const) const {
  require(h_const > 0.0, "eval_plain_imls: h must be > 0");
  thread_local std::vector<Neighbor> nb;
  index_.knn(x, k_eff_, nb);
  if (config_.kernel == Kernel::interpolatory && nb.front().dist2 == 0.0) return 0.0;
  const double v = weighted_mean(x, nb, h_const, std::pow(10.0, -config_.gamma));
  if (std::isnan(v)) return std::nullopt;
  return v;
}

Vec3 EimlsField::gradient(const Vec3& x) const {
  const double step = config_.h0 / 10.0;
  Vec3 g = Vec3::Zero();
  for (int a = 0; a < cloud_.dim; ++a) {
    Vec3 xp = x;
    Vec3 xm = x;
    xp[a] += step;
    xm[a] -= step;
    g[a] = (eval(xp) - eval(xm)) / (2.0 * step);
  }
  return g;
}

std::vector<double> sample_at(const EimlsField& field, std::span<const Vec3> points, bool truncated, Exec exec) {
  std::vector<double> out(points.size());
  for_each_index(points.size(), exec, [&](std::size_t i) {
    out[i] = truncated ? field.eval_truncated(points[i]) : field.eval(points[i]);
  });
  return out;
}

ScalarGrid sample_on_grid(const EimlsField& field, const Box& domain, std::array<int, 3> resolution,
                          GridMode mode, double plain_h, Exec exec) {
  const int dim = field.dim();
  ScalarGrid grid;
  grid.dim = dim;
  grid.resolution = {1, 1, 1};
  grid.origin = Vec3::Zero();
  for (int a = 0; a < dim; ++a) {
    require(resolution[a] >= 2, "sample_on_grid: resolution must be >= 2 per axis");
    require(domain.hi[a] > domain.lo[a], "sample_on_grid: degenerate domain box");
    grid.resolution[a] = resolution[a];
    grid.origin[a] = domain.lo[a];
    grid.spacing[a] = (domain.hi[a] - domain.lo[a]) / (resolution[a] - 1);
  }
  if (mode == GridMode::plain_imls) require(plain_h > 0.0, "sample_on_grid: plain IMLS needs h > 0");
  const auto [nx, ny, nz] = grid.resolution;
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
  grid.values.assign(total, 0.0);
  for_each_index(total, exec, [&](std::size_t idx) {
    const int i = static_cast<int>(idx % nx);
    const int j = static_cast<int>((idx / nx) % ny);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
    const Vec3 x = grid.position(i, j, k);
    switch (mode) {
      case GridMode::eimls: grid.values[idx] = field.eval(x); break;
      case GridMode::truncated: grid.values[idx] = field.eval_truncated(x); break;
      case GridMode::plain_imls: {
        auto v = field.eval_plain_imls(x, plain_h);
        grid.values[idx] = v ? *v : std::numeric_limits<double>::quiet_NaN();
        break;
      }
    }
  });
  return grid;
}

}  // namespace eimesh
