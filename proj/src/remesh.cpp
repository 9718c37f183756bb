#include "eimesh/remesh.hpp"

#include "eimesh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eimesh {

void AdaptOptions::validate() const {
  require(collapse_threshold > 0.0 && collapse_threshold < 1.0, "adapt: collapse threshold must be in (0, 1)");
  require(split_threshold > 1.0 && std::isfinite(split_threshold), "adapt: split threshold must be > 1");
  require(max_sweeps >= 0, "adapt: max sweeps must be >= 0");
  require(smoothing_passes >= 0, "adapt: smoothing passes must be >= 0");
  require(target_in_range > 0.0 && target_in_range <= 1.0, "adapt: target in-range fraction must be in (0, 1]");
  if (bounds) bounds->validate();
}

double metric_edge_length(const Vec3& x, const Mat3& mi, const Mat3& mj) {
  const double li = std::sqrt(std::max(0.0, linalg::quad_form(mi, x)));
  const double lj = std::sqrt(std::max(0.0, linalg::quad_form(mj, x)));
  return 0.5 * (li + lj);
}

double metric_edge_length(const SimplicialMesh& mesh, const MetricField& metric, const Edge& edge) {
  const Vec3 x = mesh.node(static_cast<std::size_t>(edge.b)) - mesh.node(static_cast<std::size_t>(edge.a));
  return metric_edge_length(x, metric[static_cast<std::size_t>(edge.a)], metric[static_cast<std::size_t>(edge.b)]);
}

std::vector<double> metric_edge_lengths(const SimplicialMesh& mesh, const MetricField& metric) {
  require(metric.size() == mesh.num_nodes(), "metric_edge_lengths: metric size does not match node count");
  std::vector<double> out;
  out.reserve(mesh.num_edges());
  for (const auto& e : mesh.edges()) out.push_back(metric_edge_length(mesh, metric, e));
  return out;
}

double in_range_fraction(std::span<const double> lengths, double lo, double hi) {
  if (lengths.empty()) return 1.0;
  std::size_t in = 0;
  for (double l : lengths)
    if (l >= lo && l <= hi) ++in;
  return static_cast<double>(in) / static_cast<double>(lengths.size());
}

double simplex_quality(int dim, const Vec3* p, const Mat3& m) {
  const double vol = simplex_volume(dim, p) * std::sqrt(std::max(0.0, linalg::det(m, dim)));
  double sum = 0.0;
  for (int a = 0; a <= dim; ++a)
    for (int b = a + 1; b <= dim; ++b) sum += linalg::quad_form(m, p[b] - p[a]);
  if (!(sum > 0.0)) return 0.0;
  if (dim == 2) return 4.0 * std::sqrt(3.0) * vol / sum;
  const double v3 = 3.0 * vol;
  return 12.0 * std::copysign(std::pow(std::abs(v3), 2.0 / 3.0), v3) / sum;
}

double aspect_ratio(int dim, const Vec3* p) {
  double lmax = 0.0;
  for (int a = 0; a <= dim; ++a)
    for (int b = a + 1; b <= dim; ++b) lmax = std::max(lmax, (p[b] - p[a]).head(dim).norm());
  const double vol = std::abs(simplex_volume(dim, p));
  double boundary = 0.0;  // perimeter (2D) or surface area (3D)
  if (dim == 2) {
    for (int a = 0; a < 3; ++a) boundary += (p[(a + 1) % 3] - p[a]).head(2).norm();
  } else {
    static constexpr int faces[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& f : faces) boundary += 0.5 * (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]).norm();
  }
  if (!(vol > 0.0)) return std::numeric_limits<double>::infinity();
  const double r_in = dim * vol / boundary;
  return lmax / ((dim == 2 ? 2.0 * std::sqrt(3.0) : 2.0 * std::sqrt(6.0)) * r_in);
}

double element_quality(const SimplicialMesh& mesh, const MetricField& metric, std::size_t e) {
  const int dim = mesh.dim();
  const auto& el = mesh.element(e);
  Vec3 p[4];
  Mat3 m = Mat3::Zero();
  for (int k = 0; k <= dim; ++k) {
    p[k] = mesh.node(static_cast<std::size_t>(el[k]));
    m += metric[static_cast<std::size_t>(el[k])];
  }
  return simplex_quality(dim, p, m / (dim + 1));
}

namespace {

using Id = std::int32_t;

template <class V, class T>
void erase_value(V& v, const T& x) {
  const auto it = std::find(v.begin(), v.end(), x);
  if (it != v.end()) v.erase(it);
}

bool contains(const Element& el, int nv, Id v) {
  for (int k = 0; k < nv; ++k)
    if (el[k] == v) return true;
  return false;
}

void replace(Element& el, int nv, Id from, Id to) {
  for (int k = 0; k < nv; ++k)
    if (el[k] == from) el[k] = to;
}

// Mutable working copy of a mesh with its nodal data.
class Remesher {
 public:
  Remesher(const SimplicialMesh& mesh, const MetricField& metric, std::vector<NodalField> fields,
           const AdaptOptions& options)
      : dim_(mesh.dim()), nv_(mesh.dim() + 1), domain_(mesh.domain()), opt_(options), names_() {
    require(metric.size() == mesh.num_nodes() && metric.dim == dim_, "adapt: metric does not match the mesh");
    nf_ = fields.size();
    for (const auto& f : fields) {
      require(f.values.size() == mesh.num_nodes(), "adapt: field '" + f.name + "' does not match the mesh");
      names_.push_back(f.name);
    }
    const std::size_t n = mesh.num_nodes();
    x_ = mesh.nodes();
    m_ = metric.tensors;
    mask_.resize(n);
    alive_.assign(n, 1);
    fv_.resize(n * nf_);
    for (std::size_t i = 0; i < n; ++i) {
      mask_[i] = mesh.boundary_mask(i);
      for (std::size_t f = 0; f < nf_; ++f) fv_[i * nf_ + f] = fields[f].values[i];
    }
    el_ = mesh.elements();
    el_alive_.assign(el_.size(), 1);
    ne_.resize(n);
    for (std::size_t e = 0; e < el_.size(); ++e)
      for (int k = 0; k < nv_; ++k) ne_[static_cast<std::size_t>(el_[e][k])].push_back(static_cast<Id>(e));
    double vol = 1.0;
    for (int a = 0; a < dim_; ++a) vol *= domain_.extent()[a];
    vol_tol_ = 1e-13 * vol;
  }

  AdaptResult run() {
    AdaptStats st;
    st.in_range_fraction = current_in_range();
    for (int sweep = 0; sweep < opt_.max_sweeps; ++sweep) {
      if (st.in_range_fraction >= opt_.target_in_range) break;
      st.splits += split_pass();
      st.collapses += collapse_pass();
      if (dim_ == 2) {
        st.flips += flip_pass_2d();
      } else if (opt_.flips_3d) {
        st.flips += flip_pass_3d();
      }
      for (int s = 0; s < opt_.smoothing_passes; ++s) st.moves += smooth_pass();
      compact();
      st.sweeps = sweep + 1;
      st.in_range_fraction = current_in_range();
    }
    st.converged = st.in_range_fraction >= opt_.target_in_range;

    AdaptResult r;
    r.mesh = SimplicialMesh(dim_, x_, el_, domain_);
    if (r.mesh.orientation_repairs() != 0) throw InternalError("adapt: inverted element produced");
    r.metric.dim = dim_;
    r.metric.tensors = m_;
    for (std::size_t f = 0; f < nf_; ++f) {
      NodalField nf{names_[f], std::vector<double>(x_.size())};
      for (std::size_t i = 0; i < x_.size(); ++i) nf.values[i] = fv_[i * nf_ + f];
      r.fields.push_back(std::move(nf));
    }
    r.stats = st;
    return r;
  }

 private:
  // ---- geometry helpers -------------------------------------------------

  double length(Id a, Id b) const {
    return metric_edge_length(x_[b] - x_[a], m_[a], m_[b]);
  }

  // Quality of element `el` with node `moved` placed at `pos`.
  double quality(const Element& el, Id moved = -1, const Vec3* pos = nullptr) const {
    Vec3 p[4];
    Mat3 m = Mat3::Zero();
    for (int k = 0; k < nv_; ++k) {
      p[k] = (el[k] == moved) ? *pos : x_[el[k]];
      m += m_[el[k]];
    }
    return simplex_quality(dim_, p, m / nv_);
  }

  double volume(const Element& el, Id moved = -1, const Vec3* pos = nullptr) const {
    Vec3 p[4];
    for (int k = 0; k < nv_; ++k) p[k] = (el[k] == moved) ? *pos : x_[el[k]];
    return simplex_volume(dim_, p);
  }

  std::vector<Edge> collect_edges() const {
    std::vector<Edge> edges;
    edges.reserve(el_.size() * (dim_ == 2 ? 3 : 6));
    for (std::size_t e = 0; e < el_.size(); ++e) {
      if (!el_alive_[e]) continue;
      const auto& el = el_[e];
      for (int a = 0; a < nv_; ++a)
        for (int b = a + 1; b < nv_; ++b) edges.push_back({std::min(el[a], el[b]), std::max(el[a], el[b])});
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
  }

  std::vector<Id> shared_elements(Id a, Id b) const {
    std::vector<Id> out;
    for (const Id e : ne_[a])
      if (contains(el_[e], nv_, b)) out.push_back(e);
    return out;
  }

  // Sorted neighbor set of node i.
  std::vector<Id> neighbors(Id i) const {
    std::vector<Id> out;
    for (const Id e : ne_[i])
      for (int k = 0; k < nv_; ++k)
        if (el_[e][k] != i) out.push_back(el_[e][k]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  double current_in_range() const {
    const auto edges = collect_edges();
    std::vector<double> l;
    l.reserve(edges.size());
    for (const auto& e : edges) l.push_back(length(e.a, e.b));
    return in_range_fraction(l, opt_.collapse_threshold, opt_.split_threshold);
  }

  Mat3 bounded(const Mat3& m) const {
    Mat3 s = linalg::leading_block(linalg::symmetrize(m), dim_);
    return opt_.bounds ? regularize(s, dim_, *opt_.bounds) : s;
  }

  void reevaluate(Id i) {
    if (opt_.reevaluate && nf_ > 0) opt_.reevaluate(x_[i], std::span<double>(fv_.data() + i * nf_, nf_));
  }

  Id add_node(const Vec3& p, FaceMask mask) {
    x_.push_back(p);
    mask_.push_back(mask);
    m_.push_back(Mat3::Zero());
    alive_.push_back(1);
    fv_.resize(fv_.size() + nf_);
    ne_.emplace_back();
    return static_cast<Id>(x_.size() - 1);
  }

  Id add_element(const Element& el) {
    el_.push_back(el);
    el_alive_.push_back(1);
    const Id id = static_cast<Id>(el_.size() - 1);
    for (int k = 0; k < nv_; ++k) ne_[el[k]].push_back(id);
    return id;
  }

  void kill_element(Id e) {
    el_alive_[e] = 0;
    for (int k = 0; k < nv_; ++k) erase_value(ne_[el_[e][k]], e);
  }

  // ---- splits -----------------------------------------------------------

  std::size_t split_pass() {
    struct Cand {
      double len;
      Edge e;
    };
    std::vector<Cand> cands;
    for (const auto& e : collect_edges()) {
      const double l = length(e.a, e.b);
      if (l > opt_.split_threshold) cands.push_back({l, e});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& p, const Cand& q) {
      if (p.len != q.len) return p.len > q.len;
      return p.e < q.e;
    });
    std::size_t count = 0;
    for (const auto& c : cands)
      if (split_edge(c.e.a, c.e.b)) ++count;
    return count;
  }

  bool split_edge(Id a, Id b) {
    const auto shared = shared_elements(a, b);
    if (shared.empty()) return false;
    const Id m = add_node(0.5 * (x_[a] + x_[b]), mask_[a] & mask_[b]);
    m_[m] = bounded(0.5 * (m_[a] + m_[b]));
    for (std::size_t f = 0; f < nf_; ++f) fv_[m * nf_ + f] = 0.5 * (fv_[a * nf_ + f] + fv_[b * nf_ + f]);
    reevaluate(m);
    for (const Id e : shared) {
      Element child = el_[e];
      replace(child, nv_, a, m);
      replace(el_[e], nv_, b, m);
      erase_value(ne_[b], e);
      ne_[m].push_back(e);
      add_element(child);
    }
    return true;
  }

  // ---- collapses --------------------------------------------------------

  std::size_t collapse_pass() {
    struct Cand {
      double len;
      Edge e;
    };
    std::vector<Cand> cands;
    for (const auto& e : collect_edges()) {
      const double l = length(e.a, e.b);
      if (l < opt_.collapse_threshold) cands.push_back({l, e});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& p, const Cand& q) {
      if (p.len != q.len) return p.len < q.len;
      return p.e < q.e;
    });
    std::size_t count = 0;
    for (const auto& c : cands) {
      const Id a = c.e.a, b = c.e.b;
      if (!alive_[a] || !alive_[b]) continue;
      if (length(a, b) >= opt_.collapse_threshold) continue;
      if (shared_elements(a, b).empty()) continue;
      const auto qa = evaluate_collapse(a, b);
      const auto qb = evaluate_collapse(b, a);
      if (!qa && !qb) continue;
      if (qa && (!qb || *qa >= *qb)) {
        apply_collapse(a, b);
      } else {
        apply_collapse(b, a);
      }
      ++count;
    }
    return count;
  }

  // Minimum quality after removing r onto k, or nothing when not allowed.
  std::optional<double> evaluate_collapse(Id r, Id k) const {
    // r must stay on every domain face it lies on.
    if ((mask_[r] & ~mask_[k]) != 0) return std::nullopt;
    if (!link_condition(r, k)) return std::nullopt;

    double old_q = std::numeric_limits<double>::infinity();
    for (const Id e : ne_[r]) old_q = std::min(old_q, quality(el_[e]));

    double new_q = std::numeric_limits<double>::infinity();
    const Vec3& pk = x_[k];
    for (const Id e : ne_[r]) {
      if (contains(el_[e], nv_, k)) continue;
      if (!(volume(el_[e], r, &pk) > vol_tol_)) return std::nullopt;
      Element t = el_[e];
      replace(t, nv_, r, k);
      new_q = std::min(new_q, quality(t));
    }
    if (!(new_q >= std::min(0.3, 0.5 * old_q))) return std::nullopt;
    for (const Id c : neighbors(r))
      if (c != k && length(k, c) > opt_.split_threshold) return std::nullopt;
    return new_q;
  }

  // Link condition: the common neighborhood of r and k is exactly the link
  // of edge rk (vertices, and in 3D also link edges).
  bool link_condition(Id r, Id k) const {
    const auto nr = neighbors(r);
    const auto nk = neighbors(k);
    std::vector<Id> common;
    std::set_intersection(nr.begin(), nr.end(), nk.begin(), nk.end(), std::back_inserter(common));
    std::vector<Id> opposite;
    std::vector<Edge> edge_link;
    for (const Id e : ne_[r]) {
      if (!contains(el_[e], nv_, k)) continue;
      std::array<Id, 2> rest{-1, -1};
      int n = 0;
      for (int q = 0; q < nv_; ++q)
        if (el_[e][q] != r && el_[e][q] != k) {
          opposite.push_back(el_[e][q]);
          rest[n++] = el_[e][q];
        }
      if (dim_ == 3) edge_link.push_back({std::min(rest[0], rest[1]), std::max(rest[0], rest[1])});
    }
    std::sort(opposite.begin(), opposite.end());
    opposite.erase(std::unique(opposite.begin(), opposite.end()), opposite.end());
    if (common != opposite) return false;
    if (dim_ == 2) return true;

    auto link_edges = [&](Id v) {
      std::vector<Edge> out;
      for (const Id e : ne_[v]) {
        Id o[3];
        int n = 0;
        for (int q = 0; q < 4; ++q)
          if (el_[e][q] != v) o[n++] = el_[e][q];
        for (int p = 0; p < 3; ++p)
          for (int q = p + 1; q < 3; ++q) out.push_back({std::min(o[p], o[q]), std::max(o[p], o[q])});
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    };
    const auto er = link_edges(r);
    const auto ek = link_edges(k);
    std::sort(edge_link.begin(), edge_link.end());
    for (const auto& e : er) {
      if (e.a == k || e.b == k) continue;
      if (!std::binary_search(ek.begin(), ek.end(), e)) continue;
      if (!std::binary_search(edge_link.begin(), edge_link.end(), e)) return false;
    }
    return true;
  }

  void apply_collapse(Id r, Id k) {
    const std::vector<Id> star = ne_[r];
    for (const Id e : star) {
      if (contains(el_[e], nv_, k)) {
        kill_element(e);
      } else {
        replace(el_[e], nv_, r, k);
        ne_[k].push_back(e);
      }
    }
    ne_[r].clear();
    alive_[r] = 0;
  }

  // ---- flips ------------------------------------------------------------

  static Id opposite_2d(const Element& t, Id a, Id b) {
    for (int k = 0; k < 3; ++k)
      if (t[k] != a && t[k] != b) return t[k];
    return -1;
  }

  bool adjacent(Id a, Id b) const { return !shared_elements(a, b).empty(); }

  std::size_t flip_pass_2d() {
    std::size_t count = 0;
    for (int pass = 0; pass < 3; ++pass) {
      std::size_t flips = 0;
      for (const auto& edge : collect_edges()) {
        const Id a = edge.a, b = edge.b;
        if (!alive_[a] || !alive_[b]) continue;
        const auto shared = shared_elements(a, b);
        if (shared.size() != 2) continue;
        const Id t1 = shared[0], t2 = shared[1];
        const Id c = opposite_2d(el_[t1], a, b);
        const Id d = opposite_2d(el_[t2], a, b);
        if (c == d || adjacent(c, d)) continue;

        // t1 keeps a and c and gains d; t2 keeps b and d and gains c.
        Element n1 = el_[t1], n2 = el_[t2];
        replace(n1, 3, b, d);
        replace(n2, 3, a, c);
        if (!(volume(n1) > vol_tol_) || !(volume(n2) > vol_tol_)) {
          // The pair may be stored the other way round.
          n1 = el_[t1];
          n2 = el_[t2];
          replace(n1, 3, a, d);
          replace(n2, 3, b, c);
          if (!(volume(n1) > vol_tol_) || !(volume(n2) > vol_tol_)) continue;
        }
        if (!metric_incircle(a, b, c, d)) continue;
        const double q_old = std::min(quality(el_[t1]), quality(el_[t2]));
        const double q_new = std::min(quality(n1), quality(n2));
        if (!(q_new > q_old + 1e-12) || q_new < opt_.flip_quality_floor) continue;

        for (int k = 0; k < 3; ++k) {
          if (!contains(n1, 3, el_[t1][k])) erase_value(ne_[el_[t1][k]], t1);
          if (!contains(n2, 3, el_[t2][k])) erase_value(ne_[el_[t2][k]], t2);
        }
        for (int k = 0; k < 3; ++k) {
          if (!contains(el_[t1], 3, n1[k])) ne_[n1[k]].push_back(t1);
          if (!contains(el_[t2], 3, n2[k])) ne_[n2[k]].push_back(t2);
        }
        el_[t1] = n1;
        el_[t2] = n2;
        ++flips;
      }
      count += flips;
      if (flips == 0) break;
    }
    return count;
  }

  // d inside the circumcircle of (a, b, c) after mapping by the mean metric
  // of the four nodes.
  bool metric_incircle(Id a, Id b, Id c, Id d) const {
    const Mat3 m = 0.25 * (m_[a] + m_[b] + m_[c] + m_[d]);
    const Mat3 lt = linalg::cholesky(m, 2).transpose();
    const Vec3 pa = lt * x_[a], pb = lt * x_[b], pc = lt * x_[c], pd = lt * x_[d];
    auto row = [&](const Vec3& p) {
      const Vec3 q = p - pd;
      return Vec3(q.x(), q.y(), q.x() * q.x() + q.y() * q.y());
    };
    Mat3 t;
    t.row(0) = row(pa);
    t.row(1) = row(pb);
    t.row(2) = row(pc);
    const double orient = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
    const double det = t.determinant();
    return orient > 0 ? det > 0 : det < 0;
  }

  // 3-2 swaps around interior edges of valence 3, then 2-3 swaps across
  // interior faces. Both only when the minimum quality strictly improves.
  std::size_t flip_pass_3d() {
    std::size_t count = 0;
    for (const auto& edge : collect_edges()) {
      const Id a = edge.a, b = edge.b;
      if (!alive_[a] || !alive_[b]) continue;
      const auto shared = shared_elements(a, b);
      if (shared.size() != 3) continue;
      std::vector<Id> ring;
      for (const Id e : shared)
        for (int k = 0; k < 4; ++k)
          if (el_[e][k] != a && el_[e][k] != b) ring.push_back(el_[e][k]);
      std::sort(ring.begin(), ring.end());
      if (!(ring.size() == 6 && ring[0] == ring[1] && ring[2] == ring[3] && ring[4] == ring[5] &&
            ring[1] != ring[2] && ring[3] != ring[4]))
        continue;  // not a closed ring: boundary edge
      const Id c = ring[0], d = ring[2], e = ring[4];
      if (face_exists(c, d, e)) continue;
      Element t1{c, d, e, a}, t2{c, d, e, b};
      if (volume(t1) < 0) std::swap(t1[0], t1[1]);
      if (volume(t2) < 0) std::swap(t2[0], t2[1]);
      const double v_old = volume(el_[shared[0]]) + volume(el_[shared[1]]) + volume(el_[shared[2]]);
      const double v1 = volume(t1), v2 = volume(t2);
      if (!(v1 > vol_tol_ && v2 > vol_tol_) || std::abs(v1 + v2 - v_old) > 1e-9 * v_old) continue;
      double q_old = std::numeric_limits<double>::infinity();
      for (const Id s : shared) q_old = std::min(q_old, quality(el_[s]));
      const double q_new = std::min(quality(t1), quality(t2));
      if (!(q_new > q_old + 1e-12) || q_new < opt_.flip_quality_floor) continue;
      for (const Id s : shared) kill_element(s);
      add_element(t1);
      add_element(t2);
      ++count;
    }

    std::vector<std::array<Id, 3>> faces;
    for (std::size_t e = 0; e < el_.size(); ++e) {
      if (!el_alive_[e]) continue;
      for (int skip = 0; skip < 4; ++skip) {
        std::array<Id, 3> f{};
        int n = 0;
        for (int k = 0; k < 4; ++k)
          if (k != skip) f[n++] = el_[e][k];
        std::sort(f.begin(), f.end());
        faces.push_back(f);
      }
    }
    std::sort(faces.begin(), faces.end());
    faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
    for (const auto& face : faces) {
      const auto [a, b, c] = face;
      if (!alive_[a] || !alive_[b] || !alive_[c]) continue;
      std::vector<Id> tets;
      for (const Id e : ne_[a])
        if (contains(el_[e], 4, b) && contains(el_[e], 4, c)) tets.push_back(e);
      if (tets.size() != 2) continue;
      Id d = -1, e = -1;
      for (int k = 0; k < 4; ++k) {
        if (!contains(Element{a, b, c, -1}, 3, el_[tets[0]][k])) d = el_[tets[0]][k];
        if (!contains(Element{a, b, c, -1}, 3, el_[tets[1]][k])) e = el_[tets[1]][k];
      }
      if (d == e || adjacent(d, e)) continue;
      std::array<Element, 3> nt{Element{a, b, d, e}, Element{b, c, d, e}, Element{c, a, d, e}};
      double v_new = 0.0;
      bool ok = true;
      for (auto& t : nt) {
        if (volume(t) < 0) std::swap(t[0], t[1]);
        const double v = volume(t);
        ok = ok && v > vol_tol_;
        v_new += v;
      }
      const double v_old = volume(el_[tets[0]]) + volume(el_[tets[1]]);
      if (!ok || std::abs(v_new - v_old) > 1e-9 * v_old) continue;
      const double q_old = std::min(quality(el_[tets[0]]), quality(el_[tets[1]]));
      double q_new = std::numeric_limits<double>::infinity();
      for (const auto& t : nt) q_new = std::min(q_new, quality(t));
      if (!(q_new > q_old + 1e-12) || q_new < opt_.flip_quality_floor) continue;
      kill_element(tets[0]);
      kill_element(tets[1]);
      for (const auto& t : nt) add_element(t);
      ++count;
    }
    return count;
  }

  bool face_exists(Id a, Id b, Id c) const {
    for (const Id e : ne_[a])
      if (contains(el_[e], nv_, b) && contains(el_[e], nv_, c)) return true;
    return false;
  }

  // ---- smoothing --------------------------------------------------------

  std::size_t smooth_pass() {
    std::size_t count = 0;
    const auto n = static_cast<Id>(x_.size());
    for (Id i = 0; i < n; ++i) {
      if (!alive_[i] || ne_[i].empty()) continue;
      std::array<bool, 3> fixed{false, false, false};
      int nfixed = 0;
      for (int a = 0; a < dim_; ++a) {
        fixed[a] = (mask_[i] >> (2 * a)) & 3u;
        nfixed += fixed[a];
      }
      if (nfixed == dim_) continue;
      const auto nb = neighbors(i);
      Vec3 disp = Vec3::Zero();
      for (const Id j : nb) {
        const Vec3 x = x_[j] - x_[i];
        const double l = length(i, j);
        if (l > 0.0) disp += x * (1.0 - 1.0 / l);
      }
      disp /= static_cast<double>(nb.size());
      for (int a = 0; a < 3; ++a)
        if (a >= dim_ || fixed[a]) disp[a] = 0.0;
      if (!(disp.norm() > 1e-12 * domain_.diagonal(dim_))) continue;

      double old_q = std::numeric_limits<double>::infinity();
      for (const Id e : ne_[i]) old_q = std::min(old_q, quality(el_[e]));
      for (const double step : {1.0, 0.5, 0.25}) {
        const Vec3 p = x_[i] + step * disp;
        bool ok = true;
        double new_q = std::numeric_limits<double>::infinity();
        for (const Id e : ne_[i]) {
          if (!(volume(el_[e], i, &p) > vol_tol_)) {
            ok = false;
            break;
          }
          new_q = std::min(new_q, quality(el_[e], i, &p));
        }
        if (!ok || new_q < std::min(old_q, 0.4)) continue;
        if (!move_node(i, p)) continue;
        ++count;
        break;
      }
    }
    return count;
  }

  // Moves node i to p, interpolating its data from the element of its old
  // star that contains p. False when no star element contains p.
  bool move_node(Id i, const Vec3& p) {
    for (const Id e : ne_[i]) {
      const auto& el = el_[e];
      Mat3 t = Mat3::Identity();
      for (int k = 1; k < nv_; ++k) t.col(k - 1) = x_[el[k]] - x_[el[0]];
      const Vec3 rhs = p - x_[el[0]];
      Vec3 lam = Vec3::Zero();
      if (dim_ == 2) {
        lam.head<2>() = t.topLeftCorner<2, 2>().inverse() * rhs.head<2>();
      } else {
        lam = t.inverse() * rhs;
      }
      std::array<double, 4> w{1.0 - lam.head(dim_).sum(), lam[0], lam[1], lam[2]};
      double mn = w[0];
      for (int k = 1; k < nv_; ++k) mn = std::min(mn, w[k]);
      if (mn < -1e-10) continue;
      Mat3 m = Mat3::Zero();
      std::vector<double> vals(nf_, 0.0);
      for (int k = 0; k < nv_; ++k) {
        m += w[k] * m_[el[k]];
        for (std::size_t f = 0; f < nf_; ++f) vals[f] += w[k] * fv_[el[k] * nf_ + f];
      }
      x_[i] = p;
      m_[i] = bounded(m);
      for (std::size_t f = 0; f < nf_; ++f) fv_[i * nf_ + f] = vals[f];
      reevaluate(i);
      return true;
    }
    return false;
  }

  // ---- compaction -------------------------------------------------------

  void compact() {
    std::vector<Id> map(x_.size(), -1);
    Id next = 0;
    for (std::size_t i = 0; i < x_.size(); ++i)
      if (alive_[i] && !ne_[i].empty()) map[i] = next++;
    std::vector<Vec3> x(next);
    std::vector<Mat3> m(next);
    std::vector<FaceMask> mask(next);
    std::vector<double> fv(static_cast<std::size_t>(next) * nf_);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const Id j = map[i];
      if (j < 0) continue;
      x[j] = x_[i];
      m[j] = m_[i];
      mask[j] = mask_[i];
      for (std::size_t f = 0; f < nf_; ++f) fv[j * nf_ + f] = fv_[i * nf_ + f];
    }
    std::vector<Element> el;
    el.reserve(el_.size());
    for (std::size_t e = 0; e < el_.size(); ++e) {
      if (!el_alive_[e]) continue;
      Element t = el_[e];
      for (int k = 0; k < nv_; ++k) t[k] = map[t[k]];
      el.push_back(t);
    }
    x_ = std::move(x);
    m_ = std::move(m);
    mask_ = std::move(mask);
    fv_ = std::move(fv);
    el_ = std::move(el);
    alive_.assign(x_.size(), 1);
    el_alive_.assign(el_.size(), 1);
    ne_.assign(x_.size(), {});
    for (std::size_t e = 0; e < el_.size(); ++e)
      for (int k = 0; k < nv_; ++k) ne_[el_[e][k]].push_back(static_cast<Id>(e));
  }

  int dim_;
  int nv_;
  Box domain_;
  AdaptOptions opt_;
  std::vector<std::string> names_;
  std::size_t nf_ = 0;
  double vol_tol_ = 0.0;

  std::vector<Vec3> x_;
  std::vector<Mat3> m_;
  std::vector<FaceMask> mask_;
  std::vector<char> alive_;
  std::vector<double> fv_;  // node-major, nf_ values per node
  std::vector<Element> el_;
  std::vector<char> el_alive_;
  std::vector<std::vector<Id>> ne_;
};

}  // namespace

AdaptResult adapt(const SimplicialMesh& mesh, const MetricField& metric, std::vector<NodalField> fields,
                  const AdaptOptions& options) {
  options.validate();
  Remesher r(mesh, metric, std::move(fields), options);
  return r.run();
}

}  // namespace eimesh
