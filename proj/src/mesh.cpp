#include "eimesh/mesh.hpp"

#include "eimesh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace eimesh {

double simplex_volume(int dim, const Vec3* p) {
  if (dim == 2) {
    const Vec3 a = p[1] - p[0];
    const Vec3 b = p[2] - p[0];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  const Vec3 a = p[1] - p[0];
  const Vec3 b = p[2] - p[0];
  const Vec3 c = p[3] - p[0];
  return a.dot(b.cross(c)) / 6.0;
}

FaceMask face_mask(const Box& domain, const Vec3& p, int dim) {
  const double tol = 1e-10 * std::max(domain.diagonal(dim), 1e-300);
  FaceMask m = 0;
  for (int a = 0; a < dim; ++a) {
    if (std::abs(p[a] - domain.lo[a]) <= tol) m |= static_cast<FaceMask>(1u << (2 * a));
    if (std::abs(p[a] - domain.hi[a]) <= tol) m |= static_cast<FaceMask>(1u << (2 * a + 1));
  }
  return m;
}

SimplicialMesh::SimplicialMesh(int dim, std::vector<Vec3> nodes, std::vector<Element> elements,
                               std::optional<Box> domain)
    : dim_(dim), nodes_(std::move(nodes)), elements_(std::move(elements)) {
  require(dim == 2 || dim == 3, "mesh: dim must be 2 or 3");
  const int nv = dim_ + 1;
  const auto n = static_cast<std::int32_t>(nodes_.size());
  for (auto& p : nodes_) {
    if (!p.allFinite()) throw PreconditionError("mesh: non-finite node coordinate");
    if (dim_ == 2) p.z() = 0.0;
  }
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    auto& el = elements_[e];
    if (dim_ == 2) el[3] = -1;
    for (int k = 0; k < nv; ++k) {
      if (el[k] < 0 || el[k] >= n)
        throw PreconditionError("mesh: element " + std::to_string(e) + " references a missing node");
      for (int q = 0; q < k; ++q)
        if (el[q] == el[k]) throw PreconditionError("mesh: element " + std::to_string(e) + " repeats a node");
    }
    if (element_volume(e) < 0.0) {
      std::swap(el[0], el[1]);
      ++repairs_;
    }
  }

  if (domain) {
    domain_ = *domain;
  } else {
    for (const auto& p : nodes_) domain_.extend(p);
  }
  masks_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) masks_[i] = face_mask(domain_, nodes_[i], dim_);

  edges_.reserve(elements_.size() * (dim_ == 2 ? 3 : 6));
  for (const auto& el : elements_)
    for (int a = 0; a < nv; ++a)
      for (int b = a + 1; b < nv; ++b)
        edges_.push_back({std::min(el[a], el[b]), std::max(el[a], el[b])});
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  std::vector<std::int32_t> degree(nodes_.size(), 0);
  for (const auto& e : edges_) {
    ++degree[e.a];
    ++degree[e.b];
  }
  star_offsets_.assign(nodes_.size() + 1, 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) star_offsets_[i + 1] = star_offsets_[i] + degree[i];
  star_nodes_.resize(star_offsets_.back());
  star_edge_ids_.resize(star_offsets_.back());
  std::vector<std::int32_t> fill(star_offsets_.begin(), star_offsets_.end() - 1);
  // Edges are sorted by (a, b): each node's entries arrive in ascending order.
  for (std::size_t id = 0; id < edges_.size(); ++id) {
    const auto& e = edges_[id];
    star_nodes_[fill[e.a]] = e.b;
    star_edge_ids_[fill[e.a]++] = static_cast<std::int32_t>(id);
  }
  for (std::size_t id = 0; id < edges_.size(); ++id) {
    const auto& e = edges_[id];
    star_nodes_[fill[e.b]] = e.a;
    star_edge_ids_[fill[e.b]++] = static_cast<std::int32_t>(id);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto b = star_offsets_[i];
    const auto e = star_offsets_[i + 1];
    std::vector<std::pair<std::int32_t, std::int32_t>> tmp;
    for (auto k = b; k < e; ++k) tmp.emplace_back(star_nodes_[k], star_edge_ids_[k]);
    std::sort(tmp.begin(), tmp.end());
    for (auto k = b; k < e; ++k) {
      star_nodes_[k] = tmp[k - b].first;
      star_edge_ids_[k] = tmp[k - b].second;
    }
  }

  elem_offsets_.assign(nodes_.size() + 1, 0);
  for (const auto& el : elements_)
    for (int k = 0; k < nv; ++k) ++elem_offsets_[el[k] + 1];
  for (std::size_t i = 0; i < nodes_.size(); ++i) elem_offsets_[i + 1] += elem_offsets_[i];
  elem_ids_.resize(elem_offsets_.back());
  std::vector<std::int32_t> efill(elem_offsets_.begin(), elem_offsets_.end() - 1);
  for (std::size_t e = 0; e < elements_.size(); ++e)
    for (int k = 0; k < nv; ++k) elem_ids_[efill[elements_[e][k]]++] = static_cast<std::int32_t>(e);
}

std::span<const std::int32_t> SimplicialMesh::star(std::size_t i) const {
  return {star_nodes_.data() + star_offsets_[i], static_cast<std::size_t>(star_offsets_[i + 1] - star_offsets_[i])};
}

std::span<const std::int32_t> SimplicialMesh::star_edges(std::size_t i) const {
  return {star_edge_ids_.data() + star_offsets_[i],
          static_cast<std::size_t>(star_offsets_[i + 1] - star_offsets_[i])};
}

std::span<const std::int32_t> SimplicialMesh::node_elements(std::size_t i) const {
  return {elem_ids_.data() + elem_offsets_[i], static_cast<std::size_t>(elem_offsets_[i + 1] - elem_offsets_[i])};
}

std::int32_t SimplicialMesh::edge_id(std::int32_t i, std::int32_t j) const {
  if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= nodes_.size() || static_cast<std::size_t>(j) >= nodes_.size())
    return -1;
  const auto s = star(static_cast<std::size_t>(i));
  const auto it = std::lower_bound(s.begin(), s.end(), j);
  if (it == s.end() || *it != j) return -1;
  return star_edges(static_cast<std::size_t>(i))[static_cast<std::size_t>(it - s.begin())];
}

Vec3 SimplicialMesh::edge_vector(std::int32_t i, std::int32_t j) const {
  if (edge_id(i, j) < 0)
    throw PreconditionError("edge_vector: {" + std::to_string(i) + ", " + std::to_string(j) + "} is not an edge");
  return nodes_[j] - nodes_[i];
}

double SimplicialMesh::element_volume(std::size_t e) const {
  const auto& el = elements_[e];
  Vec3 p[4];
  for (int k = 0; k <= dim_; ++k) p[k] = nodes_[el[k]];
  return simplex_volume(dim_, p);
}

double SimplicialMesh::total_volume() const {
  double v = 0.0;
  for (std::size_t e = 0; e < elements_.size(); ++e) v += element_volume(e);
  return v;
}

SimplicialMesh generate_box_mesh(const Box& box, int dim, double target_h) {
  require(dim == 2 || dim == 3, "generate_box_mesh: dim must be 2 or 3");
  require(target_h > 0.0 && std::isfinite(target_h), "generate_box_mesh: target_h must be > 0");
  std::array<int, 3> cells{1, 1, 1};
  Vec3 spacing = Vec3::Zero();
  for (int a = 0; a < dim; ++a) {
    const double ext = box.hi[a] - box.lo[a];
    require(ext > 0.0, "generate_box_mesh: degenerate box");
    require(target_h <= ext, "generate_box_mesh: target_h exceeds the box extent");
    cells[a] = static_cast<int>(std::ceil(ext / target_h - 1e-9));
    spacing[a] = ext / cells[a];
  }
  const std::array<int, 3> pts{cells[0] + 1, cells[1] + 1, dim == 3 ? cells[2] + 1 : 1};
  auto node_id = [&](int i, int j, int k) { return i + pts[0] * (j + pts[1] * k); };

  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(pts[0]) * pts[1] * pts[2]);
  for (int k = 0; k < pts[2]; ++k)
    for (int j = 0; j < pts[1]; ++j)
      for (int i = 0; i < pts[0]; ++i) {
        Vec3 p = box.lo;
        // Last row snaps to the box face exactly.
        p.x() = i == cells[0] ? box.hi.x() : box.lo.x() + i * spacing.x();
        p.y() = j == cells[1] ? box.hi.y() : box.lo.y() + j * spacing.y();
        p.z() = dim == 2 ? 0.0 : (k == cells[2] ? box.hi.z() : box.lo.z() + k * spacing.z());
        nodes.push_back(p);
      }

  std::vector<std::array<int, 3>> perms;
  if (dim == 2) {
    perms = {{0, 1, 2}, {1, 0, 2}};
  } else {
    perms = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  }

  std::vector<Element> elements;
  const int cz = dim == 3 ? cells[2] : 1;
  for (int k = 0; k < cz; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i) {
        const std::array<int, 3> c{i, j, k};
        for (const auto& perm : perms) {
          Element el{-1, -1, -1, -1};
          std::array<int, 3> local{0, 0, 0};
          for (int v = 0; v <= dim; ++v) {
            if (v > 0) local[perm[v - 1]] = 1;
            std::array<int, 3> g{};
            for (int a = 0; a < 3; ++a) {
              const int bit = (c[a] % 2 == 1) ? 1 - local[a] : local[a];  // mirror odd cells
              g[a] = c[a] + bit;
            }
            el[v] = node_id(g[0], g[1], dim == 3 ? g[2] : 0);
          }
          elements.push_back(el);
        }
      }
  Box domain = box;
  if (dim == 2) domain.lo.z() = domain.hi.z() = 0.0;
  return SimplicialMesh(dim, std::move(nodes), std::move(elements), domain);
}

AuditReport audit(const SimplicialMesh& mesh) {
  AuditReport r;
  auto fail = [&](std::string msg) {
    r.ok = false;
    if (r.problems.size() < 20) r.problems.push_back(std::move(msg));
  };
  const int dim = mesh.dim();
  const int nv = dim + 1;
  const std::size_t ne = mesh.num_elements();

  double mean = 0.0;
  for (std::size_t e = 0; e < ne; ++e) mean += std::abs(mesh.element_volume(e));
  mean = ne ? mean / static_cast<double>(ne) : 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const double v = mesh.element_volume(e);
    total += v;
    if (!(v > 1e-14 * mean)) fail("element " + std::to_string(e) + " has non-positive volume " + std::to_string(v));
  }
  double box_volume = 1.0;
  for (int a = 0; a < dim; ++a) box_volume *= mesh.domain().hi[a] - mesh.domain().lo[a];
  if (ne > 0 && std::abs(total - box_volume) > 1e-9 * box_volume)
    fail("element volumes sum to " + std::to_string(total) + ", domain volume is " + std::to_string(box_volume));

  const auto edges = mesh.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!(edges[k].a < edges[k].b)) fail("edge " + std::to_string(k) + " not normalized");
    if (k > 0 && !(edges[k - 1] < edges[k])) fail("edge list not unique");
  }

  std::vector<std::vector<std::int32_t>> expect(mesh.num_nodes());
  std::vector<std::array<std::int32_t, 4>> sorted_elems;
  std::map<std::array<std::int32_t, 3>, int> facets;
  for (const auto& el : mesh.elements()) {
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b)
        if (a != b) expect[el[a]].push_back(el[b]);
    std::array<std::int32_t, 4> s = el;
    std::sort(s.begin(), s.begin() + nv);
    sorted_elems.push_back(s);
    for (int skip = 0; skip < nv; ++skip) {
      std::array<std::int32_t, 3> f{-1, -1, -1};
      int q = 0;
      for (int k = 0; k < nv; ++k)
        if (k != skip) f[q++] = s[k];
      ++facets[f];
    }
  }
  std::sort(sorted_elems.begin(), sorted_elems.end());
  if (std::adjacent_find(sorted_elems.begin(), sorted_elems.end()) != sorted_elems.end())
    fail("duplicate elements");
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    auto& ex = expect[i];
    std::sort(ex.begin(), ex.end());
    ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
    const auto s = mesh.star(i);
    if (ex.empty()) fail("orphan node " + std::to_string(i));
    if (!std::equal(ex.begin(), ex.end(), s.begin(), s.end()))
      fail("star of node " + std::to_string(i) + " disagrees with element adjacency");
    const auto se = mesh.star_edges(i);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto& e = edges[se[k]];
      const auto other = e.a == static_cast<std::int32_t>(i) ? e.b : e.a;
      if ((e.a != static_cast<std::int32_t>(i) && e.b != static_cast<std::int32_t>(i)) || other != s[k])
        fail("star edge ids of node " + std::to_string(i) + " inconsistent");
    }
  }
  for (const auto& [f, count] : facets) {
    if (count > 2) fail("facet shared by " + std::to_string(count) + " elements");
    if (count == 1) {
      FaceMask common = 0xff;
      for (int k = 0; k < dim; ++k) common &= mesh.boundary_mask(static_cast<std::size_t>(f[k]));
      if (common == 0) fail("exterior facet off the domain boundary");
    }
  }
  return r;
}

std::array<double, 4> barycentric(const SimplicialMesh& mesh, std::size_t e, const Vec3& x) {
  const int dim = mesh.dim();
  const auto& el = mesh.element(e);
  const Vec3& p0 = mesh.node(el[0]);
  Mat3 t = Mat3::Identity();
  for (int k = 1; k <= dim; ++k) t.col(k - 1) = mesh.node(el[k]) - p0;
  Vec3 rhs = x - p0;
  Vec3 lam = Vec3::Zero();
  if (dim == 2) {
    lam.head<2>() = t.topLeftCorner<2, 2>().inverse() * rhs.head<2>();
  } else {
    lam = t.inverse() * rhs;
  }
  std::array<double, 4> b{0, 0, 0, 0};
  double sum = 0.0;
  for (int k = 1; k <= dim; ++k) {
    b[k] = lam[k - 1];
    sum += b[k];
  }
  b[0] = 1.0 - sum;
  return b;
}

ElementLocator::ElementLocator(const SimplicialMesh& mesh) : mesh_(&mesh) {
  const int dim = mesh.dim();
  for (const auto& p : mesh.nodes()) box_.extend(p);
  const std::size_t ne = std::max<std::size_t>(mesh.num_elements(), 1);
  const double per_axis = std::pow(static_cast<double>(ne), 1.0 / dim);
  for (int a = 0; a < dim; ++a) {
    cells_[a] = std::clamp(static_cast<int>(per_axis), 1, 1024);
    cell_size_[a] = std::max(box_.hi[a] - box_.lo[a], 1e-300) / cells_[a];
  }
  auto cell_of = [&](double v, int a) {
    return std::clamp(static_cast<int>(std::floor((v - box_.lo[a]) / cell_size_[a])), 0, cells_[a] - 1);
  };
  const std::size_t total = static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2];
  std::vector<std::vector<std::int32_t>> buckets(total);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    Box eb;
    for (int k = 0; k <= dim; ++k) eb.extend(mesh.node(mesh.element(e)[k]));
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      lo[a] = cell_of(eb.lo[a], a);
      hi[a] = cell_of(eb.hi[a], a);
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i)
          buckets[static_cast<std::size_t>(i) + cells_[0] * (static_cast<std::size_t>(j) + cells_[1] * k)]
              .push_back(static_cast<std::int32_t>(e));
  }
  offsets_.assign(total + 1, 0);
  for (std::size_t c = 0; c < total; ++c) offsets_[c + 1] = offsets_[c] + static_cast<std::int32_t>(buckets[c].size());
  items_.reserve(offsets_.back());
  for (auto& b : buckets) items_.insert(items_.end(), b.begin(), b.end());
}

std::optional<ElementLocator::Hit> ElementLocator::locate(const Vec3& x) const {
  const int dim = mesh_->dim();
  const double tol = 1e-12;
  if (!box_.contains(x, tol * box_.diagonal(dim))) return std::nullopt;
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < dim; ++a)
    c[a] = std::clamp(static_cast<int>(std::floor((x[a] - box_.lo[a]) / cell_size_[a])), 0, cells_[a] - 1);
  const std::size_t cell = static_cast<std::size_t>(c[0]) + cells_[0] * (static_cast<std::size_t>(c[1]) + cells_[1] * c[2]);
  std::optional<Hit> best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (auto k = offsets_[cell]; k < offsets_[cell + 1]; ++k) {
    const auto e = items_[k];
    const auto b = barycentric(*mesh_, static_cast<std::size_t>(e), x);
    double mn = b[0];
    for (int q = 1; q <= dim; ++q) mn = std::min(mn, b[q]);
    if (mn >= 0.0) return Hit{e, b};
    if (mn >= -tol && mn > best_min) {
      best_min = mn;
      best = Hit{e, b};
    }
  }
  return best;
}

double ElementLocator::interpolate(std::span<const double> values, const Vec3& x) const {
  const auto hit = locate(x);
  if (!hit) throw PreconditionError("interpolate: point lies outside the mesh");
  const auto& el = mesh_->element(static_cast<std::size_t>(hit->element));
  double v = 0.0;
  for (int k = 0; k <= mesh_->dim(); ++k) v += hit->bary[k] * values[static_cast<std::size_t>(el[k])];
  return v;
}

double interpolate(const SimplicialMesh& mesh, std::span<const double> values, const Vec3& x) {
  require(values.size() == mesh.num_nodes(), "interpolate: field size does not match node count");
  return ElementLocator(mesh).interpolate(values, x);
}

}  // namespace eimesh
