#include "eimesh/isosurface.hpp"

#include "eimesh/mesh_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace eimesh {
namespace {

std::vector<double> nudged(const SimplicialMesh& mesh, std::span<const double> values) {
  require(values.size() == mesh.num_nodes(), "isosurface: field size does not match node count");
  double scale = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw PreconditionError("isosurface: non-finite nodal value");
    scale = std::max(scale, std::abs(v));
  }
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out)
    if (v == 0.0) v = 1e-12 * scale;
  return out;
}

Edge key(std::int32_t a, std::int32_t b) { return {std::min(a, b), std::max(a, b)}; }

// Linear root on edge k, always computed from the lower index so both
// adjacent elements get the same point.
Vec3 crossing(const SimplicialMesh& mesh, const std::vector<double>& v, const Edge& k) {
  const double va = v[static_cast<std::size_t>(k.a)];
  const double vb = v[static_cast<std::size_t>(k.b)];
  const double t = va / (va - vb);
  const Vec3& pa = mesh.node(static_cast<std::size_t>(k.a));
  const Vec3& pb = mesh.node(static_cast<std::size_t>(k.b));
  return pa + t * (pb - pa);
}

double cross2(const Vec3& a, const Vec3& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

double Polyline::length() const {
  double l = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
  if (closed && points.size() > 1) l += (points.front() - points.back()).norm();
  return l;
}

double Polyline::signed_area() const {
  if (!closed) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) a += cross2(points[i], points[(i + 1) % points.size()]);
  return 0.5 * a;
}

double total_length(std::span<const Polyline> contour) {
  double l = 0.0;
  for (const auto& p : contour) l += p.length();
  return l;
}

double enclosed_area(std::span<const Polyline> contour) {
  double a = 0.0;
  for (const auto& p : contour) a += p.signed_area();
  return a;
}

std::vector<Polyline> extract_contour_2d(const SimplicialMesh& mesh, std::span<const double> values) {
  require(mesh.dim() == 2, "extract_contour_2d: mesh must be 2D");
  const auto v = nudged(mesh, values);

  struct Segment {
    Edge from, to;
  };
  std::vector<Segment> segs;
  for (const auto& el : mesh.elements()) {
    std::array<Edge, 2> cut{};
    int n = 0;
    Vec3 neg = Vec3::Zero();
    int nneg = 0;
    for (int k = 0; k < 3; ++k) {
      const auto a = el[k], b = el[(k + 1) % 3];
      if ((v[a] < 0.0) != (v[b] < 0.0)) cut[n++] = key(a, b);
      if (v[a] < 0.0) {
        neg += mesh.node(a);
        ++nneg;
      }
    }
    if (n == 0) continue;
    if (n != 2) throw InternalError("extract_contour_2d: triangle with an odd number of crossings");
    neg /= nneg;
    const Vec3 p = crossing(mesh, v, cut[0]);
    const Vec3 q = crossing(mesh, v, cut[1]);
    if (cross2(q - p, neg - p) > 0.0) {
      segs.push_back({cut[0], cut[1]});
    } else {
      segs.push_back({cut[1], cut[0]});
    }
  }

  std::map<Edge, std::size_t> starting;
  std::set<Edge> ends;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (!starting.emplace(segs[s].from, s).second)
      throw InternalError("extract_contour_2d: crossing starts two segments");
    ends.insert(segs[s].to);
  }

  std::vector<Polyline> out;
  std::vector<char> used(segs.size(), 0);
  auto trace = [&](std::size_t s0) {
    Polyline pl;
    pl.points.push_back(crossing(mesh, v, segs[s0].from));
    std::size_t s = s0;
    while (true) {
      used[s] = 1;
      const Edge to = segs[s].to;
      const auto it = starting.find(to);
      if (it == starting.end()) {
        pl.points.push_back(crossing(mesh, v, to));
        break;
      }
      if (it->second == s0) {
        pl.closed = true;
        break;
      }
      pl.points.push_back(crossing(mesh, v, to));
      s = it->second;
      if (used[s]) throw InternalError("extract_contour_2d: inconsistent segment chain");
    }
    out.push_back(std::move(pl));
  };
  // Open chains first (they start on the mesh boundary), then loops.
  for (std::size_t s = 0; s < segs.size(); ++s)
    if (!used[s] && !ends.count(segs[s].from)) trace(s);
  for (std::size_t s = 0; s < segs.size(); ++s)
    if (!used[s]) trace(s);
  return out;
}

TriangleSurface extract_surface_3d(const SimplicialMesh& mesh, std::span<const double> values) {
  require(mesh.dim() == 3, "extract_surface_3d: mesh must be 3D");
  const auto v = nudged(mesh, values);
  TriangleSurface s;
  std::map<Edge, std::int32_t> welded;
  auto vertex = [&](std::int32_t a, std::int32_t b) {
    const Edge k = key(a, b);
    const auto [it, inserted] = welded.emplace(k, static_cast<std::int32_t>(s.vertices.size()));
    if (inserted) s.vertices.push_back(crossing(mesh, v, k));
    return it->second;
  };
  auto emit = [&](std::int32_t i, std::int32_t j, std::int32_t k, const Vec3& toward_pos) {
    const Vec3 n = (s.vertices[j] - s.vertices[i]).cross(s.vertices[k] - s.vertices[i]);
    if (n.dot(toward_pos) < 0.0) std::swap(j, k);
    s.triangles.push_back({i, j, k});
  };

  for (const auto& el : mesh.elements()) {
    std::array<std::int32_t, 4> neg{}, pos{};
    int nn = 0, np = 0;
    for (int k = 0; k < 4; ++k) {
      if (v[el[k]] < 0.0) {
        neg[nn++] = el[k];
      } else {
        pos[np++] = el[k];
      }
    }
    if (nn == 0 || np == 0) continue;
    Vec3 cn = Vec3::Zero(), cp = Vec3::Zero();
    for (int k = 0; k < nn; ++k) cn += mesh.node(neg[k]);
    for (int k = 0; k < np; ++k) cp += mesh.node(pos[k]);
    const Vec3 dir = cp / np - cn / nn;
    if (nn == 1 || np == 1) {
      const std::int32_t lone = nn == 1 ? neg[0] : pos[0];
      const auto& others = nn == 1 ? pos : neg;
      emit(vertex(lone, others[0]), vertex(lone, others[1]), vertex(lone, others[2]), dir);
    } else {
      // Quad cut: crossings on (n0,p0), (n0,p1), (n1,p1), (n1,p0) in cyclic order.
      const auto q0 = vertex(neg[0], pos[0]);
      const auto q1 = vertex(neg[0], pos[1]);
      const auto q2 = vertex(neg[1], pos[1]);
      const auto q3 = vertex(neg[1], pos[0]);
      emit(q0, q1, q2, dir);
      emit(q0, q2, q3, dir);
    }
  }
  return s;
}

double TriangleSurface::area() const {
  double a = 0.0;
  for (const auto& t : triangles) a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  return a;
}

double TriangleSurface::enclosed_volume() const {
  double vol = 0.0;
  for (const auto& t : triangles) vol += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0;
  return vol;
}

namespace {
std::map<Edge, int> edge_counts(const TriangleSurface& s) {
  std::map<Edge, int> counts;
  for (const auto& t : s.triangles)
    for (int k = 0; k < 3; ++k) ++counts[key(t[k], t[(k + 1) % 3])];
  return counts;
}
}  // namespace

std::size_t TriangleSurface::num_edges() const { return edge_counts(*this).size(); }

long TriangleSurface::euler_characteristic() const {
  return static_cast<long>(vertices.size()) - static_cast<long>(num_edges()) + static_cast<long>(triangles.size());
}

bool TriangleSurface::closed() const {
  if (triangles.empty()) return false;
  for (const auto& [e, c] : edge_counts(*this))
    if (c != 2) return false;
  return true;
}

void save_contour_csv(std::span<const Polyline> contour, const std::filesystem::path& path) {
  std::string s = "polyline,closed,x,y\n";
  for (std::size_t i = 0; i < contour.size(); ++i)
    for (const auto& p : contour[i].points)
      s += std::to_string(i) + "," + (contour[i].closed ? "1" : "0") + "," + format_double(p.x()) + "," +
           format_double(p.y()) + "\n";
  write_text_file(path, s);
}

void save_contour_vtk(std::span<const Polyline> contour, const std::filesystem::path& path) {
  std::size_t npts = 0, nidx = 0;
  for (const auto& pl : contour) {
    npts += pl.points.size();
    nidx += pl.points.size() + (pl.closed ? 2 : 1);
  }
  std::string s = "# vtk DataFile Version 3.0\neimesh contour\nASCII\nDATASET POLYDATA\n";
  s += "POINTS " + std::to_string(npts) + " double\n";
  for (const auto& pl : contour)
    for (const auto& p : pl.points) s += format_double(p.x()) + " " + format_double(p.y()) + " 0\n";
  s += "LINES " + std::to_string(contour.size()) + " " + std::to_string(nidx) + "\n";
  std::size_t base = 0;
  for (const auto& pl : contour) {
    const std::size_t n = pl.points.size();
    s += std::to_string(n + (pl.closed ? 1 : 0));
    for (std::size_t k = 0; k < n; ++k) s += " " + std::to_string(base + k);
    if (pl.closed) s += " " + std::to_string(base);
    s += "\n";
    base += n;
  }
  write_text_file(path, s);
}

void save_surface_ply(const TriangleSurface& surface, const std::filesystem::path& path) {
  std::string s = "ply\nformat ascii 1.0\n";
  s += "element vertex " + std::to_string(surface.vertices.size()) + "\n";
  s += "property double x\nproperty double y\nproperty double z\n";
  s += "element face " + std::to_string(surface.triangles.size()) + "\n";
  s += "property list uchar int vertex_indices\nend_header\n";
  for (const auto& p : surface.vertices)
    s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  for (const auto& t : surface.triangles)
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  write_text_file(path, s);
}

void save_surface_vtk(const TriangleSurface& surface, const std::filesystem::path& path) {
  std::string s = "# vtk DataFile Version 3.0\neimesh surface\nASCII\nDATASET POLYDATA\n";
  s += "POINTS " + std::to_string(surface.vertices.size()) + " double\n";
  for (const auto& p : surface.vertices)
    s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  s += "POLYGONS " + std::to_string(surface.triangles.size()) + " " + std::to_string(4 * surface.triangles.size()) + "\n";
  for (const auto& t : surface.triangles)
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  write_text_file(path, s);
}

}  // namespace eimesh
