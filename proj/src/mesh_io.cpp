#include "eimesh/mesh_io.hpp"

#include "eimesh/linalg.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eimesh {
namespace {

using nlohmann::json;

// Metric component names in storage order.
std::vector<std::pair<int, int>> metric_components(int dim) {
  if (dim == 2) return {{0, 0}, {0, 1}, {1, 1}};
  return {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
}

std::string component_name(std::pair<int, int> rc) {
  static const char* axis = "xyz";
  return std::string{axis[rc.first], axis[rc.second]};
}

void check_mesh_fields(const MeshBundle& b) {
  for (const auto& f : b.fields) {
    if (f.values.size() != b.mesh.num_nodes())
      throw InvalidArgument("mesh field '" + f.name + "' has the wrong length");
    for (double v : f.values)
      if (!std::isfinite(v)) throw PreconditionError("mesh field '" + f.name + "' has a non-finite value");
  }
  if (b.metric && b.metric->size() != b.mesh.num_nodes())
    throw InvalidArgument("metric field has the wrong length");
}

std::string vtk_name(std::string name) {
  for (auto& c : name)
    if (c == ' ' || c == '\t') c = '_';
  return name.empty() ? std::string("field") : name;
}

// Whitespace tokenizer over the whole file.
class Tokens {
 public:
  explicit Tokens(const std::string& text) : in_(text) {}

  bool next(std::string& tok) { return static_cast<bool>(in_ >> tok); }

  std::string word(const char* what) {
    std::string t;
    if (!next(t)) throw IoError(std::string("vtk: unexpected end of file reading ") + what);
    return t;
  }

  double number(const char* what) {
    const std::string t = word(what);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') throw IoError(std::string("vtk: bad number '") + t + "' in " + what);
    return v;
  }

  long integer(const char* what) {
    const std::string t = word(what);
    long v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
      throw IoError(std::string("vtk: bad integer '") + t + "' in " + what);
    return v;
  }


 private:
  std::istringstream in_;
};

}  // namespace

const NodalField* MeshBundle::field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return &f;
  return nullptr;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

MeshFormat detect_mesh_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".vtk") return MeshFormat::vtk_ascii;
  if (ext == ".json") return MeshFormat::native_json;
  throw InvalidArgument("unknown mesh extension '" + ext + "' (.vtk or .json)");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string to_native_json(const MeshBundle& b) {
  check_mesh_fields(b);
  const auto& m = b.mesh;
  const int dim = m.dim();
  json j;
  j["format"] = "eimesh-mesh";
  j["version"] = 1;
  j["dim"] = dim;
  json lo = json::array(), hi = json::array();
  for (int a = 0; a < dim; ++a) {
    lo.push_back(m.domain().lo[a]);
    hi.push_back(m.domain().hi[a]);
  }
  j["domain"] = {{"lo", lo}, {"hi", hi}};
  json nodes = json::array();
  for (const auto& p : m.nodes()) {
    json row = json::array();
    for (int a = 0; a < dim; ++a) row.push_back(p[a]);
    nodes.push_back(std::move(row));
  }
  j["nodes"] = std::move(nodes);
  json elements = json::array();
  for (const auto& el : m.elements()) {
    json row = json::array();
    for (int k = 0; k <= dim; ++k) row.push_back(el[k]);
    elements.push_back(std::move(row));
  }
  j["elements"] = std::move(elements);
  json fields = json::array();
  for (const auto& f : b.fields) fields.push_back({{"name", f.name}, {"values", f.values}});
  j["fields"] = std::move(fields);
  if (b.metric) {
    json metric = json::object();
    for (const auto& rc : metric_components(dim)) {
      std::vector<double> v(b.metric->size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = (*b.metric)[i](rc.first, rc.second);
      metric[component_name(rc)] = std::move(v);
    }
    j["metric"] = std::move(metric);
  }
  return j.dump() + "\n";
}

MeshBundle from_native_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("mesh json: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "eimesh-mesh") throw IoError("mesh json: not an eimesh-mesh document");
    if (j.at("version").get<int>() != 1) throw IoError("mesh json: unsupported version");
    const int dim = j.at("dim").get<int>();
    if (dim != 2 && dim != 3) throw IoError("mesh json: dim must be 2 or 3");
    Box domain(Vec3::Zero(), Vec3::Zero());
    const auto lo = j.at("domain").at("lo").get<std::vector<double>>();
    const auto hi = j.at("domain").at("hi").get<std::vector<double>>();
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
      throw IoError("mesh json: domain size does not match dim");
    for (int a = 0; a < dim; ++a) {
      domain.lo[a] = lo[a];
      domain.hi[a] = hi[a];
    }
    std::vector<Vec3> nodes;
    for (const auto& row : j.at("nodes")) {
      const auto v = row.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != dim) throw IoError("mesh json: node with wrong coordinate count");
      Vec3 p = Vec3::Zero();
      for (int a = 0; a < dim; ++a) p[a] = v[a];
      nodes.push_back(p);
    }
    std::vector<Element> elements;
    for (const auto& row : j.at("elements")) {
      const auto v = row.get<std::vector<std::int32_t>>();
      if (static_cast<int>(v.size()) != dim + 1) throw IoError("mesh json: element with wrong node count");
      Element el{-1, -1, -1, -1};
      for (int k = 0; k <= dim; ++k) el[k] = v[k];
      elements.push_back(el);
    }
    MeshBundle b{SimplicialMesh(dim, std::move(nodes), std::move(elements), domain), {}, std::nullopt};
    if (j.contains("fields")) {
      for (const auto& f : j.at("fields"))
        b.fields.push_back({f.at("name").get<std::string>(), f.at("values").get<std::vector<double>>()});
    }
    if (j.contains("metric")) {
      MetricField metric;
      metric.dim = dim;
      metric.tensors.assign(b.mesh.num_nodes(), Mat3::Zero());
      for (const auto& rc : metric_components(dim)) {
        const auto v = j.at("metric").at(component_name(rc)).get<std::vector<double>>();
        if (v.size() != metric.size()) throw IoError("mesh json: metric component with wrong length");
        for (std::size_t i = 0; i < v.size(); ++i) {
          metric.tensors[i](rc.first, rc.second) = v[i];
          metric.tensors[i](rc.second, rc.first) = v[i];
        }
      }
      b.metric = std::move(metric);
    }
    check_mesh_fields(b);
    return b;
  } catch (const json::exception& e) {
    throw IoError(std::string("mesh json: ") + e.what());
  } catch (const PreconditionError& e) {
    throw IoError(std::string("mesh json: ") + e.what());
  }
}

std::string to_vtk(const MeshBundle& b) {
  check_mesh_fields(b);
  const auto& m = b.mesh;
  const int dim = m.dim();
  std::string s;
  s += "# vtk DataFile Version 3.0\neimesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  s += "POINTS " + std::to_string(m.num_nodes()) + " double\n";
  for (const auto& p : m.nodes())
    s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(dim == 2 ? 0.0 : p.z()) + "\n";
  const std::size_t ne = m.num_elements();
  s += "CELLS " + std::to_string(ne) + " " + std::to_string(ne * (dim + 2)) + "\n";
  for (const auto& el : m.elements()) {
    s += std::to_string(dim + 1);
    for (int k = 0; k <= dim; ++k) s += " " + std::to_string(el[k]);
    s += "\n";
  }
  s += "CELL_TYPES " + std::to_string(ne) + "\n";
  const std::string type = dim == 2 ? "5\n" : "10\n";
  for (std::size_t e = 0; e < ne; ++e) s += type;
  if (!b.fields.empty() || b.metric) {
    s += "POINT_DATA " + std::to_string(m.num_nodes()) + "\n";
    for (const auto& f : b.fields) {
      s += "SCALARS " + vtk_name(f.name) + " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) s += format_double(v) + "\n";
    }
    if (b.metric) {
      s += "TENSORS metric double\n";
      for (const auto& t : b.metric->tensors)
        for (int r = 0; r < 3; ++r)
          s += format_double(t(r, 0)) + " " + format_double(t(r, 1)) + " " + format_double(t(r, 2)) + "\n";
    }
  }
  return s;
}

MeshBundle from_vtk(const std::string& text) {
  Tokens tk(text);
  std::string line1;
  {
    std::istringstream in(text);
    std::getline(in, line1);
    if (line1.rfind("# vtk DataFile", 0) != 0) throw IoError("vtk: missing header");
  }
  std::string tok;
  std::vector<Vec3> nodes;
  std::vector<std::vector<std::int32_t>> cells;
  std::vector<long> types;
  std::vector<NodalField> fields;
  std::optional<std::vector<Mat3>> tensors;
  bool ascii = false, grid = false;
  std::size_t npoint_data = 0;
  while (tk.next(tok)) {
    if (tok == "ASCII") {
      ascii = true;
    } else if (tok == "BINARY") {
      throw IoError("vtk: binary files are not supported");
    } else if (tok == "DATASET") {
      if (tk.word("DATASET") != "UNSTRUCTURED_GRID") throw IoError("vtk: expected UNSTRUCTURED_GRID");
      grid = true;
    } else if (tok == "POINTS") {
      const long n = tk.integer("POINTS");
      tk.word("POINTS type");
      nodes.resize(static_cast<std::size_t>(n));
      for (auto& p : nodes)
        for (int a = 0; a < 3; ++a) p[a] = tk.number("POINTS");
    } else if (tok == "CELLS") {
      const long n = tk.integer("CELLS");
      tk.integer("CELLS size");
      cells.resize(static_cast<std::size_t>(n));
      for (auto& c : cells) {
        const long k = tk.integer("CELLS");
        if (k < 1 || k > 4) throw IoError("vtk: unsupported cell size");
        c.resize(static_cast<std::size_t>(k));
        for (auto& v : c) v = static_cast<std::int32_t>(tk.integer("CELLS"));
      }
    } else if (tok == "CELL_TYPES") {
      const long n = tk.integer("CELL_TYPES");
      types.resize(static_cast<std::size_t>(n));
      for (auto& t : types) t = tk.integer("CELL_TYPES");
    } else if (tok == "POINT_DATA") {
      npoint_data = static_cast<std::size_t>(tk.integer("POINT_DATA"));
    } else if (tok == "SCALARS") {
      NodalField f;
      f.name = tk.word("SCALARS name");
      tk.word("SCALARS type");
      std::string next = tk.word("SCALARS");
      if (next != "LOOKUP_TABLE") {
        if (next != "1") throw IoError("vtk: only single-component scalars are supported");
        next = tk.word("SCALARS");
      }
      if (next != "LOOKUP_TABLE") throw IoError("vtk: expected LOOKUP_TABLE");
      tk.word("LOOKUP_TABLE name");
      f.values.resize(npoint_data);
      for (auto& v : f.values) v = tk.number("SCALARS");
      fields.push_back(std::move(f));
    } else if (tok == "TENSORS") {
      tk.word("TENSORS name");
      tk.word("TENSORS type");
      std::vector<Mat3> t(npoint_data);
      for (auto& m : t)
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) m(r, c) = tk.number("TENSORS");
      tensors = std::move(t);
    } else if (tok == "CELL_DATA" || tok == "FIELD" || tok == "VECTORS" || tok == "NORMALS") {
      throw IoError("vtk: unsupported section " + tok);
    }
  }
  if (!ascii || !grid) throw IoError("vtk: expected an ASCII UNSTRUCTURED_GRID");
  if (types.size() != cells.size()) throw IoError("vtk: CELL_TYPES count does not match CELLS");
  int dim = 0;
  std::vector<Element> elements;
  for (std::size_t e = 0; e < cells.size(); ++e) {
    const int d = types[e] == 5 ? 2 : types[e] == 10 ? 3 : 0;
    if (d == 0 || static_cast<int>(cells[e].size()) != d + 1) throw IoError("vtk: only triangles and tetrahedra");
    if (dim != 0 && d != dim) throw IoError("vtk: mixed element types");
    dim = d;
    Element el{-1, -1, -1, -1};
    for (int k = 0; k <= d; ++k) el[k] = cells[e][k];
    elements.push_back(el);
  }
  if (dim == 0) throw IoError("vtk: no cells");
  if (npoint_data != 0 && npoint_data != nodes.size()) throw IoError("vtk: POINT_DATA count does not match POINTS");
  try {
    MeshBundle b{SimplicialMesh(dim, std::move(nodes), std::move(elements)), std::move(fields), std::nullopt};
    if (tensors) {
      MetricField metric;
      metric.dim = dim;
      metric.tensors = std::move(*tensors);
      for (auto& t : metric.tensors) t = linalg::leading_block(t, dim);
      b.metric = std::move(metric);
    }
    check_mesh_fields(b);
    return b;
  } catch (const PreconditionError& e) {
    throw IoError(std::string("vtk: ") + e.what());
  }
}

void save_mesh(const MeshBundle& bundle, const std::filesystem::path& path, MeshFormat format) {
  write_text_file(path, format == MeshFormat::native_json ? to_native_json(bundle) : to_vtk(bundle));
}

void save_mesh(const MeshBundle& bundle, const std::filesystem::path& path) {
  save_mesh(bundle, path, detect_mesh_format(path));
}

MeshBundle load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const auto text = read_text_file(path);
  return format == MeshFormat::native_json ? from_native_json(text) : from_vtk(text);
}

MeshBundle load_mesh(const std::filesystem::path& path) { return load_mesh(path, detect_mesh_format(path)); }

void save_grid_vtk(const ScalarGrid& grid, const std::filesystem::path& path, const std::string& name) {
  std::string s;
  s += "# vtk DataFile Version 3.0\neimesh grid\nASCII\nDATASET STRUCTURED_POINTS\n";
  const auto [nx, ny, nz] = grid.resolution;
  s += "DIMENSIONS " + std::to_string(nx) + " " + std::to_string(ny) + " " + std::to_string(nz) + "\n";
  s += "ORIGIN " + format_double(grid.origin.x()) + " " + format_double(grid.origin.y()) + " " +
       format_double(grid.origin.z()) + "\n";
  const double sz = grid.dim == 2 ? 1.0 : grid.spacing.z();
  s += "SPACING " + format_double(grid.spacing.x()) + " " + format_double(grid.spacing.y()) + " " +
       format_double(sz) + "\n";
  s += "POINT_DATA " + std::to_string(grid.values.size()) + "\n";
  s += "SCALARS " + vtk_name(name) + " double 1\nLOOKUP_TABLE default\n";
  for (double v : grid.values) s += format_double(v) + "\n";
  write_text_file(path, s);
}

}  // namespace eimesh
