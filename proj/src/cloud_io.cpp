#include "eimesh/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace eimesh {
namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f64;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  int dim = 3;
  bool unoriented = false;
  std::optional<Vec3> global_origin;
  std::size_t body_offset = 0;
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& what) {
  throw IoError("cannot parse " + path.string() + ": " + what);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::filesystem::path& path, std::string_view tok) {
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    // from_chars rejects "nan"/"inf" spellings on some libraries; try strtod.
    std::string s(tok);
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) parse_fail(path, "bad number '" + s + "'");
  }
  return v;
}

PlyHeader parse_header(const std::filesystem::path& path, const std::string& data) {
  PlyHeader h;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= data.size()) return std::nullopt;
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto first = next_line();
  if (!first || *first != "ply") parse_fail(path, "missing 'ply' magic");
  bool have_format = false;
  for (;;) {
    auto line = next_line();
    if (!line) parse_fail(path, "header not terminated by end_header");
    auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_fail(path, "bad format line");
      if (tok[1] == "ascii")
        h.binary = false;
      else if (tok[1] == "binary_little_endian")
        h.binary = true;
      else
        parse_fail(path, "unsupported format '" + tok[1] + "'");
      have_format = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() >= 3 && tok[1] == "dim") {
        if (tok[2] == "2")
          h.dim = 2;
        else if (tok[2] == "3")
          h.dim = 3;
        else
          parse_fail(path, "bad dim comment");
      } else if (tok.size() >= 5 && tok[1] == "scan_origin") {
        h.global_origin = Vec3(to_double(path, tok[2]), to_double(path, tok[3]), to_double(path, tok[4]));
      } else if (tok.size() >= 2 && tok[1] == "normals_unoriented") {
        h.unoriented = true;
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, "bad element line");
      PlyElement e;
      e.name = tok[1];
      try {
        e.count = std::stoull(tok[2]);
      } catch (...) {
        parse_fail(path, "bad element count");
      }
      h.elements.push_back(e);
    } else if (tok[0] == "property") {
      if (h.elements.empty()) parse_fail(path, "property before element");
      PlyProperty p;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = parse_type(tok[2]);
        auto vt = parse_type(tok[3]);
        if (!ct || !vt) parse_fail(path, "unknown list property type");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *vt;
        p.name = tok[4];
      } else if (tok.size() == 3) {
        auto t = parse_type(tok[1]);
        if (!t) parse_fail(path, "unknown property type '" + tok[1] + "'");
        p.type = *t;
        p.name = tok[2];
      } else {
        parse_fail(path, "bad property line");
      }
      h.elements.back().props.push_back(p);
    } else {
      parse_fail(path, "unexpected header keyword '" + tok[0] + "'");
    }
  }
  if (!have_format) parse_fail(path, "missing format line");
  h.body_offset = pos;
  return h;
}

double read_binary(const char* p, PlyType t) {
  switch (t) {
    case PlyType::i8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::u8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::i16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::u16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::i32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::u32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    case PlyType::f64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

// Column slots we care about in the vertex element.
enum Slot { kX, kY, kZ, kNX, kNY, kNZ, kOX, kOY, kOZ, kSlots };

int slot_of(const std::string& name) {
  static const char* names[kSlots] = {"x", "y", "z", "nx", "ny", "nz", "ox", "oy", "oz"};
  for (int s = 0; s < kSlots; ++s)
    if (name == names[s]) return s;
  return -1;
}

OrientedPointCloud load_ply(const std::filesystem::path& path, std::optional<bool> expect_binary) {
  const std::string data = read_file(path);
  const PlyHeader h = parse_header(path, data);
  if (expect_binary && *expect_binary != h.binary)
    parse_fail(path, std::string("header declares ") + (h.binary ? "binary" : "ascii") +
                         " but a different PLY variant was requested");

  const PlyElement* vertex = nullptr;
  for (const auto& e : h.elements)
    if (e.name == "vertex") vertex = &e;
  if (!vertex) parse_fail(path, "no vertex element");

  std::vector<int> slots;
  bool present[kSlots] = {};
  for (const auto& p : vertex->props) {
    const int s = p.is_list ? -1 : slot_of(p.name);
    slots.push_back(s);
    if (s >= 0) present[s] = true;
  }
  if (!present[kX] || !present[kY] || !present[kZ]) parse_fail(path, "vertex element lacks x y z");
  const bool has_n = present[kNX] && present[kNY] && present[kNZ];
  const bool has_o = present[kOX] && present[kOY] && present[kOZ];

  OrientedPointCloud cloud;
  cloud.dim = h.dim;
  cloud.points.resize(vertex->count);
  if (has_n) cloud.normals.resize(vertex->count);
  if (has_o)
    cloud.scan_origins.resize(vertex->count);
  else if (h.global_origin)
    cloud.scan_origins.push_back(*h.global_origin);
  cloud.normals_oriented = !h.unoriented;

  double row[kSlots] = {};
  auto store = [&](std::size_t i) {
    cloud.points[i] = Vec3(row[kX], row[kY], row[kZ]);
    if (has_n) cloud.normals[i] = Vec3(row[kNX], row[kNY], row[kNZ]);
    if (has_o) cloud.scan_origins[i] = Vec3(row[kOX], row[kOY], row[kOZ]);
  };

  if (h.binary) {
    std::size_t pos = h.body_offset;
    auto need = [&](std::size_t n) {
      if (pos + n > data.size()) parse_fail(path, "truncated binary body");
    };
    for (const auto& e : h.elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t r = 0; r < e.count; ++r) {
        for (std::size_t c = 0; c < e.props.size(); ++c) {
          const auto& p = e.props[c];
          if (p.is_list) {
            need(type_size(p.count_type));
            const auto n = static_cast<std::size_t>(read_binary(data.data() + pos, p.count_type));
            pos += type_size(p.count_type);
            need(n * type_size(p.type));
            pos += n * type_size(p.type);
            continue;
          }
          need(type_size(p.type));
          if (is_vertex && slots[c] >= 0) row[slots[c]] = read_binary(data.data() + pos, p.type);
          pos += type_size(p.type);
        }
        if (is_vertex) store(r);
      }
      if (is_vertex) break;  // later elements are not needed
    }
  } else {
    std::istringstream body(data.substr(h.body_offset));
    std::string tok;
    auto next = [&]() -> double {
      if (!(body >> tok)) parse_fail(path, "truncated ascii body");
      return to_double(path, tok);
    };
    for (const auto& e : h.elements) {
      const bool is_vertex = &e == vertex;
      for (std::size_t r = 0; r < e.count; ++r) {
        for (std::size_t c = 0; c < e.props.size(); ++c) {
          const auto& p = e.props[c];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(next());
            for (std::size_t q = 0; q < n; ++q) next();
            continue;
          }
          const double v = next();
          if (is_vertex && slots[c] >= 0) row[slots[c]] = v;
        }
        if (is_vertex) store(r);
      }
      if (is_vertex) break;
    }
  }
  return cloud;
}

OrientedPointCloud load_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  OrientedPointCloud cloud;
  std::string line;
  std::size_t columns = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0].front() == '#') {
      std::vector<std::string> rest = tok;
      if (rest[0] == "#") rest.erase(rest.begin());
      else rest[0].erase(0, 1);
      if (rest.size() >= 2 && rest[0] == "dim") {
        if (rest[1] == "2") cloud.dim = 2;
        else if (rest[1] == "3") cloud.dim = 3;
        else parse_fail(path, "bad dim comment");
      }
      continue;
    }
    if (tok.size() != 3 && tok.size() != 6)
      parse_fail(path, "line " + std::to_string(lineno) + ": expected 3 or 6 columns");
    if (columns == 0) columns = tok.size();
    if (tok.size() != columns)
      parse_fail(path, "line " + std::to_string(lineno) + ": inconsistent column count");
    double v[6];
    for (std::size_t c = 0; c < tok.size(); ++c) v[c] = to_double(path, tok[c]);
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (columns == 6) cloud.normals.emplace_back(v[3], v[4], v[5]);
  }
  return cloud;
}

// Checks file data against the cloud invariants. Normals off unit length by
// more than 1e-12 are renormalized so single-precision files meet the
// invariant; unit normals are kept bit for bit.
void finish(OrientedPointCloud& cloud, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.points[i].allFinite())
      parse_fail(path, "non-finite coordinate at point " + std::to_string(i));
    if (cloud.dim == 2 && cloud.points[i].z() != 0.0)
      parse_fail(path, "dimension mismatch: 2D cloud with non-zero z at point " + std::to_string(i));
  }
  for (std::size_t i = 0; i < cloud.normals.size(); ++i) {
    const double len = cloud.normals[i].norm();
    if (!std::isfinite(len) || len == 0.0)
      parse_fail(path, "invalid normal at point " + std::to_string(i));
    if (cloud.dim == 2 && cloud.normals[i].z() != 0.0)
      parse_fail(path, "dimension mismatch: 2D cloud with non-zero normal z at point " + std::to_string(i));
    if (std::abs(len - 1.0) > 1e-12) cloud.normals[i] /= len;
  }
  try {
    cloud.validate();
  } catch (const PreconditionError& e) {
    parse_fail(path, e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

CloudFormat detect_cloud_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".xyz" || ext == ".txt" || ext == ".xyzn") return CloudFormat::xyz;
  if (ext != ".ply") throw IoError("unknown point cloud extension: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  for (int i = 0; i < 64 && std::getline(in, line); ++i) {
    if (line.rfind("format ", 0) == 0)
      return line.find("binary") != std::string::npos ? CloudFormat::ply_binary_le : CloudFormat::ply_ascii;
  }
  throw IoError("cannot parse " + path.string() + ": missing format line");
}

OrientedPointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  OrientedPointCloud cloud;
  switch (format) {
    case CloudFormat::ply_ascii: cloud = load_ply(path, false); break;
    case CloudFormat::ply_binary_le: cloud = load_ply(path, true); break;
    case CloudFormat::xyz: cloud = load_xyz(path); break;
  }
  finish(cloud, path);
  return cloud;
}

OrientedPointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, detect_cloud_format(path));
}

void save_cloud(const OrientedPointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  cloud.validate();
  std::ostringstream out;
  out << std::setprecision(17);
  const bool per_point_origins = cloud.scan_origins.size() > 1;

  if (format == CloudFormat::xyz) {
    if (cloud.dim == 2) out << "# dim 2\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      out << p.x() << ' ' << p.y() << ' ' << p.z();
      if (cloud.has_normals()) {
        const auto& n = cloud.normals[i];
        out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
      }
      out << '\n';
    }
    write_text(path, out.str());
    return;
  }

  const bool binary = format == CloudFormat::ply_binary_le;
  out << "ply\n" << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "comment generated by eimesh\n";
  if (cloud.dim == 2) out << "comment dim 2\n";
  if (cloud.has_normals() && !cloud.normals_oriented) out << "comment normals_unoriented\n";
  if (cloud.scan_origins.size() == 1) {
    const auto& o = cloud.scan_origins.front();
    out << "comment scan_origin " << o.x() << ' ' << o.y() << ' ' << o.z() << '\n';
  }
  out << "element vertex " << cloud.size() << '\n';
  std::vector<std::string> names = {"x", "y", "z"};
  if (cloud.has_normals()) names.insert(names.end(), {"nx", "ny", "nz"});
  if (per_point_origins) names.insert(names.end(), {"ox", "oy", "oz"});
  for (const auto& n : names) out << "property double " << n << '\n';
  out << "end_header\n";

  std::vector<double> row;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    row.assign(cloud.points[i].data(), cloud.points[i].data() + 3);
    if (cloud.has_normals()) row.insert(row.end(), cloud.normals[i].data(), cloud.normals[i].data() + 3);
    if (per_point_origins)
      row.insert(row.end(), cloud.scan_origins[i].data(), cloud.scan_origins[i].data() + 3);
    if (binary) {
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 8));
    } else {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
      out << '\n';
    }
  }
  write_text(path, out.str());
}

}  // namespace eimesh
