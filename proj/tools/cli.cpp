#include "cli.hpp"

#include "eimesh/adaptation.hpp"
#include "eimesh/cloud_io.hpp"
#include "eimesh/eimls.hpp"
#include "eimesh/isosurface.hpp"
#include "eimesh/mesh_io.hpp"
#include "eimesh/parallel.hpp"
#include "eimesh/pointcloud.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace eimesh::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Flag values shared by the subcommands and the pipeline config. Member
// defaults are the CLI defaults.
struct PreprocessParams {
  int outlier_k = 3;
  double outlier_dist = 0.30;
  double grazing_deg = 2.0;
  double leaf = 0.02;
  int normals_k = 100;
};

struct FieldParams {
  double h0 = 0.003;
  double gamma = 7.0;
  int knn = 80;
  double epsilon = 0.005;
  std::vector<double> domain;
  int dim = 0;  // 0: from the file
};

struct GridParams {
  int res = 200;
  bool plain_imls = false;
};

struct AdaptParams {
  double nodes = 0.0;
  int iters = 10;
  double init_h = 0.0;
  bool snapshots = false;
};

struct Output {
  std::ostream& out;
  std::ostream& err;
  bool as_json = false;

  void emit(const json& j) const {
    if (as_json) out << j.dump(2) << '\n';
  }
  void note(const std::string& s) const {
    if (!as_json) out << s << '\n';
  }
};

EimlsConfig eimls_config(const FieldParams& p) {
  EimlsConfig c;
  c.h0 = p.h0;
  c.gamma = p.gamma;
  c.k = p.knn;
  c.epsilon = p.epsilon;
  c.validate();
  return c;
}

// Loads a cloud and applies --dim: 2 drops z (renormalizing normals), 3 keeps
// a genuinely 3D cloud.
OrientedPointCloud load_input(const fs::path& path, int dim) {
  require(dim == 0 || dim == 2 || dim == 3, "--dim must be 2 or 3");
  auto cloud = load_cloud(path);
  if (dim == 3 && cloud.dim == 2) throw InvalidArgument("--dim 3 requested for a planar (dim 2) cloud");
  if (dim == 2 && cloud.dim == 3) {
    cloud.dim = 2;
    for (auto& p : cloud.points) p.z() = 0.0;
    for (std::size_t i = 0; i < cloud.normals.size(); ++i) {
      auto& n = cloud.normals[i];
      n.z() = 0.0;
      const double len = n.norm();
      if (len < 1e-12)
        throw PreconditionError("--dim 2: normal " + std::to_string(i) + " has no component in the xy plane");
      n /= len;
    }
    for (auto& o : cloud.scan_origins) o.z() = 0.0;
  }
  cloud.validate();
  return cloud;
}

// 3x the bounding box. Flat axes borrow the longest extent (1 m when the
// cloud is a single point).
Box default_domain(const OrientedPointCloud& cloud) {
  if (cloud.empty()) throw PreconditionError("cloud is empty");
  Box b = cloud.bounding_box();
  const int d = cloud.dim;
  double longest = b.extent().head(d).maxCoeff();
  if (longest <= 0.0) longest = 1.0;
  for (int a = 0; a < d; ++a) {
    if (b.hi[a] - b.lo[a] <= 0.0) {
      b.lo[a] -= 0.5 * longest;
      b.hi[a] += 0.5 * longest;
    }
  }
  b = b.scaled(3.0);
  if (d == 2) b.lo.z() = b.hi.z() = 0.0;
  return b;
}

Box parse_domain(const std::vector<double>& v, const OrientedPointCloud& cloud) {
  if (v.empty()) return default_domain(cloud);
  const int d = cloud.dim;
  require(static_cast<int>(v.size()) == 2 * d,
          "--domain expects " + std::to_string(2 * d) + " numbers (x0 y0" + (d == 3 ? " z0" : "") + " x1 y1" +
              (d == 3 ? " z1" : "") + ")");
  Box b(Vec3::Zero(), Vec3::Zero());
  for (int a = 0; a < d; ++a) {
    b.lo[a] = v[static_cast<std::size_t>(a)];
    b.hi[a] = v[static_cast<std::size_t>(a + d)];
    require(std::isfinite(b.lo[a]) && std::isfinite(b.hi[a]) && b.lo[a] < b.hi[a],
            "--domain: lower corner must be below the upper corner on every axis");
  }
  return b;
}

json box_json(const Box& b, int dim) {
  return {{"lo", std::vector<double>(b.lo.data(), b.lo.data() + dim)},
          {"hi", std::vector<double>(b.hi.data(), b.hi.data() + dim)}};
}

// ---- preprocess -------------------------------------------------------------

struct PreprocessOutcome {
  OrientedPointCloud cloud;
  json report;
};

PreprocessOutcome preprocess(const OrientedPointCloud& input, const PreprocessParams& p) {
  require(p.outlier_k >= 1, "--outlier-k must be >= 1");
  require(p.outlier_dist > 0.0, "--outlier-dist must be > 0");
  require(p.grazing_deg >= 0.0 && p.grazing_deg <= 90.0, "--grazing-deg must be within [0, 90]");
  require(p.leaf > 0.0, "--leaf must be > 0");
  require(p.normals_k >= input.dim + 1, "--normals-k must be >= dim + 1");
  if (input.size() <= static_cast<std::size_t>(p.outlier_k))
    throw PreconditionError("preprocess: cloud has " + std::to_string(input.size()) + " points, need more than --outlier-k");

  json removed;
  auto filtered = remove_outliers_density(input, p.outlier_k, p.outlier_dist);
  removed["outliers"] = filtered.removed;
  OrientedPointCloud cloud = std::move(filtered.cloud);

  bool grazing_applied = false;
  if (cloud.has_origins() && !cloud.empty()) {
    // Filtering needs normals; the verdict does not depend on their sign.
    OrientedPointCloud probe = cloud.has_normals() ? cloud : estimate_normals(cloud, std::min<int>(p.normals_k, static_cast<int>(cloud.size())));
    auto g = remove_grazing(probe, p.grazing_deg);
    std::vector<std::size_t> keep;
    // remove_grazing preserves order; map survivors back onto the unestimated cloud.
    std::size_t j = 0;
    for (std::size_t i = 0; i < probe.size() && j < g.cloud.size(); ++i)
      if (probe.points[i] == g.cloud.points[j]) {
        keep.push_back(i);
        ++j;
      }
    cloud = cloud.select(keep);
    removed["grazing"] = g.removed;
    grazing_applied = true;
  } else {
    removed["grazing"] = 0;
  }

  const std::size_t before = cloud.size();
  cloud = subsample_octree(cloud, p.leaf);
  removed["subsample"] = before - cloud.size();

  std::string normals = "input";
  if (!cloud.has_normals()) {
    if (cloud.size() < static_cast<std::size_t>(p.normals_k))
      throw PreconditionError("preprocess: " + std::to_string(cloud.size()) + " points left, fewer than --normals-k");
    cloud = estimate_normals(cloud, p.normals_k);
    normals = cloud.normals_oriented ? "estimated" : "estimated_unoriented";
  }

  json report = {{"input", input.size()},
                 {"output", cloud.size()},
                 {"removed", removed},
                 {"grazing_applied", grazing_applied},
                 {"normals", normals},
                 {"parameters",
                  {{"outlier-k", p.outlier_k},
                   {"outlier-dist", p.outlier_dist},
                   {"grazing-deg", p.grazing_deg},
                   {"leaf", p.leaf},
                   {"normals-k", p.normals_k}}}};
  return {std::move(cloud), std::move(report)};
}

CloudFormat output_cloud_format(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::xyz;
  if (ext == ".ply") return CloudFormat::ply_binary_le;
  throw InvalidArgument("output cloud must end in .ply, .xyz or .txt: " + path.string());
}

// ---- field ------------------------------------------------------------------

json write_field(const OrientedPointCloud& cloud, const FieldParams& fp, const GridParams& gp, const fs::path& out) {
  if (!cloud.has_normals()) throw PreconditionError("field: cloud has no normals (run preprocess first)");
  require(gp.res >= 1, "--res must be >= 1");
  const auto config = eimls_config(fp);
  const Box domain = parse_domain(fp.domain, cloud);
  const EimlsField field(cloud, config);
  std::array<int, 3> res{gp.res, gp.res, cloud.dim == 3 ? gp.res : 1};
  const auto grid = gp.plain_imls ? sample_on_grid(field, domain, res, GridMode::plain_imls, config.h0)
                                  : sample_on_grid(field, domain, res, GridMode::truncated, 0.0);
  save_grid_vtk(grid, out, gp.plain_imls ? "imls" : "alpha_eps");
  std::size_t nan = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : grid.values) {
    if (std::isnan(v)) {
      ++nan;
      continue;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {{"samples", grid.values.size()},
          {"undefined", nan},
          {"min", std::isfinite(lo) ? json(lo) : json(nullptr)},
          {"max", std::isfinite(hi) ? json(hi) : json(nullptr)},
          {"mode", gp.plain_imls ? "plain_imls" : "eimls_truncated"},
          {"domain", box_json(domain, cloud.dim)},
          {"output", out.string()}};
}

// ---- adapt ------------------------------------------------------------------

json stats_json(const IterationStats& s) {
  return {{"iteration", s.iteration},
          {"nodes", s.nodes},
          {"elements", s.elements},
          {"min_length", s.min_length},
          {"median_length", s.median_length},
          {"max_length", s.max_length},
          {"in_range", s.in_range},
          {"level_set_measure", s.level_set_measure},
          {"enclosed", s.enclosed},
          {"error", s.error},
          {"sweeps", s.sweeps}};
}

json run_adapt(const OrientedPointCloud& cloud, const FieldParams& fp, const AdaptParams& ap, const fs::path& outdir,
               const Output& io) {
  if (!cloud.has_normals()) throw PreconditionError("adapt: cloud has no normals (run preprocess first)");
  require(ap.nodes > 0.0, "--nodes is required and must be > 0");
  LoopOptions opt;
  opt.eimls = eimls_config(fp);
  opt.domain = parse_domain(fp.domain, cloud);
  opt.budget = ap.nodes;
  opt.iterations = ap.iters;
  opt.init_h = ap.init_h;
  opt.validate(cloud.dim);

  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string() + ": " + ec.message());
  const fs::path snapdir = outdir / "snapshots";
  if (ap.snapshots) {
    fs::create_directories(snapdir, ec);
    if (ec) throw IoError("cannot create " + snapdir.string() + ": " + ec.message());
  }

  const EimlsField field(cloud, opt.eimls);
  std::vector<std::string> outputs;
  auto result = adaptation_loop(field, opt, [&](const IterationState& s) {
    const auto& st = s.stats;
    io.err << "iteration " << st.iteration << ": nodes " << st.nodes << ", in-range " << std::fixed
           << std::setprecision(3) << st.in_range << ", median length " << st.median_length << std::defaultfloat
           << '\n';
    if (ap.snapshots) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%04d.vtk", s.iteration);
      save_mesh(MeshBundle{s.mesh, {NodalField{"alpha", s.alpha}}, s.metric}, snapdir / name, MeshFormat::vtk_ascii);
      outputs.push_back((snapdir / name).string());
    }
  });

  const MeshBundle bundle{result.mesh, {NodalField{"alpha", result.alpha}}, result.metric};
  save_mesh(bundle, outdir / "mesh.vtk", MeshFormat::vtk_ascii);
  save_mesh(bundle, outdir / "mesh.json", MeshFormat::native_json);
  write_text_file(outdir / "stats.csv", stats_csv(result.stats));
  outputs.insert(outputs.end(), {(outdir / "mesh.vtk").string(), (outdir / "mesh.json").string(),
                                 (outdir / "stats.csv").string()});

  json level_set;
  if (cloud.dim == 2) {
    const auto contour = extract_contour_2d(result.mesh, result.alpha);
    save_contour_csv(contour, outdir / "contour.csv");
    save_contour_vtk(contour, outdir / "contour.vtk");
    outputs.insert(outputs.end(), {(outdir / "contour.csv").string(), (outdir / "contour.vtk").string()});
    std::size_t closed = 0;
    for (const auto& pl : contour) closed += pl.closed ? 1 : 0;
    level_set = {{"polylines", contour.size()},
                 {"closed", closed},
                 {"length", total_length(contour)},
                 {"area", enclosed_area(contour)}};
  } else {
    const auto surface = extract_surface_3d(result.mesh, result.alpha);
    save_surface_ply(surface, outdir / "surface.ply");
    save_surface_vtk(surface, outdir / "surface.vtk");
    outputs.insert(outputs.end(), {(outdir / "surface.ply").string(), (outdir / "surface.vtk").string()});
    level_set = {{"vertices", surface.vertices.size()},
                 {"triangles", surface.triangles.size()},
                 {"closed", surface.closed()},
                 {"euler_characteristic", surface.euler_characteristic()},
                 {"area", surface.area()},
                 {"volume", surface.enclosed_volume()}};
  }

  json rows = json::array();
  for (const auto& s : result.stats) rows.push_back(stats_json(s));
  return {{"dim", cloud.dim},
          {"points", cloud.size()},
          {"nodes", result.mesh.num_nodes()},
          {"elements", result.mesh.num_elements()},
          {"iterations", ap.iters},
          {"domain", box_json(opt.domain, cloud.dim)},
          {"level_set", level_set},
          {"stats", rows},
          {"outputs", outputs}};
}

// ---- pipeline ---------------------------------------------------------------

class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {
    if (!j_.is_object()) throw InvalidArgument("config: top level must be a JSON object");
  }

  template <class T>
  void get(const std::string& key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument("config: key '" + key + "' has the wrong type: " + e.what());
    }
  }

  template <class T>
  void require_key(const std::string& key, T& value) {
    if (!j_.contains(key)) throw InvalidArgument("config: missing required key '" + key + "'");
    get(key, value);
  }

  std::vector<std::string> unknown() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) out.push_back(k);
    return out;
  }

  bool contains(const std::string& key) const { return j_.contains(key); }

 private:
  json j_;
  std::set<std::string> seen_;
};

json read_config(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config: " + path.string() + " is not valid JSON: " + e.what());
  }
}

// ---- CLI wiring -------------------------------------------------------------

void add_field_options(CLI::App* sub, FieldParams& fp) {
  sub->add_option("--h0", fp.h0, "EIMLS base space parameter (m)")->capture_default_str();
  sub->add_option("--gamma", fp.gamma, "weights below 10^-gamma are numerically zero")->capture_default_str();
  sub->add_option("--knn", fp.knn, "neighbors per EIMLS query")->capture_default_str();
  sub->add_option("--epsilon", fp.epsilon, "tanh truncation width (m)")->capture_default_str();
  sub->add_option("--domain", fp.domain, "x0 y0 [z0] x1 y1 [z1]; default 3x the cloud bounding box")
      ->expected(4, 6);
  sub->add_option("--dim", fp.dim, "force 2 (drop z) or 3");
}

int exit_code_for(const std::exception_ptr& ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return io_error;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return precondition_error;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return io_error;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"eimesh: anisotropic meshes adapted around point-cloud implicit surfaces"};
  app.require_subcommand(1);
  app.fallthrough();
  bool json_out = false;
  int threads = 0;
  app.add_flag("--json", json_out, "print machine-readable JSON stats on stdout");
  app.add_option("--threads", threads, "cap on worker threads (0: runtime default)");

  std::string in, outpath;
  PreprocessParams pp;
  FieldParams fp;
  GridParams gp;
  AdaptParams ap;
  std::string report_path;

  auto* pre = app.add_subcommand("preprocess", "outlier, grazing and octree filters, then PCA normals");
  pre->add_option("in", in, "input cloud (.ply, .xyz)")->required();
  pre->add_option("out", outpath, "output cloud (.ply binary, .xyz)")->required();
  pre->add_option("--outlier-k", pp.outlier_k, "neighbor rank for the density filter")->capture_default_str();
  pre->add_option("--outlier-dist", pp.outlier_dist, "max distance to that neighbor (m)")->capture_default_str();
  pre->add_option("--grazing-deg", pp.grazing_deg, "min incidence angle (deg), needs scan origins")
      ->capture_default_str();
  pre->add_option("--leaf", pp.leaf, "octree leaf size (m)")->capture_default_str();
  pre->add_option("--normals-k", pp.normals_k, "PCA neighborhood size")->capture_default_str();
  pre->add_option("--report", report_path, "JSON report path; default <out>.report.json");

  auto* fld = app.add_subcommand("field", "sample the truncated EIMLS field on a grid");
  fld->add_option("in", in, "input cloud with normals")->required();
  fld->add_option("out", outpath, "structured-points VTK")->required();
  add_field_options(fld, fp);
  fld->add_option("--res", gp.res, "samples per axis")->capture_default_str();
  fld->add_flag("--plain-imls", gp.plain_imls, "plain IMLS with constant h0; undefined samples are NaN");

  auto* adp = app.add_subcommand("adapt", "iterative anisotropic adaptation around the zero level set");
  adp->add_option("in", in, "input cloud with normals")->required();
  adp->add_option("outdir", outpath, "output directory")->required();
  add_field_options(adp, fp);
  adp->add_option("--nodes", ap.nodes, "target node count N")->required();
  adp->add_option("--iters", ap.iters, "adaptation iterations")->capture_default_str();
  adp->add_option("--init-h", ap.init_h, "initial isotropic spacing; default longest domain axis / 40");
  adp->add_flag("--snapshots", ap.snapshots, "write <outdir>/snapshots/iter_NNNN.vtk per iteration");

  std::string config_path;
  auto* pipe = app.add_subcommand("pipeline", "preprocess, adapt and extract from one JSON config");
  pipe->add_option("config", config_path, "config JSON (keys match the flag names)")->required();

  std::vector<std::string> argv_store{"eimesh"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (e.get_exit_code() == 0) return ok;
    err << "run with --help for usage\n";
    return config_error;
  }

  const Output io{out, err, json_out};
  try {
    require(threads >= 0, "--threads must be >= 0");
    set_thread_count(threads);

    if (pre->parsed()) {
      const auto cloud = load_cloud(in);
      const auto res = preprocess(cloud, pp);
      save_cloud(res.cloud, outpath, output_cloud_format(outpath));
      const fs::path rp = report_path.empty() ? fs::path(outpath + ".report.json") : fs::path(report_path);
      json report = res.report;
      report["output_file"] = outpath;
      write_text_file(rp, report.dump(2) + "\n");
      io.emit(report);
      io.note("preprocess: " + std::to_string(cloud.size()) + " -> " + std::to_string(res.cloud.size()) +
              " points; report " + rp.string());
    } else if (fld->parsed()) {
      const auto cloud = load_input(in, fp.dim);
      const auto j = write_field(cloud, fp, gp, outpath);
      io.emit(j);
      io.note("field: " + std::to_string(j["samples"].get<std::size_t>()) + " samples (" +
              std::to_string(j["undefined"].get<std::size_t>()) + " undefined) -> " + outpath);
    } else if (adp->parsed()) {
      const auto cloud = load_input(in, fp.dim);
      const auto j = run_adapt(cloud, fp, ap, outpath, io);
      io.emit(j);
      io.note("adapt: " + std::to_string(j["nodes"].get<std::size_t>()) + " nodes, " +
              std::to_string(j["elements"].get<std::size_t>()) + " elements -> " + outpath);
    } else if (pipe->parsed()) {
      Config cfg(read_config(config_path));
      cfg.require_key("in", in);
      cfg.require_key("out", outpath);
      cfg.require_key("nodes", ap.nodes);
      bool do_preprocess = true;
      cfg.get("preprocess", do_preprocess);
      cfg.get("outlier-k", pp.outlier_k);
      cfg.get("outlier-dist", pp.outlier_dist);
      cfg.get("grazing-deg", pp.grazing_deg);
      cfg.get("leaf", pp.leaf);
      cfg.get("normals-k", pp.normals_k);
      cfg.get("h0", fp.h0);
      cfg.get("gamma", fp.gamma);
      cfg.get("knn", fp.knn);
      cfg.get("epsilon", fp.epsilon);
      cfg.get("domain", fp.domain);
      cfg.get("dim", fp.dim);
      cfg.get("iters", ap.iters);
      cfg.get("init-h", ap.init_h);
      cfg.get("snapshots", ap.snapshots);
      const bool want_field = cfg.contains("res") || cfg.contains("plain-imls");
      cfg.get("res", gp.res);
      cfg.get("plain-imls", gp.plain_imls);
      int cfg_threads = threads;
      cfg.get("threads", cfg_threads);
      require(cfg_threads >= 0, "config: 'threads' must be >= 0");
      set_thread_count(cfg_threads);
      for (const auto& k : cfg.unknown()) err << "warning: unknown config key '" << k << "' ignored\n";

      const fs::path outdir = outpath;
      std::error_code ec;
      fs::create_directories(outdir, ec);
      if (ec) throw IoError("cannot create output directory " + outdir.string() + ": " + ec.message());

      json summary;
      OrientedPointCloud cloud;
      if (do_preprocess) {
        auto res = preprocess(load_cloud(in), pp);
        save_cloud(res.cloud, outdir / "preprocessed.ply", CloudFormat::ply_binary_le);
        write_text_file(outdir / "preprocess.json", res.report.dump(2) + "\n");
        summary["preprocess"] = res.report;
        // Same bytes the standalone subcommands would read back.
        cloud = load_input(outdir / "preprocessed.ply", fp.dim);
      } else {
        cloud = load_input(in, fp.dim);
      }
      if (want_field) summary["field"] = write_field(cloud, fp, gp, outdir / "field.vtk");
      summary["adapt"] = run_adapt(cloud, fp, ap, outdir, io);
      io.emit(summary);
      io.note("pipeline: " + std::to_string(summary["adapt"]["nodes"].get<std::size_t>()) + " nodes -> " +
              outdir.string());
    }
    return ok;
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
}

}  // namespace eimesh::cli
