#include "synthetic.hpp"

#include "eimesh/eimls.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <queue>
#include <random>

using namespace eimesh;

namespace {

OrientedPointCloud single_point(const Vec3& p, const Vec3& n, int dim) {
  OrientedPointCloud c;
  c.dim = dim;
  c.points = {p};
  c.normals = {n};
  return c;
}

// Direct transcription of the field over all points (k >= cloud size).
double brute_eimls(const OrientedPointCloud& c, const Vec3& x, double h0, double gamma) {
  const double lg = std::sqrt(2.0 * gamma * std::log(10.0));
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& p : c.points) dmin = std::min(dmin, (p - x).norm());
  const double h = std::max(dmin / lg, h0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = (c.points[i] - x).norm();
    const double w = std::exp(-(r / h) * (r / h) / 2.0);
    num += w * (x - c.points[i]).dot(c.normals[i]);
    den += w;
  }
  return num / den;
}

// Number of 4-connected components of cells where pred holds.
template <class Pred>
int components(const ScalarGrid& g, Pred pred) {
  const int nx = g.resolution[0], ny = g.resolution[1];
  std::vector<char> seen(g.values.size(), 0);
  int count = 0;
  for (int s = 0; s < nx * ny; ++s) {
    if (seen[s] || !pred(g.values[s])) continue;
    ++count;
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const int c = q.front();
      q.pop();
      const int i = c % nx, j = c / nx;
      const std::array<std::array<int, 2>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
      for (const auto& [a, b] : nb) {
        if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
        const int t = a + nx * b;
        if (!seen[t] && pred(g.values[t])) {
          seen[t] = 1;
          q.push(t);
        }
      }
    }
  }
  return count;
}

}  // namespace

TEST_SUITE("eimls") {
  TEST_CASE("l_gamma") {
    CHECK(l_gamma(7.0) == doctest::Approx(std::sqrt(14.0 * std::log(10.0))).epsilon(1e-15));
    CHECK(l_gamma(7.0) == doctest::Approx(5.6777).epsilon(1e-4));
    CHECK(l_gamma(1e-12) < 1e-5);
    for (double g : {1.0, 7.0, 12.0})
      CHECK(kernel_weight(Kernel::gaussian, l_gamma(g)) == doctest::Approx(std::pow(10.0, -g)).epsilon(1e-14));
    CHECK_THROWS_AS(l_gamma(0.0), InvalidArgument);
  }

  TEST_CASE("kernel values") {
    CHECK(kernel_weight(Kernel::gaussian, 0.0) == 1.0);
    CHECK(kernel_weight(Kernel::compact, 0.0) == 1.0);
    CHECK(kernel_weight(Kernel::compact, 1.0) == 0.0);
    CHECK(kernel_weight(Kernel::compact, 1.5) == 0.0);
    CHECK(kernel_weight(Kernel::compact, 0.5) == 0.31640625);
    CHECK(kernel_weight(Kernel::interpolatory, 2.0) == 0.25);
    CHECK_THROWS_AS(kernel_weight(Kernel::interpolatory, 0.0), InvalidArgument);
    CHECK(parse_kernel("compact") == Kernel::compact);
    CHECK_THROWS_AS(parse_kernel("box"), InvalidArgument);
  }

  TEST_CASE("h_extended") {
    EimlsConfig cfg;
    cfg.h0 = 0.003;
    const EimlsField f(single_point(Vec3::Zero(), Vec3(0, 1, 0), 2), cfg);
    CHECK(f.h_extended(Vec3::Zero()) == 0.003);
    const double lg = std::sqrt(14.0 * std::log(10.0));
    CHECK(f.h_extended(Vec3(0.1, 0, 0)) == doctest::Approx(std::max(0.1 / lg, 0.003)).epsilon(1e-14));
    CHECK(f.h_extended(Vec3(0.1, 0, 0)) == doctest::Approx(0.017613).epsilon(1e-4));
    double prev = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double h = f.h_extended(Vec3(0.01 * i, 0.0, 0));
      CHECK(h >= prev);
      prev = h;
    }
  }

  TEST_CASE("single oriented point reproduces its tangent line") {
    EimlsConfig cfg;
    const EimlsField f(single_point(Vec3::Zero(), Vec3(0, 1, 0), 2), cfg);
    for (double t : {-100.0, -1.0, -1e-3, 0.0, 0.25, 7.0, 1e4}) CHECK(f.eval(Vec3(0, t, 0)) == doctest::Approx(t).epsilon(1e-15));
  }

  TEST_CASE("plane exactness for every kernel and k") {
    const auto c = testing::plane_cloud(200, 3);
    std::mt19937_64 rng(1);
    for (Kernel kern : {Kernel::gaussian, Kernel::compact, Kernel::interpolatory}) {
      for (int k : {1, 5, 80, 500}) {
        EimlsConfig cfg;
        cfg.kernel = kern;
        cfg.k = k;
        cfg.h0 = 0.05;
        const EimlsField f(c, cfg);
        for (int q = 0; q < 50; ++q) {
          const Vec3 x = testing::random_point(rng, 3, -2.0, 2.0);
          CHECK(std::abs(f.eval(x) - x.z()) <= 1e-12 * std::max(1.0, std::abs(x.z())));
        }
      }
    }
  }

  TEST_CASE("matches the all-points oracle") {
    std::mt19937_64 rng(21);
    auto c = testing::circle_cloud(60, 0.5, 0.02, 5);
    EimlsConfig cfg;
    cfg.h0 = 0.02;
    cfg.k = 60;
    const EimlsField f(c, cfg);
    for (int q = 0; q < 300; ++q) {
      const Vec3 x = testing::random_point(rng, 2, -3.0, 3.0);
      const double ref = brute_eimls(c, x, cfg.h0, cfg.gamma);
      CHECK(std::abs(f.eval(x) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }

  TEST_CASE("finite everywhere, far away included") {
    const auto c = testing::slice_cloud();
    EimlsConfig cfg;
    cfg.h0 = 0.0001;
    const EimlsField f(c, cfg);
    std::mt19937_64 rng(2);
    for (int q = 0; q < 2000; ++q) CHECK(std::isfinite(f.eval(testing::random_point(rng, 2, -50.0, 50.0))));
  }

  TEST_CASE("sign flip and rigid motion") {
    auto c = testing::circle_cloud(128, 0.5, 0.01, 3);
    EimlsConfig cfg;
    cfg.h0 = 0.01;
    const EimlsField f(c, cfg);
    auto flipped = c;
    for (auto& n : flipped.normals) n = -n;
    const EimlsField g(flipped, cfg);
    const Eigen::AngleAxisd rot(0.7, Vec3::UnitZ());
    const Vec3 shift(3.0, -1.0, 0.0);
    auto moved = c;
    for (auto& p : moved.points) p = rot * p + shift;
    for (auto& n : moved.normals) n = rot * n;
    const EimlsField h(moved, cfg);
    std::mt19937_64 rng(9);
    for (int q = 0; q < 300; ++q) {
      const Vec3 x = testing::random_point(rng, 2, -1.5, 1.5);
      CHECK(g.eval(x) == -f.eval(x));
      CHECK(std::abs(h.eval(rot * x + shift) - f.eval(x)) < 1e-9);
    }
  }

  TEST_CASE("truncation") {
    EimlsConfig cfg;
    cfg.epsilon = 0.005;
    const EimlsField f(single_point(Vec3::Zero(), Vec3(0, 1, 0), 2), cfg);
    CHECK(f.eval_truncated(Vec3::Zero()) == 0.0);
    CHECK(f.eval_truncated(Vec3(0, 0.005, 0)) == doctest::Approx(0.005 * std::tanh(1.0)).epsilon(1e-14));
    CHECK(f.eval_truncated(Vec3(0, 0.005, 0)) == doctest::Approx(0.0038079).epsilon(1e-4));
    double prev = -1.0;
    for (int i = -200; i <= 200; ++i) {
      const double t = i * 1e-4;
      const double v = f.eval_truncated(Vec3(0, t, 0));
      CHECK(std::abs(v) < 0.005);
      CHECK(v > prev);
      CHECK(f.eval_truncated(Vec3(0, -t, 0)) == -v);
      prev = v;
    }
    for (double d : {1e-4, 1e-5, 1e-6}) {
      const double slope = (f.eval_truncated(Vec3(0, d, 0)) - f.eval_truncated(Vec3(0, -d, 0))) / (2 * d);
      CHECK(std::abs(slope - 1.0) < 1e-3);
    }
    for (double v : {0.1, 1.0, 1e3, 1e300, std::numeric_limits<double>::infinity()}) {
      CHECK(truncate_tanh(v, 0.005) < 0.005);
      CHECK(truncate_tanh(-v, 0.005) == -truncate_tanh(v, 0.005));
      CHECK(truncate_tanh(v, 0.005) >= truncate_tanh(v / 2, 0.005));
    }
  }

  TEST_CASE("near-surface distance behavior on a dense circle") {
    const double R = 0.5, h0 = 0.01;
    const auto c = testing::circle_cloud(512, R);
    EimlsConfig cfg;
    cfg.h0 = h0;
    const EimlsField f(c, cfg);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), off(-5 * h0, 5 * h0);
    for (int q = 0; q < 1000; ++q) {
      const double t = ang(rng), r = R + off(rng);
      const Vec3 x(r * std::cos(t), r * std::sin(t), 0);
      CHECK(std::abs(f.eval(x) - (r - R)) < 3 * h0);
    }
  }

  TEST_CASE("plain IMLS is undefined beyond the support") {
    EimlsConfig cfg;
    const EimlsField f(single_point(Vec3::Zero(), Vec3(0, 1, 0), 2), cfg);
    const double h = 0.01;
    const double reach = h * l_gamma(cfg.gamma);
    CHECK(f.eval_plain_imls(Vec3(0, 0.99 * reach, 0), h).has_value());
    CHECK_FALSE(f.eval_plain_imls(Vec3(0, 1.01 * reach, 0), h).has_value());
    const auto plane = testing::plane_cloud(100, 1);
    const EimlsField p(plane, cfg);
    CHECK(*p.eval_plain_imls(Vec3(0.1, 0.1, 0.0), 0.1) == doctest::Approx(0.0));
  }

  TEST_CASE("plain IMLS verdicts match the nearest-point oracle on the slice") {
    const auto c = testing::slice_cloud();
    const Box dom = c.bounding_box().scaled(3.0);
    std::array<double, 3> frac{};
    const double hs[3] = {0.0001, 0.0005, 0.0015};
    for (int s = 0; s < 3; ++s) {
      EimlsConfig cfg;
      cfg.h0 = hs[s];
      const EimlsField f(c, cfg);
      const auto g = sample_on_grid(f, dom, {80, 80, 1}, GridMode::plain_imls, hs[s]);
      std::size_t undef = 0;
      for (int j = 0; j < 80; ++j)
        for (int i = 0; i < 80; ++i) {
          const Vec3 x = g.position(i, j);
          double dmin = 1e300;
          for (const auto& p : c.points) dmin = std::min(dmin, (p - x).norm());
          const bool oracle_defined = std::exp(-dmin * dmin / (2 * hs[s] * hs[s])) >= 1e-7;
          CHECK(oracle_defined == std::isfinite(g.values[g.index(i, j)]));
          undef += !std::isfinite(g.values[g.index(i, j)]);
        }
      frac[s] = static_cast<double>(undef) / 6400.0;
      const auto e = sample_on_grid(f, dom, {80, 80, 1}, GridMode::eimls);
      for (double v : e.values) CHECK(std::isfinite(v));
    }
    CHECK(frac[0] > frac[1]);
    CHECK(frac[1] > frac[2]);
  }

  TEST_CASE("slice field sign forms one inside and one outside region") {
    const auto c = testing::slice_cloud();
    EimlsConfig cfg;
    cfg.h0 = 0.0015;
    const EimlsField f(c, cfg);
    const auto g = sample_on_grid(f, c.bounding_box().scaled(3.0), {200, 200, 1}, true);
    CHECK(components(g, [](double v) { return v >= 0.0; }) == 1);
    CHECK(components(g, [](double v) { return v < 0.0; }) == 1);
  }

  TEST_CASE("grid sampling") {
    EimlsConfig cfg;
    const EimlsField f(single_point(Vec3(0.2, 0.3, 0), Vec3(1, 0, 0), 2), cfg);
    const Box b(Vec3(-1, -1, 0), Vec3(1, 1, 0));
    const auto g = sample_on_grid(f, b, {2, 2, 1}, false);
    REQUIRE(g.values.size() == 4);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        CHECK(std::isfinite(g.values[g.index(i, j)]));
        CHECK(g.values[g.index(i, j)] == f.eval(g.position(i, j)));
      }
    const auto plane = testing::plane_cloud(100, 2);
    const EimlsField p(plane, cfg);
    const auto pg = sample_on_grid(p, Box(Vec3(-1, -1, -1), Vec3(1, 1, 1)), {3, 3, 5}, false);
    for (int k = 0; k < 5; ++k) CHECK(pg.values[pg.index(1, 1, k)] == doctest::Approx(pg.position(1, 1, k).z()));
    CHECK_THROWS_AS(sample_on_grid(f, b, {1, 2, 1}, false), InvalidArgument);
  }

  TEST_CASE("configuration checks") {
    EimlsConfig cfg;
    cfg.h0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.epsilon = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    OrientedPointCloud bare;
    bare.points = {Vec3::Zero()};
    CHECK_THROWS_AS(EimlsField(bare, EimlsConfig{}), PreconditionError);
  }
}
