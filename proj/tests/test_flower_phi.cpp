#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "betatess/flower_phi.hpp"
#include "betatess/hull.hpp"
#include "betatess/quadrature.hpp"
#include "betatess/tessellation.hpp"

using namespace betatess;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Polytope polygon(std::vector<Vector> verts) {
  Polytope K;
  K.dim = static_cast<int>(verts[0].size());
  K.vertices = std::move(verts);
  return K;
}

// Convex polygon hull of the given points.
Polytope hull_polygon(const std::vector<Vector>& pts) {
  Eigen::MatrixXd m(2, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(i) = pts[i];
  const ConvexHull h = convex_hull(m);
  std::vector<Vector> out;
  for (int i : h.vertices) out.push_back(pts[i]);
  return polygon(out);
}

// Density at a general height straight from the radial integral, by Gauss-Kronrod.
double density_at_height(const ModelParams& p, double h, double t) {
  const double c = 2 * p.gamma * normalizing_constant(p);
  if (p.kappa == 1) {
    const double top = t + std::sqrt(t * t + h);
    const auto f = [&](double r) {
      const double q = h + t * t - (r - t) * (r - t);
      return q > 0 ? std::pow(q, p.beta) * std::pow(r, p.d) : 0.0;
    };
    return c * adaptive_gk(f, 0, top, 1e-11).value;
  }
  const auto f = [&](double u) {
    if (u >= 1) return 0.0;
    const double r = u / (1 - u);
    const double q = -h - t * t + (r - t) * (r - t);
    return std::pow(q, -p.beta) * std::pow(r, p.d) / ((1 - u) * (1 - u));
  };
  return c * adaptive_gk(f, 0, 1, 1e-11).value;
}

// Density at reference height +1 through r - t = sqrt(1 + t^2) q.
double density_q_form(const ModelParams& p, double t) {
  const double sigma = t / std::sqrt(1 + t * t);
  const auto f = [&](double q) { return std::pow(1 - q * q, p.beta) * std::pow(q + sigma, p.d); };
  const double I = adaptive_gk(f, -sigma, 1, 1e-12).value;
  return 2 * p.gamma * normalizing_constant(p) * std::pow(1 + t * t, p.beta + 0.5 * (p.d + 1)) * I;
}

struct CellSet {
  std::vector<WeightedPoint> nuclei;
  std::vector<Polytope> cells;
};

// Certified bounded cells of small tessellations, translated so that the nucleus is at the origin.
CellSet certified_cells(const ModelParams& p, int wanted, std::uint64_t seed) {
  DomainOptions o;
  o.inner_side = 6;
  if (p.kappa == 1) o.h_max = 3;
  CellSet out;
  for (std::uint64_t rep = 0; static_cast<int>(out.cells.size()) < wanted && rep < 20; ++rep) {
    const Tessellation t = tessellate(sample_points(p, make_domain(p, o), seed, rep));
    for (const auto& c : t.cells) {
      if (!c.certified || static_cast<int>(out.cells.size()) >= wanted) continue;
      const WeightedPoint x = t.sample.point(c.site);
      Polytope K = c.cell;
      for (auto& w : K.vertices) w -= x.v;
      out.nuclei.push_back({Vector::Zero(2), x.h});
      out.cells.push_back(K);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("paraboloid measure") {
  const ModelParams p{1, 0, 1, 2};
  CHECK(mu_paraboloid(p, {vec2(3, -1), 1.0}) == doctest::Approx(0.375).epsilon(1e-14));
  // Degree 2 beta + d + 2 = 4 here.
  for (double c : {0.5, 2.0, 3.0}) CHECK(mu_paraboloid(p, {vec2(0, 0), c * c}) / 0.375 == doctest::Approx(std::pow(c, 4)));
  CHECK_THROWS_AS(mu_paraboloid({-1, 3, 1, 2}, {vec2(0, 0), 0.1}), Error);
  CHECK_THROWS_AS(mu_paraboloid(p, {vec2(0, 0), -0.1}), Error);

  // Rejection sampling of the uniform measure in [-1, 1]^2 x [0, 1] under the paraboloid.
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(-1, 1), H(0, 1);
  const int n = 400000;
  int hit = 0;
  for (int i = 0; i < n; ++i) {
    const double x = U(g), y = U(g);
    hit += H(g) <= 1 - x * x - y * y;
  }
  const double mc = normalizing_constant(p) * 4.0 * hit / n;
  CHECK(std::abs(mc / 0.375 - 1) < 0.01);
}

TEST_CASE("singleton content") {
  const ModelParams p{1, 0, 1, 2};
  const WeightedPoint o{vec2(0, 0), 0.0};
  CHECK(phi_point(p, o, vec2(1, 0)) == doctest::Approx(0.375).epsilon(1e-14));
  const WeightedPoint x{vec2(0.5, 0.2), 0.8};
  CHECK(phi_point(p, x, x.v) == doctest::Approx(mu_paraboloid(p, x)).epsilon(1e-15));
  double prev = 0;
  for (double r = 0.25; r < 5; r += 0.25) {
    const double v = phi_point(p, o, vec2(r, 0));
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(phi_point({-1, 3, 1, 2}, {vec2(0, 0), -1.0}, vec2(1.5, 0)), Error);
}

TEST_CASE("density agrees with the substituted form and its bounds") {
  for (double beta : {0.0, 1.5}) {
    const ModelParams p{1, beta, 1, 2};
    for (double t : {-3.0, -0.4, 0.0, 0.7, 2.0, 10.0})
      CHECK(density_m(p, t) == doctest::Approx(density_q_form(p, t)).epsilon(1e-9));

    // For t >= 0 the q-integral lies between its values with sigma = 0 and sigma = 1.
    const double c = 2 * normalizing_constant(p);
    const double lo = c * adaptive_gk([&](double q) { return std::pow(1 - q * q, beta) * std::pow(q, 2); }, 0, 1).value;
    const double hi =
        c * adaptive_gk([&](double q) { return std::pow(1 - q * q, beta) * std::pow(q + 1, 2); }, -1, 1).value;
    for (double t = 0; t <= 50; t += 0.5) {
      const double ratio = density_m(p, t) / std::pow(1 + t * t, beta + 1.5);
      CHECK(ratio >= lo * (1 - 1e-9));
      CHECK(ratio <= hi * (1 + 1e-9));
    }
  }

  // kappa = -1: m (1 - t^2)^(beta - 1/2) stays within fixed constants up to t = 1.
  const ModelParams q{-1, 3, 1, 2};
  double rmin = 1e300, rmax = 0;
  for (double t : {0.0, 0.3, 0.6, 0.9, 0.99, 0.999, 1 - 1e-5, 1 - 1e-7}) {
    const double r = density_m(q, t) * std::pow(1 - t * t, q.beta - 0.5);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  CHECK(rmax / rmin < 10);
  CHECK_THROWS_AS(density_m(q, 1.0), Error);
  CHECK_THROWS_AS(cumulative_m(q, 1.5), Error);
}

TEST_CASE("density homogeneity in the height") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{1, 2, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    for (double c : {0.5, 2.0}) {
      const double h = p.kappa * c * c;
      const double e = p.kappa * 2 * p.beta + p.d + 1;
      for (double t : {-1.0, 0.0, 0.4 * c, 0.8 * c}) {
        CAPTURE(p.kappa);
        CAPTURE(t);
        CHECK(density_at_height(p, h, t) == doctest::Approx(std::pow(c, e) * density_m(p, t / c)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("cumulative is the integral of the density") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{1, -0.5, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    for (double t : {-2.0, 0.0, 0.5, 0.9}) {
      const double dt = 1e-5;
      const double fd = (cumulative_m(p, t + dt) - cumulative_m(p, t - dt)) / (2 * dt);
      CHECK(fd == doctest::Approx(density_m(p, t)).epsilon(1e-6));
    }
    // s = -tan(theta) maps (-inf, 0] to [0, pi/2).
    const auto f = [&](double th) {
      const double c = std::cos(th);
      return c > 0 ? density_m(p, -std::tan(th)) / (c * c) : 0.0;
    };
    const double tail = adaptive_gk(f, 0, kPi / 2, 1e-10).value;
    CHECK(tail == doctest::Approx(cumulative_m(p, 0)).epsilon(1e-7));
    CHECK(sphere_area(2) * tail == doctest::Approx(paraboloid_measure(p, p.kappa)).epsilon(1e-7));
  }
}

TEST_CASE("density table") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    const DensityTable T(p);
    CHECK(T.error_estimate() < 1e-6);
    const auto& m = T.m_values();
    const auto& cum = T.cumulative_values();
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m[i] >= 0);
      if (i > 0) CHECK(cum[i] > cum[i - 1]);
    }
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> U(-20, p.kappa == 1 ? 20 : 0.999);
    for (int i = 0; i < 50; ++i) {
      const double t = U(g);
      CHECK(T.density(t) == doctest::Approx(density_m(p, t)).epsilon(1e-6));
      CHECK(T.cumulative(t) == doctest::Approx(cumulative_m(p, t)).epsilon(1e-6));
    }
    // Outside the grid the table evaluates directly.
    const double far = p.kappa == 1 ? 1e6 : 1 - 1e-12;
    CHECK(T.cumulative(far) == doctest::Approx(cumulative_m(p, far)).epsilon(1e-9));
  }
}

TEST_CASE("density table cache") {
  const ModelParams p{1, 0, 1, 2};
  const DensityTable T(p, 0.05);
  const std::string path = "density_table_test.csv";
  T.save_csv(path);
  const DensityTable L = DensityTable::load_csv(path, p, 0.05);
  CHECK(L.fingerprint() == T.fingerprint());
  CHECK(L.error_estimate() == T.error_estimate());
  CHECK(L.grid() == T.grid());
  for (double t : {-3.3, 0.01, 2.7}) CHECK(L.cumulative(t) == T.cumulative(t));
  CHECK_THROWS_AS(DensityTable::load_csv(path, {1, 1, 1, 2}, 0.05), Error);
  CHECK_THROWS_AS(DensityTable::load_csv(path, p, 0.01), Error);
  std::remove(path.c_str());
}

TEST_CASE("content of singletons and balls") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    const DensityTable T(p);
    const double h = p.kappa == 1 ? 0.6 : -1.7;
    const WeightedPoint x{vec2(0, 0), h};
    const WeightedPoint y{vec2(1, 2), h};
    for (const Vector& w : {vec2(0, 0), vec2(0.4, -0.3)}) {
      CHECK(phi_content(T, x, polygon({w})).value == doctest::Approx(phi_point(p, x, w)).epsilon(1e-9));
      CHECK(phi_content(T, y, polygon({y.v + w})).value == doctest::Approx(phi_point(p, x, w)).epsilon(1e-9));
    }
    const PhiResult s = phi_content(T, x, polygon({vec2(0, 0)}));
    CHECK(s.directional_part == doctest::Approx(0).epsilon(1e-9).scale(s.value));
    CHECK(phi_content_ball(T, x, 0).value == doctest::Approx(mu_paraboloid(p, x)).epsilon(1e-9));
  }

  const ModelParams p{1, 0, 1, 2};
  const DensityTable T(p);
  const WeightedPoint x{vec2(0, 0), 1.0};
  Rng rng(21);
  for (double r : {0.5, 1.0, 2.0}) {
    const PhiResult q = phi_content_ball(T, x, r);
    const PhiResult m = phi_content_mc_ball(p, x, r, rng, 200000);
    CAPTURE(r);
    CHECK(std::abs(q.value - m.value) < 3 * m.std_error);
  }
  // Growth like (1 + r^2)^(beta + d/2 + 1).
  double lo = 1e300, hi = 0;
  for (double r = 0; r <= 8; r += 0.25) {
    const double ratio = phi_content_ball(T, x, r).value / std::pow(1 + r * r, 2);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  CHECK(hi / lo < 20);
}

TEST_CASE("Monte Carlo estimator") {
  const ModelParams p{1, 0, 1, 2};
  const WeightedPoint x{vec2(0, 0), 0.5};
  Rng rng(33);
  const PhiResult one = phi_content_mc(p, x, polygon({vec2(0.3, 0.4)}), rng, 5000);
  CHECK(one.accepted == one.samples);
  CHECK(one.value == doctest::Approx(phi_point(p, x, vec2(0.3, 0.4))).epsilon(1e-12));

  const Polytope K = polygon({vec2(0.5, 0), vec2(-0.3, 0.4), vec2(-0.2, -0.6)});
  const PhiResult a = phi_content_mc(p, x, K, rng, 50000);
  const PhiResult b = phi_content_mc(p, x, K, rng, 200000);
  CHECK(a.std_error / b.std_error == doctest::Approx(2).epsilon(0.2));
  CHECK(a.value > 0);
  CHECK_THROWS_AS(phi_content_mc({-1, 3, 1, 2}, {vec2(0, 0), -0.3}, K, rng, 10), Error);
}

TEST_CASE("quadrature and Monte Carlo agree on certified cells") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{1, 3, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    const DensityTable T(p);
    const CellSet cs = certified_cells(p, 20, 101);
    REQUIRE(cs.cells.size() == 20);
    Rng rng(77);
    int misses = 0;
    for (std::size_t i = 0; i < cs.cells.size(); ++i) {
      const PhiResult q = phi_content(T, cs.nuclei[i], cs.cells[i]);
      const PhiResult m = phi_content_mc(p, cs.nuclei[i], cs.cells[i], rng, 100000);
      CHECK(m.std_error / m.value < 0.02);
      misses += std::abs(q.value - m.value) > 3 * m.std_error;
    }
    CAPTURE(p.kappa);
    CHECK(misses <= 1);
  }
}

TEST_CASE("content scaling, monotonicity and sandwich") {
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{1, 1, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    const DensityTable T(p);
    const CellSet cs = certified_cells(p, 15, 202);
    std::mt19937_64 g(5);
    for (std::size_t i = 0; i < cs.cells.size(); ++i) {
      const WeightedPoint& x = cs.nuclei[i];
      const Polytope& K = cs.cells[i];
      const double phi = phi_content(T, x, K).value;
      CHECK(phi > 0);
      for (double c : {0.5, 2.0}) {
        Polytope S = K;
        for (auto& w : S.vertices) w *= c;
        const double ratio = phi_content(T, scale(x, c), S).value / phi;
        CHECK(ratio == doctest::Approx(std::pow(c, p.homogeneity())).epsilon(1e-4));
      }

      // Adding a point outside the cell enlarges the flower.
      std::vector<Vector> pts = K.vertices;
      std::normal_distribution<double> N;
      pts.push_back(K.vertices[0] * 1.3 + 0.1 * vec2(N(g), N(g)));
      const Polytope L = hull_polygon(pts);
      double RL = 0;
      for (const auto& w : L.vertices) RL = std::max(RL, w.norm());
      if (p.kappa == 1 || RL * RL < -x.h) CHECK(phi_content(T, x, L).value >= phi * (1 - 1e-9));

      double R = 0, far = 0;
      for (const auto& w : K.vertices) R = std::max(R, w.norm());
      for (const auto& w : K.vertices) far = std::max(far, phi_point(p, x, w));
      CHECK(far <= phi * (1 + 1e-9));
      if (p.kappa == -1 && !(R * R < -x.h)) continue;
      const double ball = phi_content_ball(T, x, R).value;
      CHECK(phi <= ball * (1 + 1e-9));
      const double R2 = p.kappa * (x.h + R * R);
      if (p.kappa == 1) CHECK(ball <= 16 * mu_paraboloid(p, {vec2(0, 0), R2}));
    }
  }
}

TEST_CASE("content needs a finite flower") {
  const ModelParams p{-1, 3, 1, 2};
  const DensityTable T(p);
  const WeightedPoint x{vec2(0, 0), -1.0};
  CHECK_THROWS_AS(phi_content(T, x, polygon({vec2(1.1, 0), vec2(0, 0.5), vec2(-0.5, -0.5)})), Error);
  CHECK_THROWS_AS(phi_content(T, {vec2(0, 0), 1.0}, polygon({vec2(0.1, 0)})), Error);
}
