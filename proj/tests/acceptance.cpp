// Acceptance gates: one line per criterion, exit status 1 when a hard gate fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "betatess/error.hpp"
#include "betatess/flower_phi.hpp"
#include "betatess/quadrature.hpp"
#include "betatess/special.hpp"
#include "betatess/statistics.hpp"
#include "betatess/tessellation.hpp"

using namespace betatess;

namespace {

constexpr double kPi = 3.14159265358979323846;
const std::vector<std::uint64_t> kSeeds = {1001, 1002, 1003, 1004, 1005};

struct Result {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string format(const char* f, Args... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t m = x.size() / 2;
  return x.size() % 2 ? x[m] : 0.5 * (x[m - 1] + x[m]);
}

std::set<std::vector<int>> simplex_set(const Triangulation& t) {
  std::set<std::vector<int>> out;
  for (int s = 0; s < t.simplex_count(); ++s)
    out.insert(std::vector<int>(t.simplices.begin() + s * (t.d + 1), t.simplices.begin() + (s + 1) * (t.d + 1)));
  return out;
}

// Certified bounded cells with nucleus in the inner box.
template <typename F>
void for_certified(const Tessellation& t, F&& f) {
  for (const auto& c : t.cells)
    if (c.certified && c.status == CellStatus::Bounded && t.sample.domain.inner_box.contains(t.tri.v.col(c.site)))
      f(c);
}

// ---------------------------------------------------------------------------------------------------------

Result oracle_equivalence() {
  std::mt19937_64 g(2718);
  std::uniform_real_distribution<double> u(0, 1);
  int same = 0, total = 0;
  for (int kappa : {1, -1})
    for (int d : {2, 3})
      for (int trial = 0; trial < 200; ++trial) {
        const int n_max = d == 2 ? 12 : 8;
        const int n = d + 2 + trial % (n_max - d - 1);
        Eigen::MatrixXd v(d, n);
        Eigen::VectorXd h(n);
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < d; ++k) v(k, i) = u(g);
          h[i] = kappa * 0.1 * u(g);
        }
        ++total;
        same += simplex_set(build_weighted_delaunay(v, h)) == simplex_set(brute_force_delaunay(v, h));
      }
  return {same == total, format("%d/%d instances give identical simplex sets (d = 2, 3; both kappa)", same, total)};
}

Result duality() {
  const std::vector<std::pair<ModelParams, int>> plan = {
      {{1, 0, 1, 2}, 17}, {{1, 3, 1, 2}, 17}, {{-1, 3, 1, 2}, 16}};
  long long vertices = 0, agree = 0;
  int reps = 0;
  for (const auto& [p, n] : plan) {
    DomainOptions o;
    o.inner_side = 10;
    const SampleDomain dom = make_domain(p, o);
    for (int r = 0; r < n; ++r, ++reps) {
      const Tessellation t = tessellate(sample_points(p, dom, 31, r));
      for_certified(t, [&](const CellRecord& c) {
        ++vertices;
        agree += c.n_facets == degree(t.tri, c.site);
      });
    }
  }
  return {vertices > 0 && agree == vertices,
          format("degree = facet count for %lld/%lld certified vertices over %d tessellations", agree, vertices, reps)};
}

Result closed_form_anchor() {
  const ModelParams p{1, 0, 1, 2};
  // Uniform rejection sampling in [-1, 1]^2 x [0, 1].
  Rng rng(77, 0, 3);
  const long long n = 2000000;
  long long hit = 0;
  for (long long i = 0; i < n; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1), z = rng.uniform();
    hit += z <= 1 - x * x - y * y;
  }
  const double mc = p.gamma * normalizing_constant(p) * 4.0 * double(hit) / n;
  const double mc_err = std::abs(mc / 0.375 - 1);
  const double radial = sphere_area(2) * DensityTable(p).cumulative(0);

  // Measure by polar quadrature of the height integral, at apex heights c^2.
  const auto measure = [&](double H) {
    const auto f = [&](double r) {
      const double top = H - r * r;
      return top > 0 ? 2 * kPi * r * std::pow(top, p.beta + 1) / (p.beta + 1) : 0.0;
    };
    return p.gamma * normalizing_constant(p) * adaptive_gk(f, 0, std::sqrt(H), 1e-13).value;
  };
  const double m1 = measure(1);
  double worst = 0;
  for (double c : {0.5, 2.0}) {
    const double exponent = std::log(measure(c * c) / m1) / std::log(c);
    worst = std::max(worst, std::abs(exponent / p.homogeneity() - 1));
  }
  const bool pass = mc_err < 0.01 && std::abs(radial / 0.375 - 1) < 1e-8 && worst < 1e-3;
  return {pass, format("MC %.5f (rel. err %.2e), radial quadrature %.10f, target 0.375; scaling exponent rel. err "
                       "%.1e for c in {0.5, 2}",
                       mc, mc_err, radial, worst)};
}

Result phi_agreement() {
  std::string detail;
  bool pass = true;
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{1, 3, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    const DensityTable table(p);
    DomainOptions o;
    o.inner_side = 6;
    std::vector<std::pair<WeightedPoint, Polytope>> cells;
    for (int rep = 0; cells.size() < 20 && rep < 40; ++rep) {
      const Tessellation t = tessellate(sample_points(p, make_domain(p, o), 577, rep));
      for_certified(t, [&](const CellRecord& c) {
        if (cells.size() >= 20) return;
        const WeightedPoint x = t.sample.point(c.site);
        Polytope K = c.cell;
        for (auto& w : K.vertices) w -= x.v;
        for (auto& H : K.halfspaces) H.t -= H.u.dot(x.v);
        cells.push_back({{Vector::Zero(2), x.h}, K});
      });
    }
    Rng rng(4242, 0, 5);
    int within = 0, first_pass = 0;
    double worst_rel_sigma = 0, worst_z = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& [x, K] = cells[i];
      const PhiResult q = phi_content(table, x, K);
      const PhiResult m = phi_content_mc(p, x, K, rng, 200000);
      double z = std::abs(q.value - m.value) / m.std_error;
      first_pass += z <= 3;
      worst_rel_sigma = std::max(worst_rel_sigma, m.std_error / m.value);
      // An outlier is re-estimated once on an independent stream with 50 times the samples.
      if (z > 3) {
        Rng again(4243, i, 5);
        const PhiResult big = phi_content_mc(p, x, K, again, 10000000);
        z = std::abs(q.value - big.value) / big.std_error;
      }
      within += z <= 3;
      worst_z = std::max(worst_z, z);
    }
    const bool ok = cells.size() == 20 && within == 20 && worst_rel_sigma < 0.02;
    pass = pass && ok;
    detail += format("(%+d,%g): %d/20 within 3 sigma (%d at first pass), max |z| %.2f, max sigma/value %.4f; ",
                     p.kappa, p.beta, within, first_pass, worst_z, worst_rel_sigma);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// Observations per seed from windows added until the n = 6 sample reaches the target.
std::map<std::uint64_t, std::vector<TypicalCellObservation>> harvest(const ModelParams& p, double side, int n,
                                                                     std::size_t target) {
  const DensityTable table(p);
  DomainOptions o;
  o.inner_side = side;
  const SampleDomain dom = make_domain(p, o);
  std::map<std::uint64_t, std::vector<TypicalCellObservation>> out;
  for (auto seed : kSeeds) {
    auto& obs = out[seed];
    for (int w = 0; w < 10 && phi_with_facets(obs, n).size() < target; ++w) {
      const auto part = collect_typical_cells(tessellate(sample_points(p, dom, seed, w)), table, w);
      obs.insert(obs.end(), part.begin(), part.end());
    }
  }
  return out;
}

std::map<std::uint64_t, std::vector<TypicalCellObservation>>& beta_one_observations() {
  static auto obs = harvest({1, 1, 1, 2}, 100, 6, 1500);
  return obs;
}

std::map<std::uint64_t, std::vector<TypicalCellObservation>>& beta_prime_observations() {
  static auto obs = harvest({-1, 3, 1, 2}, 70, 6, 1500);
  return obs;
}

Result complementary_theorem() {
  std::string detail;
  bool pass = true;
  const std::vector<std::pair<ModelParams, std::map<std::uint64_t, std::vector<TypicalCellObservation>>*>> runs = {
      {{1, 1, 1, 2}, &beta_one_observations()}, {{-1, 3, 1, 2}, &beta_prime_observations()}};
  for (const auto& [p, obs] : runs) {
    std::vector<double> ratio;
    int min_n = 1 << 30;
    for (const auto& [seed, o] : *obs) {
      const GammaTestReport g = ks_gamma_test(o, p, 6);
      ratio.push_back(g.ks_distance / g.critical_value);
      min_n = std::min(min_n, g.sample_size);
    }
    const bool ok = min_n >= 1500 && median(ratio) < 1;
    pass = pass && ok;
    detail += format("(%+d,%g) vs Gamma(%.4f,1): median D/crit %.3f, D/crit per seed", p.kappa, p.beta,
                     gamma_shape_param(6, p), median(ratio));
    for (double r : ratio) detail += format(" %.2f", r);
    detail += format(", N >= %d; ", min_n);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Result independence() {
  std::string detail;
  bool pass = true;
  const std::vector<std::pair<ModelParams, std::map<std::uint64_t, std::vector<TypicalCellObservation>>*>> runs = {
      {{1, 1, 1, 2}, &beta_one_observations()}, {{-1, 3, 1, 2}, &beta_prime_observations()}};
  for (const auto& [p, obs] : runs) {
    std::vector<double> pv, pv_in;
    double control = 0;
    for (const auto& [seed, o] : *obs) {
      Rng rng(seed, 0, 0x1d);
      pv.push_back(independence_test(o, 6, Descriptor::CircumNorm, rng).p_value);
      pv_in.push_back(independence_test(o, 6, Descriptor::InradiusNorm, rng).p_value);
      const std::vector<double> phi = phi_with_facets(o, 6);
      control = std::max(control, independence_test(phi, phi, rng).p_value);
    }
    const bool ok = median(pv) > 0.01 && control < 1e-3;
    pass = pass && ok;
    detail += format("(%+d,%g): median p circumradius %.3f (inradius %.3f, not gated), positive control max p %.1e; ",
                     p.kappa, p.beta, median(pv), median(pv_in), control);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Result height_sandwich() {
  const ModelParams p{1, 0, 1, 2};
  DomainOptions o;
  o.inner_side = 120;
  const SampleDomain dom = make_domain(p, o);
  const std::vector<double> grid = {0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4};
  std::vector<double> within;
  long long top_count = 0;
  for (auto seed : kSeeds) {
    const Tessellation t = tessellate(sample_points(p, dom, seed, 0));
    std::vector<double> h;
    for_certified(t, [&](const CellRecord& c) { h.push_back(t.tri.h[c.site]); });
    const HeightTailReport rep = typical_height_tail(h, dom.inner_box.volume(), p, grid);
    within.push_back(rep.within_count);
    top_count = rep.rows.back().count;
  }
  std::string per;
  for (double w : within) per += format(" %g", w);
  return {median(within) >= 7, format("grid H in [0.25, 4]; points within per seed:%s of 8 (median %g); "
                                      "count at H = 4 in the last seed %lld",
                                      per.c_str(), median(within), top_count)};
}

std::vector<int> certified_degrees(const ModelParams& p, double side, std::size_t target, std::uint64_t seed) {
  DomainOptions o;
  o.inner_side = side;
  const SampleDomain dom = make_domain(p, o);
  std::vector<int> deg;
  for (int w = 0; deg.size() < target && w < 40; ++w) {
    const Tessellation t = tessellate(sample_points(p, dom, seed, w));
    for_certified(t, [&](const CellRecord& c) { deg.push_back(c.n_facets); });
  }
  return deg;
}

std::vector<int>& planar_degrees() {
  static std::vector<int> deg = certified_degrees({1, 0, 1, 2}, 330, 100000, 2001);
  return deg;
}

Result degree_tails() {
  const DegreeTailReport plus = degree_tail_fit(planar_degrees());
  const DegreeTailReport minus = degree_tail_fit(certified_degrees({-1, 3, 1, 2}, 80, 100000, 2002));
  const bool ok_plus = plus.sample_size >= 100000 && plus.a < -0.5;
  const bool ok_minus = minus.sample_size >= 100000 && std::abs(minus.a) < 0.5 && minus.b < 0;
  return {ok_plus && ok_minus,
          format("(+1,0): N %lld, k in [%d, %d], a %.3f +- %.3f; (-1,3): N %lld, k in [%d, %d], a %.3f +- %.3f, "
                 "b %.3f +- %.3f",
                 plus.sample_size, plus.fit_lo, plus.fit_hi, plus.a, plus.se_a, minus.sample_size, minus.fit_lo,
                 minus.fit_hi, minus.a, minus.se_a, minus.b, minus.se_b)};
}

Result max_degree() {
  const ModelParams p{1, 3, 1, 2};
  // Certified vertex density from a pilot window.
  DomainOptions o;
  o.inner_side = 60;
  const Tessellation pilot = tessellate(sample_points(p, make_domain(p, o), 3001, 0));
  long long n = 0;
  for_certified(pilot, [&](const CellRecord&) { ++n; });
  const double lambda = n / (o.inner_side * o.inner_side);
  const std::vector<double> rho = {1e3 / lambda, 1e4 / lambda, 1e5 / lambda};
  const MaxDegreeReport rep = max_degree_experiment(p, rho, 20, 3002);
  std::string detail = format("lambda %.3f; ", lambda);
  for (std::size_t k = 0; k < rep.rho.size(); ++k) {
    std::map<int, int> hist;
    for (int m : rep.maxima[k]) ++hist[m];
    detail += format("%.0f vertices: best pair {%d,%d} mass %.2f, coverage %.3f, hist", rep.expected_vertices[k],
                     rep.top_start[k], rep.top_start[k] + 1, rep.top_mass[k], rep.coverage[k]);
    for (const auto& [m, c] : hist) detail += format(" %d:%d", m, c);
    detail += "; ";
  }
  detail.resize(detail.size() - 2);
  return {rep.top_mass.back() >= 0.6, detail};
}

Result incomplete_gamma_routes() {
  // The continued fraction is meant for x above the switch point a + 1 and the series below it; both are
  // compared over a band around the switch, x / (a + 1) in [1/2, 8]. The larger of P and Q is compared,
  // which both routes resolve without cancellation.
  double worst = 0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const double a = 0.1 * std::pow(200.0, i / 19.0);
      const double x = (a + 1) * 0.5 * std::pow(16.0, j / 19.0);
      const double q_series = gamma_q_series(a, x), q_cf = gamma_q_cf(a, x);
      const double rel = q_cf >= 0.5 ? std::abs(q_series - q_cf) / q_cf
                                     : std::abs((1 - q_cf) - (1 - q_series)) / (1 - q_series);
      worst = std::max(worst, rel);
    }
  int bound_checked = 0, bound_ok = 0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const double a = 0.1 * std::pow(200.0, i / 19.0);
      const double x = 0.01 * std::pow(4000.0, j / 19.0);
      if (a < std::max(x, 1.0)) {
        ++bound_checked;
        bound_ok += incomplete_gamma(a, x) <= std::max(a, 1 / a) * std::exp(-x) * std::pow(x, a - 1);
      }
    }
  return {worst <= 1e-10 && bound_ok == bound_checked,
          format("a in [0.1, 20], x / (a + 1) in [0.5, 8]: max relative route difference %.2e; bound holds at "
                 "%d/%d admissible points of a in [0.1, 20], x in [0.01, 40]",
                 worst, bound_ok, bound_checked)};
}

// Whether every certified cell of t keeps its facet structure and vertices in t2.
bool cells_survive(const Tessellation& t, const Tessellation& t2, int* compared) {
  std::map<int, const CellRecord*> later;
  for (const auto& c : t2.cells) later[c.site] = &c;
  bool ok = true;
  for_certified(t, [&](const CellRecord& c) {
    ++*compared;
    const auto it = later.find(c.site);
    if (it == later.end() || it->second->status != CellStatus::Bounded) {
      ok = false;
      return;
    }
    const CellRecord& d = *it->second;
    std::vector<int> a = c.facet_sites, b = d.facet_sites;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b || c.cell.vertex_count() != d.cell.vertex_count()) {
      ok = false;
      return;
    }
    for (const auto& w : c.cell.vertices) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& w2 : d.cell.vertices) best = std::min(best, (w - w2).norm());
      if (best > 1e-9) ok = false;
    }
  });
  return ok;
}

Result certification_soundness() {
  std::string detail;
  bool pass = true;
  for (const ModelParams& p : {ModelParams{1, 0, 1, 2}, ModelParams{-1, 3, 1, 2}}) {
    DomainOptions o;
    o.inner_side = 5;
    const SampleDomain dom = make_domain(p, o);
    int good = 0, cells = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const Tessellation t = tessellate(sample_points(p, dom, 4001, trial));
      SampleDomain big = t.sample.domain;
      const Vector centre = 0.5 * (big.box.lo + big.box.hi);
      big.box = {centre + 2 * (big.box.lo - centre), centre + 2 * (big.box.hi - centre)};
      if (p.kappa == 1) {
        big.h_max *= 2;
      } else {
        big.eps /= 2;
      }
      const Tessellation t2 = tessellate(extend_domain(t.sample, big));
      good += cells_survive(t, t2, &cells);
    }
    const double rate = good / 200.0;
    pass = pass && rate >= 0.99;
    detail += format("(%+d,%g): %d/200 trials unchanged, %d certified cells compared; ", p.kappa, p.beta, good, cells);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Result planar_mean_degree() {
  const std::vector<int>& deg = planar_degrees();
  double sum = 0;
  for (int k : deg) sum += k;
  const double mean = sum / deg.size();
  return {deg.size() >= 10000 && mean >= 5.8 && mean <= 6.2,
          format("mean certified degree %.4f over %zu vertices (kappa = +1, beta = 0)", mean, deg.size())};
}

}  // namespace

int main() {
  struct Gate {
    int id;
    const char* name;
    bool soft;
    std::function<Result()> run;
  };
  const std::vector<Gate> gates = {
      {1, "hull triangulation equals brute force", false, oracle_equivalence},
      {2, "duality of degree and facet count", false, duality},
      {3, "paraboloid measure anchor and scaling", false, closed_form_anchor},
      {4, "phi quadrature agrees with Monte Carlo", false, phi_agreement},
      {5, "phi given six facets is Gamma distributed", false, complementary_theorem},
      {6, "phi independent of normalized shape", false, independence},
      {7, "typical height between incomplete-gamma bounds", false, height_sandwich},
      {8, "degree tail signatures", false, degree_tails},
      {9, "maximal degree concentrates on two values", true, max_degree},
      {10, "incomplete gamma routes and bound", false, incomplete_gamma_routes},
      {11, "certified cells survive enlargement", false, certification_soundness},
      {12, "planar mean degree", false, planar_mean_degree},
  };
  int hard_failures = 0;
  for (const auto& g : gates) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = g.run();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = r.pass ? "PASS" : (g.soft ? "SOFT-FAIL" : "FAIL");
    std::printf("[%s] %2d %s: %s (%.1f s)\n", tag, g.id, g.name, r.detail.c_str(), secs);
    std::fflush(stdout);
    if (!r.pass && !g.soft) ++hard_failures;
  }
  std::printf("%s: %d hard gate(s) failed\n", hard_failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED",
              hard_failures);
  return hard_failures ? 1 : 0;
}
