#include "betatess/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "betatess/special.hpp"

namespace betatess {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Dot product of two centred vectors.
double centred_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> centred(std::vector<double> x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  for (auto& v : x) v -= m;
  return x;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------------------------------------
// Observations

std::vector<TypicalCellObservation> collect_typical_cells(const Tessellation& t, const DensityTable& table,
                                                          int window_id) {
  std::vector<TypicalCellObservation> out;
  const ModelParams& p = t.sample.params;
  for (const auto& c : t.cells) {
    if (!c.certified || c.status != CellStatus::Bounded) continue;
    if (!t.sample.domain.inner_box.contains(t.tri.v.col(c.site))) continue;
    const WeightedPoint x = t.sample.point(c.site);
    const WeightedPoint o{Vector::Zero(x.v.size()), x.h};
    Polytope K = c.cell;
    for (auto& w : K.vertices) w -= x.v;
    double R = 0;
    for (const auto& w : K.vertices) R = std::max(R, w.norm());
    std::vector<HalfSpace> hs = K.halfspaces;
    for (auto& H : hs) H.t -= H.u.dot(x.v);
    const double scale = std::sqrt(p.kappa * x.h);

    TypicalCellObservation ob;
    ob.seed = t.sample.seed;
    ob.window_id = window_id;
    ob.site = c.site;
    ob.h = x.h;
    ob.n_facets = c.n_facets;
    ob.phi = phi_content(table, o, K).value;
    ob.circum_norm = R / scale;
    ob.inradius_norm = std::max(0.0, chebyshev_center(hs, K.dim, 2 * R + 1, nullptr)) / scale;
    ob.vcount = K.vertex_count();
    ob.certified = true;
    out.push_back(ob);
  }
  return out;
}

std::vector<TypicalCellObservation> collect_typical_cells(const std::vector<Tessellation>& runs,
                                                          const DensityTable& table) {
  std::vector<TypicalCellObservation> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto part = collect_typical_cells(runs[i], table, static_cast<int>(i));
    out.insert(out.end(), part.begin(), part.end());
  }
  sort_observations(out);
  return out;
}

void sort_observations(std::vector<TypicalCellObservation>& obs) {
  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    if (a.window_id != b.window_id) return a.window_id < b.window_id;
    return a.site < b.site;
  });
}

void write_observations_csv(const std::string& path, const std::vector<TypicalCellObservation>& obs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "seed,window_id,h,n_facets,phi,circum_norm,inradius_norm,vcount,certified\n";
  for (const auto& o : obs)
    out << o.seed << ',' << o.window_id << ',' << fmt(o.h) << ',' << o.n_facets << ',' << fmt(o.phi) << ','
        << fmt(o.circum_norm) << ',' << fmt(o.inradius_norm) << ',' << o.vcount << ',' << (o.certified ? 1 : 0)
        << '\n';
}

std::vector<TypicalCellObservation> read_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "seed,window_id,h,n_facets,phi,circum_norm,inradius_norm,vcount,certified")
    throw Error(ErrorCode::IoError, "unexpected observations header in " + path);
  std::vector<TypicalCellObservation> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[9];
    for (int i = 0; i < 9; ++i)
      if (!std::getline(ss, f[i], ',')) throw Error(ErrorCode::IoError, "short observation row");
    TypicalCellObservation o;
    o.seed = std::stoull(f[0]);
    o.window_id = std::stoi(f[1]);
    o.h = std::stod(f[2]);
    o.n_facets = std::stoi(f[3]);
    o.phi = std::stod(f[4]);
    o.circum_norm = std::stod(f[5]);
    o.inradius_norm = std::stod(f[6]);
    o.vcount = std::stoi(f[7]);
    o.certified = f[8] == "1";
    out.push_back(o);
  }
  return out;
}

std::vector<double> phi_with_facets(const std::vector<TypicalCellObservation>& obs, int n) {
  std::vector<double> out;
  for (const auto& o : obs)
    if (o.n_facets == n) out.push_back(o.phi);
  return out;
}

// ---------------------------------------------------------------------------------------------------------
// Distribution tests

double gamma_shape_param(int n, const ModelParams& p) {
  const double kb = p.kappa * p.beta;
  return n + (2 * kb + 2) / (2 * kb + p.d + 2);
}

double kolmogorov_survival(double x) {
  if (x <= 0) return 1;
  if (x < 1) {
    // Dual series: P(K <= x) = sqrt(2 pi) / x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2)).
    double s = 0;
    for (int k = 1; k < 50; ++k) s += std::exp(-(2 * k - 1) * (2 * k - 1) * kPi * kPi / (8 * x * x));
    return 1 - std::sqrt(2 * kPi) / x * s;
  }
  double s = 0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2 : -2) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

double ks_distance(std::vector<double> xs, double (*cdf)(double, double), double param) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(param, xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InsufficientSample, "two-sample KS needs data on both sides");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double ne = std::sqrt(double(a.size()) * b.size() / (a.size() + b.size()));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

double chi_square_homogeneity_p(const std::vector<long long>& counts) {
  if (counts.size() < 2) throw Error(ErrorCode::InsufficientSample, "chi-square needs two windows");
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
  if (!(mean > 0)) return 1;
  double x2 = 0;
  for (long long c : counts) x2 += (c - mean) * (c - mean) / mean;
  return gamma_q(0.5 * (counts.size() - 1), 0.5 * x2);
}

GammaTestReport ks_gamma_test(const std::vector<double>& phi, double shape, int n) {
  if (phi.size() < 300) throw Error(ErrorCode::InsufficientSample, "the Gamma test needs at least 300 values");
  GammaTestReport r;
  r.n = n;
  r.sample_size = static_cast<int>(phi.size());
  r.shape_param = shape;
  r.ks_distance = ks_distance(phi, &gamma_p, shape);
  const double sn = std::sqrt(static_cast<double>(phi.size()));
  r.p_value = kolmogorov_survival(sn * r.ks_distance);
  r.critical_value = 1.63 / sn;
  r.pass = r.ks_distance < r.critical_value;
  // Equal-probability bins under the null, so every count is near N / bins.
  const int bins = 20;
  r.bin_edges.push_back(0);
  for (int k = 1; k < bins; ++k) {
    double lo = 0, hi = shape + 40 * std::sqrt(shape) + 40;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gamma_p(shape, mid) < double(k) / bins ? lo : hi) = mid;
    }
    r.bin_edges.push_back(0.5 * (lo + hi));
  }
  r.bin_edges.push_back(std::max(*std::max_element(phi.begin(), phi.end()), r.bin_edges.back()) * (1 + 1e-12));
  r.counts.assign(bins, 0);
  for (double v : phi) {
    const int k = static_cast<int>(std::upper_bound(r.bin_edges.begin() + 1, r.bin_edges.end() - 1, v) -
                                   (r.bin_edges.begin() + 1));
    ++r.counts[k];
  }
  return r;
}

GammaTestReport ks_gamma_test(const std::vector<TypicalCellObservation>& obs, const ModelParams& p, int n) {
  return ks_gamma_test(phi_with_facets(obs, n), gamma_shape_param(n, p), n);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InsufficientSample, "Spearman needs paired data");
  const auto rx = centred(average_ranks(x)), ry = centred(average_ranks(y));
  const double den = std::sqrt(centred_dot(rx, rx) * centred_dot(ry, ry));
  return den > 0 ? centred_dot(rx, ry) / den : 0.0;
}

IndependenceReport independence_test(const std::vector<double>& x, const std::vector<double>& y, Rng& rng,
                                     int permutations) {
  if (x.size() != y.size()) throw Error(ErrorCode::DegenerateInput, "independence test needs paired data");
  if (x.size() < 300) throw Error(ErrorCode::InsufficientSample, "the independence test needs at least 300 pairs");
  const auto rx = centred(average_ranks(x));
  auto ry = centred(average_ranks(y));
  const double den = std::sqrt(centred_dot(rx, rx) * centred_dot(ry, ry));
  IndependenceReport r;
  r.sample_size = static_cast<int>(x.size());
  r.permutations = permutations;
  r.spearman = den > 0 ? centred_dot(rx, ry) / den : 0.0;
  const double obs = std::abs(centred_dot(rx, ry));
  long long extreme = 0;
  for (int k = 0; k < permutations; ++k) {
    // Fisher-Yates with the owned stream.
    for (std::size_t i = ry.size() - 1; i > 0; --i) std::swap(ry[i], ry[rng() % (i + 1)]);
    extreme += std::abs(centred_dot(rx, ry)) >= obs * (1 - 1e-12);
  }
  r.p_value = (1.0 + extreme) / (1.0 + permutations);
  return r;
}

Descriptor descriptor_from_string(const std::string& s) {
  if (s == "circum_norm") return Descriptor::CircumNorm;
  if (s == "inradius_norm") return Descriptor::InradiusNorm;
  throw Error(ErrorCode::ConfigError, "unknown descriptor '" + s + "' (expected circum_norm or inradius_norm)");
}

std::string to_string(Descriptor d) { return d == Descriptor::CircumNorm ? "circum_norm" : "inradius_norm"; }

IndependenceReport independence_test(const std::vector<TypicalCellObservation>& obs, int n, Descriptor desc,
                                     Rng& rng, int permutations) {
  std::vector<double> x, y;
  for (const auto& o : obs) {
    if (o.n_facets != n) continue;
    x.push_back(o.phi);
    y.push_back(desc == Descriptor::CircumNorm ? o.circum_norm : o.inradius_norm);
  }
  return independence_test(x, y, rng, permutations);
}

// ---------------------------------------------------------------------------------------------------------
// Typical height

std::pair<double, double> wilson_interval(long long k, long long n, double z) {
  if (n <= 0) return {0, 1};
  const double p = double(k) / n, z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

HeightTailReport typical_height_tail(const std::vector<double>& heights, double volume, const ModelParams& p,
                                     const std::vector<double>& H_grid) {
  p.validate();
  if (!(volume > 0)) throw Error(ErrorCode::DegenerateInput, "window volume must be positive");
  HeightTailReport r;
  const long long N = static_cast<long long>(heights.size());
  const double z = 1.959963984540054;
  r.lambda = N / volume;
  r.lambda_lo = std::max(0.0, N - z * std::sqrt(double(N))) / volume;
  r.lambda_hi = (N + z * std::sqrt(double(N))) / volume;
  const double e = p.exponent();
  r.a = (p.kappa * p.beta + 1) / e;
  r.c = added_vertex_constant(p);
  const double two_d = std::pow(2.0, p.d);
  const double gc = p.gamma * normalizing_constant(p) / std::abs(e);
  for (double H : H_grid) {
    if (!(p.kappa * H >= 0)) throw Error(ErrorCode::WrongSign, "height grid needs kappa*H >= 0");
    if (p.kappa == -1 && H == 0) throw Error(ErrorCode::WrongSign, "the beta' tail needs H < 0");
    HeightTailRow row;
    row.H = H;
    row.count = std::count_if(heights.begin(), heights.end(), [&](double h) { return h >= H; });
    row.survival = N > 0 ? double(row.count) / N : 0;
    std::tie(row.ci_lo, row.ci_hi) = wilson_interval(row.count, N);
    const double s = std::pow(p.kappa * H, e);
    if (r.lambda_hi > 0)
      row.lower_bound = gc / r.lambda_hi / std::pow(two_d * r.c, r.a) * incomplete_gamma(r.a, two_d * r.c * s);
    row.upper_bound = r.lambda_lo > 0 ? gc / r.lambda_lo * two_d / std::pow(r.c, r.a) * incomplete_gamma(r.a, r.c * s)
                                      : std::numeric_limits<double>::infinity();
    row.lower_bound = std::min(row.lower_bound, 1.0);
    row.upper_bound = std::min(row.upper_bound, 1.0);
    row.within = row.ci_hi >= row.lower_bound && row.ci_lo <= row.upper_bound;
    r.within_count += row.within;
    r.rows.push_back(row);
  }
  return r;
}

// ---------------------------------------------------------------------------------------------------------
// Degrees

DegreeTailReport degree_tail_fit(const std::vector<int>& degrees, long long min_tail, long long min_sample) {
  if (static_cast<long long>(degrees.size()) < min_sample)
    throw Error(ErrorCode::InsufficientSample, "degree tail fit needs at least " + std::to_string(min_sample) +
                                                   " degrees");
  DegreeTailReport r;
  r.sample_size = static_cast<long long>(degrees.size());
  const auto [lo, hi] = std::minmax_element(degrees.begin(), degrees.end());
  r.k_min = *lo;
  r.counts.assign(*hi - *lo + 1, 0);
  for (int k : degrees) ++r.counts[k - r.k_min];
  const double N = static_cast<double>(r.sample_size);
  long long tail = r.sample_size;
  std::vector<double> ks, logs, ws;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    const double S = tail / N;
    r.survival.push_back(S);
    if (S < 1 && tail >= min_tail) {
      ks.push_back(r.k_min + static_cast<double>(i));
      logs.push_back(std::log(S));
      // Var log S ~ (1 - S) / (N S).
      ws.push_back(N * S / (1 - S));
    }
    tail -= r.counts[i];
  }
  if (ks.size() < 3) throw Error(ErrorCode::InsufficientSample, "degree tail fit needs three supported degrees");
  Eigen::MatrixXd X(ks.size(), 3);
  Eigen::VectorXd y(ks.size()), w(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    X(i, 0) = ks[i] * std::log(ks[i]);
    X(i, 1) = ks[i];
    X(i, 2) = 1;
    y[i] = logs[i];
    w[i] = ws[i];
  }
  const Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
  const Eigen::VectorXd coef = A.ldlt().solve(X.transpose() * w.asDiagonal() * y);
  const Eigen::MatrixXd cov = A.inverse();
  r.a = coef[0];
  r.b = coef[1];
  r.c = coef[2];
  r.se_a = std::sqrt(cov(0, 0));
  r.se_b = std::sqrt(cov(1, 1));
  r.fit_lo = static_cast<int>(ks.front());
  r.fit_hi = static_cast<int>(ks.back());
  return r;
}

double best_window_mass(const std::vector<int>& values, int w, int* start) {
  if (values.empty()) return 0;
  std::map<int, int> hist;
  for (int v : values) ++hist[v];
  double best = -1;
  int best_start = values.front();
  for (const auto& [v, cnt] : hist) {
    (void)cnt;
    int mass = 0;
    for (int k = 0; k < w; ++k) {
      auto it = hist.find(v + k);
      if (it != hist.end()) mass += it->second;
    }
    if (mass > best) {
      best = mass;
      best_start = v;
    }
  }
  if (start) *start = best_start;
  return best / values.size();
}

MaxDegreeReport max_degree_experiment(const ModelParams& p, const std::vector<double>& rho, int reps,
                                      std::uint64_t seed, const DomainOptions& base) {
  p.validate();
  if (p.kappa != 1) throw Error(ErrorCode::ConfigError, "the maximal-degree experiment is defined for kappa = +1");
  if (rho.empty() || reps < 1) throw Error(ErrorCode::ConfigError, "max-degree needs windows and replicates");
  std::vector<double> sorted = rho;
  std::sort(sorted.begin(), sorted.end());
  MaxDegreeReport r;
  r.rho = sorted;
  r.maxima.assign(sorted.size(), {});
  r.expected_vertices.assign(sorted.size(), 0);
  r.coverage.assign(sorted.size(), 0);
  std::vector<long long> certified(sorted.size(), 0), total(sorted.size(), 0);
  DomainOptions o = base;
  o.inner_side = std::pow(sorted.back(), 1.0 / p.d);
  const SampleDomain dom = make_domain(p, o);
  for (int rep = 0; rep < reps; ++rep) {
    const Tessellation t = tessellate(sample_points(p, dom, seed, rep));
    std::vector<int> best(sorted.size(), 0);
    for (const auto& c : t.cells) {
      if (c.status != CellStatus::Bounded) continue;
      const Vector v = t.tri.v.col(c.site);
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double side = std::pow(sorted[k], 1.0 / p.d);
        if ((v.array() < 0).any() || (v.array() > side).any()) continue;
        ++total[k];
        if (!c.certified) continue;
        ++certified[k];
        best[k] = std::max(best[k], c.n_facets);
      }
    }
    for (std::size_t k = 0; k < sorted.size(); ++k) r.maxima[k].push_back(best[k]);
  }
  const int w = (p.d + 1) / 2 + 1;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    r.expected_vertices[k] = double(total[k]) / reps;
    r.coverage[k] = total[k] > 0 ? double(certified[k]) / total[k] : 0;
    int start = 0;
    r.top_mass.push_back(best_window_mass(r.maxima[k], w, &start));
    r.top_start.push_back(start);
  }
  return r;
}

}  // namespace betatess
