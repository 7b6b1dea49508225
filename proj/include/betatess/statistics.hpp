#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "betatess/flower_phi.hpp"
#include "betatess/point_process.hpp"
#include "betatess/rng.hpp"
#include "betatess/tessellation.hpp"

namespace betatess {

struct TypicalCellObservation {
  std::uint64_t seed = 0;
  int window_id = 0;
  int site = -1;
  double h = 0;
  int n_facets = 0;
  double phi = 0;
  // Farthest vertex from the nucleus and Chebyshev radius, both over sqrt(kappa h).
  double circum_norm = 0;
  double inradius_norm = 0;
  int vcount = 0;
  bool certified = false;
};

// One observation per certified bounded cell with nucleus in the inner box, in site order.
std::vector<TypicalCellObservation> collect_typical_cells(const Tessellation& t, const DensityTable& table,
                                                          int window_id = 0);
// Runs are numbered as windows; the result is sorted by (seed, window_id, site).
std::vector<TypicalCellObservation> collect_typical_cells(const std::vector<Tessellation>& runs,
                                                          const DensityTable& table);

void sort_observations(std::vector<TypicalCellObservation>& obs);
// Rows are written in the given order; the site index is not part of the file.
void write_observations_csv(const std::string& path, const std::vector<TypicalCellObservation>& obs);
std::vector<TypicalCellObservation> read_observations_csv(const std::string& path);

// Phi values of the observations with exactly n facets.
std::vector<double> phi_with_facets(const std::vector<TypicalCellObservation>& obs, int n);

// n + (2 kappa beta + 2) / (2 kappa beta + d + 2).
double gamma_shape_param(int n, const ModelParams& p);

// Limiting Kolmogorov survival P(sup |B| > x) of the Brownian bridge.
double kolmogorov_survival(double x);

// One-sample KS distance sup |F_n - F|.
double ks_distance(std::vector<double> xs, double (*cdf)(double, double), double param);

struct TwoSampleKs {
  double distance = 0;
  double p_value = 1;
};
TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b);

// Chi-square test that counts over equal-volume windows share one mean.
double chi_square_homogeneity_p(const std::vector<long long>& counts);

struct GammaTestReport {
  int n = 0;
  int sample_size = 0;
  double shape_param = 0;
  double ks_distance = 0;
  double p_value = 1;
  // 1.63 / sqrt(N), the asymptotic 1% critical value.
  double critical_value = 0;
  bool pass = false;
  std::vector<double> bin_edges;
  std::vector<int> counts;
};

// KS test of phi against Gamma(shape, 1). Throws InsufficientSample below 300 values.
GammaTestReport ks_gamma_test(const std::vector<double>& phi, double shape, int n = 0);
GammaTestReport ks_gamma_test(const std::vector<TypicalCellObservation>& obs, const ModelParams& p, int n);

struct IndependenceReport {
  int sample_size = 0;
  double spearman = 0;
  double p_value = 1;
  int permutations = 0;
};

// Spearman rank correlation with a two-sided permutation p-value. Throws InsufficientSample below 300 pairs.
IndependenceReport independence_test(const std::vector<double>& x, const std::vector<double>& y, Rng& rng,
                                     int permutations = 10000);

enum class Descriptor { CircumNorm, InradiusNorm };
Descriptor descriptor_from_string(const std::string& s);
std::string to_string(Descriptor d);

IndependenceReport independence_test(const std::vector<TypicalCellObservation>& obs, int n, Descriptor desc,
                                     Rng& rng, int permutations = 10000);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Wilson score interval for k successes in n trials.
std::pair<double, double> wilson_interval(long long k, long long n, double z = 1.959963984540054);

struct HeightTailRow {
  double H = 0;
  long long count = 0;
  double survival = 0;
  double ci_lo = 0, ci_hi = 0;
  double lower_bound = 0, upper_bound = 0;
  bool within = false;
};

struct HeightTailReport {
  // Vertex density estimate and its interval.
  double lambda = 0, lambda_lo = 0, lambda_hi = 0;
  double a = 0;
  double c = 0;
  std::vector<HeightTailRow> rows;
  int within_count = 0;
};

// Empirical P(h >= H) of the typical height against the incomplete-gamma sandwich, with the vertex density
// estimated as vertices / volume. Bounds use the density interval so that each is as wide as the data allow.
HeightTailReport typical_height_tail(const std::vector<double>& heights, double volume, const ModelParams& p,
                                     const std::vector<double>& H_grid);

struct DegreeTailReport {
  long long sample_size = 0;
  int k_min = 0;
  // counts[k - k_min] is the number of degrees equal to k; survival likewise for P(deg >= k).
  std::vector<long long> counts;
  std::vector<double> survival;
  // log P(deg >= k) ~ a k log k + b k + c over the fitted range [fit_lo, fit_hi].
  double a = 0, b = 0, c = 0;
  double se_a = 0, se_b = 0;
  int fit_lo = 0, fit_hi = 0;
};

// Weighted least squares with binomial variances over the degrees with at least min_tail values at or above.
// Throws InsufficientSample below min_sample degrees or with fewer than three fitted points.
DegreeTailReport degree_tail_fit(const std::vector<int>& degrees, long long min_tail = 10,
                                 long long min_sample = 10000);

struct MaxDegreeReport {
  std::vector<double> rho;
  // maxima[r][rep]: largest certified degree in the window of volume rho[r].
  std::vector<std::vector<int>> maxima;
  std::vector<double> expected_vertices;
  std::vector<double> coverage;
  // Best mass of ceil(d/2)+1 consecutive values per rho.
  std::vector<double> top_mass;
  std::vector<int> top_start;
};

// Nested windows [0, rho^(1/d)]^d inside one realization per replicate.
MaxDegreeReport max_degree_experiment(const ModelParams& p, const std::vector<double>& rho, int reps,
                                      std::uint64_t seed, const DomainOptions& base = {});

// Mass of the best run of w consecutive integers in the sample; start receives its first value.
double best_window_mass(const std::vector<int>& values, int w, int* start = nullptr);

}  // namespace betatess
