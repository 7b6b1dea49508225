#include "betatess/point_process.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "betatess/special.hpp"

namespace betatess {
namespace {

constexpr double kPi = 3.14159265358979323846;

// c_{k,beta} or c'_{k,beta} for ambient dimension k.
double constant_in_dim(const ModelParams& p, double k) {
  if (p.kappa == 1)
    return std::exp(std::lgamma(k / 2 + p.beta + 1) - std::lgamma(p.beta + 1) - k / 2 * std::log(kPi));
  return std::exp(std::lgamma(p.beta) - std::lgamma(p.beta - k / 2) - k / 2 * std::log(kPi));
}

struct Tier {
  Box outer;
  const Box* hole = nullptr;
  // Height range: kappa = +1 uses h in [a, b]; kappa = -1 uses s = -h in [a, b), b possibly infinite.
  double a = 0, b = 0;
};

double tier_height_mass(const ModelParams& p, double a, double b) {
  const double gc = p.gamma * normalizing_constant(p);
  if (p.kappa == 1) return gc * (std::pow(b, p.beta + 1) - std::pow(a, p.beta + 1)) / (p.beta + 1);
  const double tail = std::isinf(b) ? 0.0 : std::pow(b, 1 - p.beta);
  return gc * (std::pow(a, 1 - p.beta) - tail) / (p.beta - 1);
}

double draw_height(const ModelParams& p, double a, double b, Rng& rng) {
  const double u = rng.uniform();
  if (p.kappa == 1) {
    if (a == 0) return b * std::pow(u, 1 / (p.beta + 1));
    const double ea = std::pow(a, p.beta + 1), eb = std::pow(b, p.beta + 1);
    return std::pow(ea + u * (eb - ea), 1 / (p.beta + 1));
  }
  if (std::isinf(b)) return -a * std::pow(u, -1 / (p.beta - 1));
  const double ea = std::pow(a, 1 - p.beta), eb = std::pow(b, 1 - p.beta);
  return -std::pow(eb + u * (ea - eb), 1 / (1 - p.beta));
}

// Appends a Poisson layer of the tier; points falling in skip (if given) are dropped.
void sample_tier(const ModelParams& p, const Tier& tier, Rng& rng, const SampleDomain* skip,
                 std::vector<double>& vs, std::vector<double>& hs) {
  const double mass = tier_height_mass(p, tier.a, tier.b) * tier.outer.volume();
  if (!(mass > 0)) return;
  std::poisson_distribution<long long> count(mass);
  const long long n = count(rng);
  const int d = tier.outer.dim();
  Vector x(d);
  for (long long i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(tier.outer.lo[k], tier.outer.hi[k]);
    const double h = draw_height(p, tier.a, tier.b, rng);
    if (tier.hole && tier.hole->contains(x)) continue;
    if (skip && skip->contains(p.kappa, x, h)) continue;
    vs.insert(vs.end(), x.data(), x.data() + d);
    hs.push_back(h);
  }
}

std::vector<Tier> tiers_of(const ModelParams& p, const SampleDomain& dom) {
  std::vector<Tier> out;
  if (p.kappa == 1) {
    out.push_back({dom.box, nullptr, 0.0, dom.h_max});
  } else {
    out.push_back({dom.box, nullptr, dom.eps, std::numeric_limits<double>::infinity()});
    if (dom.has_far_tier())
      out.push_back({dom.far_box, &dom.box, dom.far_depth, std::numeric_limits<double>::infinity()});
  }
  return out;
}

void append(PointSample& s, const std::vector<double>& vs, const std::vector<double>& hs) {
  const int d = s.params.d;
  const int old_n = s.size();
  const int add = static_cast<int>(hs.size());
  Eigen::MatrixXd v(d, old_n + add);
  Eigen::VectorXd h(old_n + add);
  if (old_n > 0) {
    v.leftCols(old_n) = s.v;
    h.head(old_n) = s.h;
  }
  for (int i = 0; i < add; ++i) {
    for (int k = 0; k < d; ++k) v(k, old_n + i) = vs[static_cast<std::size_t>(i) * d + k];
    h[old_n + i] = hs[i];
  }
  s.v = std::move(v);
  s.h = std::move(h);
}

void check_domain(const ModelParams& p, const SampleDomain& dom) {
  if (dom.box.dim() != p.d || dom.inner_box.dim() != p.d)
    throw Error(ErrorCode::InadmissibleParams, "domain dimension differs from d");
  if (p.kappa == 1 && !(dom.h_max > 0)) throw Error(ErrorCode::InadmissibleParams, "h_max must be positive");
  if (p.kappa == -1 && !(dom.eps > 0)) throw Error(ErrorCode::InadmissibleParams, "eps must be positive");
}

}  // namespace

double sphere_area(int d) { return 2 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0); }

void ModelParams::validate() const {
  std::ostringstream msg;
  if (kappa != 1 && kappa != -1) {
    msg << "kappa must be +1 or -1, got " << kappa;
    throw Error(ErrorCode::InadmissibleParams, msg.str());
  }
  if (d < 2 || d > 4) {
    msg << "dimension d must satisfy 2 <= d <= 4, got " << d;
    throw Error(ErrorCode::InadmissibleParams, msg.str());
  }
  if (!(gamma > 0)) {
    msg << "intensity gamma must be positive, got " << gamma;
    throw Error(ErrorCode::InadmissibleParams, msg.str());
  }
  if (kappa == 1 && !(beta > -1)) {
    msg << "the beta model requires beta > -1, got beta = " << beta;
    throw Error(ErrorCode::InadmissibleParams, msg.str());
  }
  if (kappa == -1 && !(beta > d / 2.0 + 1)) {
    msg << "the beta' model requires beta > d/2 + 1 = " << d / 2.0 + 1 << ", got beta = " << beta;
    throw Error(ErrorCode::InadmissibleParams, msg.str());
  }
}

double normalizing_constant(const ModelParams& p) {
  p.validate();
  return constant_in_dim(p, p.d + 1);
}

double normalizing_constant_d(const ModelParams& p) {
  p.validate();
  return constant_in_dim(p, p.d);
}

double paraboloid_measure(const ModelParams& p, double h) {
  if (!(p.kappa * h > 0)) throw Error(ErrorCode::WrongSign, "paraboloid apex needs kappa*h > 0");
  const double e = p.exponent();
  return p.gamma * normalizing_constant(p) / normalizing_constant_d(p) * std::pow(p.kappa * h, e) / std::abs(e);
}

double added_vertex_constant(const ModelParams& p) {
  return std::pow(2.0, -p.d) * paraboloid_measure(p, static_cast<double>(p.kappa));
}

double typical_height(const ModelParams& p) {
  const double mu1 = paraboloid_measure(p, static_cast<double>(p.kappa));
  return p.kappa * std::pow(mu1, -1 / p.exponent());
}

Box Box::cube(int d, double lo, double hi) { return {Vector::Constant(d, lo), Vector::Constant(d, hi)}; }

double Box::volume() const { return (hi - lo).prod(); }

bool Box::contains(const Vector& v) const {
  return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
}

Box Box::expanded(double margin) const {
  return {lo.array() - margin, hi.array() + margin};
}

double Box::inner_distance(const Vector& v) const {
  return std::min((v - lo).minCoeff(), (hi - v).minCoeff());
}

bool SampleDomain::contains(int kappa, const Vector& v, double h) const {
  if (kappa == 1) return box.contains(v) && h >= 0 && h <= h_max;
  if (box.contains(v) && h <= -eps) return true;
  return has_far_tier() && far_box.contains(v) && h <= -far_depth;
}

double expected_count(const ModelParams& p, const SampleDomain& dom) {
  double total = 0;
  for (const Tier& t : tiers_of(p, dom)) {
    double vol = t.outer.volume();
    if (t.hole) vol -= t.hole->volume();
    total += tier_height_mass(p, t.a, t.b) * vol;
  }
  return total;
}

PointSample sample_beta(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed, std::uint64_t replicate) {
  p.validate();
  if (p.kappa != 1) throw Error(ErrorCode::InadmissibleParams, "sample_beta needs kappa = +1");
  return sample_points(p, dom, seed, replicate);
}

PointSample sample_beta_prime(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed,
                              std::uint64_t replicate) {
  p.validate();
  if (p.kappa != -1) throw Error(ErrorCode::InadmissibleParams, "sample_beta_prime needs kappa = -1");
  return sample_points(p, dom, seed, replicate);
}

PointSample sample_points(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed,
                          std::uint64_t replicate) {
  p.validate();
  check_domain(p, dom);
  PointSample s;
  s.params = p;
  s.domain = dom;
  s.seed = seed;
  s.replicate = replicate;
  s.v.resize(p.d, 0);
  Rng rng(seed, replicate, 0);
  std::vector<double> vs, hs;
  for (const Tier& t : tiers_of(p, dom)) sample_tier(p, t, rng, nullptr, vs, hs);
  append(s, vs, hs);
  s.layers = 1;
  return s;
}

PointSample refine_eps(const PointSample& s, double eps_new) {
  if (s.params.kappa != -1) throw Error(ErrorCode::InadmissibleParams, "refine_eps needs kappa = -1");
  const double eps_old = s.domain.eps;
  if (!(eps_new > 0) || eps_new > eps_old)
    throw Error(ErrorCode::EpsNotDecreasing, "refine_eps requires 0 < eps_new <= eps_old");
  PointSample out = s;
  Rng rng(s.seed, s.replicate, s.layers);
  std::vector<double> vs, hs;
  if (eps_new < eps_old) sample_tier(s.params, {s.domain.box, nullptr, eps_new, eps_old}, rng, nullptr, vs, hs);
  append(out, vs, hs);
  out.domain.eps = eps_new;
  out.layer_history.emplace_back(eps_old, eps_new);
  out.layers = s.layers + 1;
  return out;
}

PointSample extend_domain(const PointSample& s, const SampleDomain& new_dom) {
  check_domain(s.params, new_dom);
  PointSample out = s;
  Rng rng(s.seed, s.replicate, s.layers);
  std::vector<double> vs, hs;
  for (const Tier& t : tiers_of(s.params, new_dom)) sample_tier(s.params, t, rng, &s.domain, vs, hs);
  append(out, vs, hs);
  if (s.params.kappa == -1 && new_dom.eps < s.domain.eps)
    out.layer_history.emplace_back(s.domain.eps, new_dom.eps);
  out.domain = new_dom;
  out.layers = s.layers + 1;
  return out;
}

double tail_risk_density(const ModelParams& p, double cutoff) {
  const double e = p.exponent();
  const double c = added_vertex_constant(p);
  const double gc = p.gamma * normalizing_constant(p);
  const double a = (p.kappa * p.beta + 1) / e;
  const double x = c * std::pow(cutoff, e);
  // Substituting y = c * (kappa h)^e turns the integral into an upper incomplete gamma.
  return std::pow(2.0, p.d) * gc * incomplete_gamma(a, x) / (std::abs(e) * std::pow(c, a));
}

double tail_risk(const ModelParams& p, const SampleDomain& dom) {
  const double cutoff = p.kappa == 1 ? dom.h_max : dom.eps;
  return tail_risk_density(p, cutoff) * dom.inner_box.volume();
}

double height_cutoff_for_risk(const ModelParams& p, double budget) {
  // The risk is monotone in the cutoff: decreasing in h_max, increasing in eps.
  double lo = std::log(1e-6), hi = std::log(1e6);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double r = tail_risk_density(p, std::exp(mid));
    const bool ok = r <= budget;
    if (p.kappa == 1)
      (ok ? hi : lo) = mid;
    else
      (ok ? lo : hi) = mid;
  }
  return std::exp(p.kappa == 1 ? hi : lo);
}

double leak_bound(const ModelParams& p, double rho) {
  const double gc = p.gamma * normalizing_constant(p);
  const double q = 2 * p.beta - p.d - 2;
  return gc * sphere_area(p.d) * std::pow(rho, -q) / ((p.beta - 1) * q);
}

double default_padding(const ModelParams& p) { return 4 * std::sqrt(std::abs(typical_height(p))); }

double default_eps(const ModelParams& p) { return std::abs(typical_height(p)) / 8; }

SampleDomain make_domain(const ModelParams& p, const DomainOptions& opt) {
  p.validate();
  SampleDomain dom;
  dom.inner_box = Box::cube(p.d, 0, opt.inner_side);
  double pad = opt.padding >= 0 ? opt.padding : default_padding(p);
  if (p.kappa == 1) {
    dom.h_max = opt.h_max > 0 ? opt.h_max : height_cutoff_for_risk(p, opt.risk_budget);
    dom.box = dom.inner_box.expanded(pad);
    dom.far_box = dom.box;
    return dom;
  }
  dom.eps = opt.eps > 0 ? opt.eps : default_eps(p);
  dom.far_depth = opt.far_depth >= 0 ? opt.far_depth : 25 * std::abs(typical_height(p));
  if (opt.padding < 0 && dom.far_depth > 0) pad += std::sqrt(dom.far_depth);
  dom.box = dom.inner_box.expanded(pad);
  double far_pad = opt.far_padding;
  if (far_pad < 0) {
    // Distance at which the leak of a cell with 64 vertices drops below the budget.
    const double q = 2 * p.beta - p.d - 2;
    const double k = leak_bound(p, 1.0);
    far_pad = std::min(1e4, std::pow(64 * k / opt.leak_budget, 1 / q));
  }
  dom.far_box = dom.far_depth > 0 ? dom.box.expanded(far_pad) : dom.box;
  return dom;
}

}  // namespace betatess
