#include "betatess/flower_phi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "betatess/quadrature.hpp"

namespace betatess {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kQuadTol = 1e-12;

double safe_log(double x) { return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

// log of r^2 - 2 r s + 1 for r >= 0, s <= 1/2; the value is at least 3/4.
double log_outer_quadratic(double r, double s) {
  if (r > 1e100) return 2 * std::log(r);
  return std::log(r * r - 2 * r * s + 1);
}

void check_quadrature(const QuadratureResult& r, double tol = 1e-6) {
  if (!(r.error <= tol * std::abs(r.value)) || !std::isfinite(r.value))
    throw Error(ErrorCode::QuadratureFailure, "radial quadrature did not converge");
}

// int r^p Q(r)^q dr over {r > 0 : kappa Q > 0} at reference height kappa, where
// Q = 1 + 2 r s - r^2 (kappa = +1) or r^2 - 2 r s + 1 (kappa = -1, s < 1).
double radial_integral(int kappa, double s, double p, double q) {
  if (kappa == 1) {
    // Roots R and -1/R; with r = R x the integrand is R^(p+q+1) x^p (1-x)^q (R x + 1/R)^q.
    const double qq = std::hypot(s, 1.0);
    const double R = s >= 0 ? s + qq : 1 / (qq - s);
    const double R2 = 1 / R;
    const QuadratureResult r = tanh_sinh_unit(
        [&](double x, double xc) {
          return std::exp(p * safe_log(x) + q * (safe_log(xc) + std::log(R * x + R2)));
        },
        kQuadTol);
    check_quadrature(r);
    return std::exp((p + q + 1) * std::log(R)) * r.value;
  }
  if (!(s < 1)) throw Error(ErrorCode::OutOfDomain, "the beta' density needs t < 1");
  if (s <= 0.5) {
    const QuadratureResult r = tanh_sinh_infinite(
        [&](double y, double) { return std::exp(p * safe_log(y) + q * log_outer_quadratic(y, s)); }, 0.0, kQuadTol);
    check_quadrature(r);
    return r.value;
  }
  // Near s = 1 the integrand peaks at r = s with width delta = sqrt(1 - s^2). With r = s + delta y,
  // Q = delta^2 (1 + y^2), and the range y >= -s/delta is split at y = 0.
  const double delta = std::sqrt((1 - s) * (1 + s));
  const double a = s / delta;
  const QuadratureResult left = tanh_sinh_unit(
      [&](double x, double xc) {
        const double y = a * xc;
        return a * std::exp(p * std::log(a * x) + q * std::log1p(y * y));
      },
      kQuadTol);
  const QuadratureResult right = tanh_sinh_infinite(
      [&](double y, double) {
        const double lq = y > 1e100 ? 2 * std::log(y) : std::log1p(y * y);
        return std::exp(p * std::log(y + a) + q * lq);
      },
      0.0, kQuadTol);
  check_quadrature(left);
  check_quadrature(right);
  return std::exp((p + 2 * q + 1) * std::log(delta)) * (left.value + right.value);
}

double scale_of(const ModelParams& p) { return p.gamma * normalizing_constant(p); }

struct Frame {
  double lambda;  // sqrt(kappa h)
  double factor;  // lambda^(homogeneity)
};

Frame frame_of(const ModelParams& p, double h) {
  if (!(p.kappa * h > 0)) throw Error(ErrorCode::WrongSign, "the nucleus needs kappa*h > 0");
  const double lambda = std::sqrt(p.kappa * h);
  return {lambda, std::pow(lambda, p.homogeneity())};
}

double cumulative_checked(const DensityTable& table, double t) {
  if (table.params().kappa == -1 && !(t < 1))
    throw Error(ErrorCode::WrongSign, "the flower reaches height 0 and has infinite measure");
  return table.cumulative(t);
}

std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double beta_variate(Rng& rng, double a, double b, double* complement) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  if (complement) *complement = y / (x + y);
  return x / (x + y);
}

Vector random_direction(Rng& rng, int d) {
  std::normal_distribution<double> n;
  Vector u(d);
  do {
    for (int k = 0; k < d; ++k) u[k] = n(rng);
  } while (u.squaredNorm() == 0);
  return u.normalized();
}

// Top of the flower above y (nucleus at the origin): max over w in K of h + |w|^2 - |y - w|^2.
double flower_ceiling(double h, const Vector& y, const std::function<double(const Vector&)>& support) {
  const double ny = y.norm();
  if (ny == 0) return h;
  return h - ny * ny + 2 * ny * support(y / ny);
}

// One draw of the model measure restricted to the paraboloid {h' <= A - |y|^2}: squared radius and height.
void draw_in_paraboloid(const ModelParams& p, double A, int d, Rng& rng, double* r2, double* hp) {
  if (p.kappa == 1) {
    // |y|^2 / A ~ Beta(d/2, beta+2); given y, h' has density ~ h'^beta on [0, A - |y|^2].
    double yc;
    const double Y = beta_variate(rng, 0.5 * d, p.beta + 2, &yc);
    *r2 = A * Y;
    *hp = A * yc * std::pow(rng.uniform(), 1 / (p.beta + 1));
  } else {
    // |y|^2 / |A| is beta-prime(d/2, beta-1-d/2); given y, -h' is Pareto above |A| + |y|^2.
    std::gamma_distribution<double> ga(0.5 * d, 1.0), gb(p.beta - 1 - 0.5 * d, 1.0);
    const double X = ga(rng), Z = gb(rng);
    *r2 = -A * X / Z;
    *hp = -(*r2 - A) * std::pow(rng.uniform(), -1 / (p.beta - 1));
  }
}

}  // namespace

double mu_paraboloid(const ModelParams& p, const WeightedPoint& apex) { return paraboloid_measure(p, apex.h); }

double phi_point(const ModelParams& p, const WeightedPoint& x, const Vector& w) {
  return paraboloid_measure(p, power_value(x, w));
}

double density_m(const ModelParams& p, double t) {
  p.validate();
  return 2 * scale_of(p) * radial_integral(p.kappa, t, p.d, p.kappa * p.beta);
}

double cumulative_m(const ModelParams& p, double t) {
  p.validate();
  const double q = p.kappa * p.beta + 1;
  return scale_of(p) / std::abs(q) * radial_integral(p.kappa, t, p.d - 1, q);
}

// ---------------------------------------------------------------------------------------------------------
// DensityTable

DensityTable::DensityTable(const ModelParams& p, double step, bool) : p_(p), step_(step) {
  p_.validate();
  if (!(step > 0)) throw Error(ErrorCode::ConfigError, "table step must be positive");
  if (p_.kappa == 1) {
    z_lo_ = -12;
    z_hi_ = 12;
  } else {
    // Past z = 20 the rounding of t itself dominates, 1 - t is below 2e-9.
    z_lo_ = -12;
    z_hi_ = 20;
  }
}

DensityTable::DensityTable(const ModelParams& p, double step) : DensityTable(p, step, true) {
  const int n = static_cast<int>(std::llround((z_hi_ - z_lo_) / step_)) + 1;
  t_.resize(n);
  m_.resize(n);
  cum_.resize(n);
  for (int i = 0; i < n; ++i) {
    t_[i] = t_of(z_lo_ + i * step_);
    m_[i] = density_m(p_, t_[i]);
    cum_[i] = cumulative_m(p_, t_[i]);
  }
  finish();
  for (int i = 0; i + 1 < n; i += 7) {
    const double t = t_of(z_lo_ + (i + 0.5) * step_);
    err_ = std::max(err_, std::abs(cumulative(t) / cumulative_m(p_, t) - 1));
  }
}

void DensityTable::finish() {
  const int n = static_cast<int>(t_.size());
  log_cum_.resize(n);
  dlog_cum_.resize(n);
  log_m_.resize(n);
  for (int i = 0; i < n; ++i) {
    log_cum_[i] = std::log(cum_[i]);
    log_m_[i] = std::log(m_[i]);
    dlog_cum_[i] = m_[i] / cum_[i] * dt_dz(z_lo_ + i * step_);
  }
}

double DensityTable::t_of(double z) const { return p_.kappa == 1 ? std::sinh(z) : -std::expm1(-z); }

double DensityTable::z_of(double t) const { return p_.kappa == 1 ? std::asinh(t) : -std::log1p(-t); }

double DensityTable::dt_dz(double z) const { return p_.kappa == 1 ? std::cosh(z) : std::exp(-z); }

double DensityTable::cumulative(double t) const {
  if (p_.kappa == -1 && !(t < 1)) throw Error(ErrorCode::OutOfDomain, "the beta' density needs t < 1");
  const double z = z_of(t);
  if (!(z >= z_lo_ && z < z_hi_)) return cumulative_m(p_, t);
  const double pos = (z - z_lo_) / step_;
  const int i = std::min(static_cast<int>(pos), static_cast<int>(t_.size()) - 2);
  const double u = pos - i;
  // Cubic Hermite on log cumulative with exact slopes from m.
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  const double l = h00 * log_cum_[i] + h10 * step_ * dlog_cum_[i] + h01 * log_cum_[i + 1] +
                   h11 * step_ * dlog_cum_[i + 1];
  return std::exp(l);
}

double DensityTable::density(double t) const {
  if (p_.kappa == -1 && !(t < 1)) throw Error(ErrorCode::OutOfDomain, "the beta' density needs t < 1");
  const double z = z_of(t);
  const int n = static_cast<int>(t_.size());
  if (!(z >= z_lo_ + step_ && z < z_hi_ - 2 * step_)) return density_m(p_, t);
  const double pos = (z - z_lo_) / step_;
  const int i = static_cast<int>(pos);
  const double u = pos - i;
  // Catmull-Rom on log m.
  const double y0 = log_m_[i - 1], y1 = log_m_[i], y2 = log_m_[i + 1], y3 = log_m_[std::min(i + 2, n - 1)];
  const double l = y1 + 0.5 * u * (y2 - y0 + u * (2 * y0 - 5 * y1 + 4 * y2 - y3 + u * (3 * (y1 - y2) + y3 - y0)));
  return std::exp(l);
}

std::string DensityTable::fingerprint() const {
  std::ostringstream s;
  s << "betatess-density-v1 kappa=" << p_.kappa << " beta=" << hex(p_.beta) << " gamma=" << hex(p_.gamma)
    << " d=" << p_.d << " step=" << hex(step_);
  return s.str();
}

void DensityTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "# " << fingerprint() << "\n# error_estimate=" << hex(err_) << "\nt,m,cumulative\n";
  char buf[128];
  for (std::size_t i = 0; i < t_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t_[i], m_[i], cum_[i]);
    out << buf;
  }
}

DensityTable DensityTable::load_csv(const std::string& path, const ModelParams& p, double step) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  DensityTable t(p, step, true);
  std::string line;
  std::getline(in, line);
  if (line != "# " + t.fingerprint()) throw Error(ErrorCode::VersionMismatch, "density table fingerprint differs");
  std::getline(in, line);
  const std::string key = "# error_estimate=";
  if (line.rfind(key, 0) != 0) throw Error(ErrorCode::IoError, "malformed density table");
  t.err_ = std::strtod(line.c_str() + key.size(), nullptr);
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double a, b, c;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3) throw Error(ErrorCode::IoError, "malformed row");
    t.t_.push_back(a);
    t.m_.push_back(b);
    t.cum_.push_back(c);
  }
  const int n = static_cast<int>(std::llround((t.z_hi_ - t.z_lo_) / step)) + 1;
  if (static_cast<int>(t.t_.size()) != n) throw Error(ErrorCode::IoError, "density table has the wrong length");
  t.finish();
  return t;
}

// ---------------------------------------------------------------------------------------------------------
// Phi-content

std::string to_string(PhiMethod m) {
  switch (m) {
    case PhiMethod::ClosedForm:
      return "closed_form";
    case PhiMethod::Quadrature:
      return "quadrature";
    case PhiMethod::MonteCarlo:
      return "monte_carlo";
  }
  return "unknown";
}

PhiResult phi_content_vertices(const DensityTable& table, const WeightedPoint& x, const std::vector<Vector>& verts) {
  const ModelParams& p = table.params();
  const Frame f = frame_of(p, x.h);
  const int d = static_cast<int>(x.v.size());
  PhiResult out;
  out.method = PhiMethod::Quadrature;
  out.constant_part = f.factor * cumulative_checked(table, 0.0);

  // Vertices relative to the nucleus in reference units.
  std::vector<Vector> w;
  double scale = 0;
  for (const auto& q : verts) scale = std::max(scale, (q - x.v).norm() / f.lambda);
  const double merge = 1e-12 * std::max(scale, 1.0);
  for (const auto& q : verts) {
    const Vector r = (q - x.v) / f.lambda;
    bool dup = false;
    for (const auto& e : w) dup |= (e - r).norm() <= merge;
    if (!dup) w.push_back(r);
  }
  if (w.empty()) throw Error(ErrorCode::DegenerateInput, "body has no vertices");

  if (d == 1) {
    double lo = w[0][0], hi = w[0][0];
    for (const auto& e : w) lo = std::min(lo, e[0]), hi = std::max(hi, e[0]);
    out.value = f.factor * (cumulative_checked(table, hi) + cumulative_checked(table, -lo));
    out.directional_part = out.value - 2 * out.constant_part;
    return out;
  }
  if (d != 2) throw Error(ErrorCode::DegenerateInput, "quadrature route needs d <= 2");

  // Order counter-clockwise and attach to each vertex the arc of its normal cone.
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& e : w) c += e;
  c /= static_cast<double>(w.size());
  std::sort(w.begin(), w.end(), [&](const Vector& a, const Vector& b) {
    return std::atan2(a[1] - c[1], a[0] - c[0]) < std::atan2(b[1] - c[1], b[0] - c[0]);
  });
  const int n = static_cast<int>(w.size());
  std::vector<double> normal_angle(n);
  if (n == 2) {
    const Vector e = w[1] - w[0];
    normal_angle[0] = std::atan2(-e[0], e[1]);
    normal_angle[1] = normal_angle[0] + kPi;
  } else {
    for (int i = 0; i < n; ++i) {
      const Vector e = w[(i + 1) % n] - w[i];
      normal_angle[i] = std::atan2(-e[0], e[1]);
    }
  }
  const double abs_tol = 1e-13 * 2 * kPi * cumulative_checked(table, 0.0);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double rho = w[i].norm();
    const double phi = rho > 0 ? std::atan2(w[i][1], w[i][0]) : 0.0;
    double a0, span;
    if (n == 1) {
      a0 = 0;
      span = 2 * kPi;
    } else {
      a0 = normal_angle[(i + n - 1) % n];
      span = std::remainder(normal_angle[i] - a0, 2 * kPi);
      if (span < 0) span += 2 * kPi;
      if (n == 2) span = kPi;
    }
    if (rho == 0) {
      total += span * cumulative_checked(table, 0.0);
      continue;
    }
    const QuadratureResult r = adaptive_gk(
        [&](double th) { return cumulative_checked(table, rho * std::cos(th - phi)); }, a0, a0 + span, 1e-10,
        abs_tol);
    total += r.value;
  }
  out.value = f.factor * total;
  out.directional_part = out.value - 2 * kPi * out.constant_part;
  return out;
}

PhiResult phi_content(const DensityTable& table, const WeightedPoint& x, const Polytope& K) {
  const int d = static_cast<int>(x.v.size());
  if (d <= 2) return phi_content_vertices(table, x, K.vertices);
  Rng rng(0x5eed0f1e1dULL, 0, 0);
  return phi_content_mc(table.params(), x, K, rng, 200000);
}

PhiResult phi_content_ball(const DensityTable& table, const WeightedPoint& x, double r) {
  const ModelParams& p = table.params();
  const Frame f = frame_of(p, x.h);
  const double omega = sphere_area(static_cast<int>(x.v.size()));
  PhiResult out;
  out.method = PhiMethod::Quadrature;
  out.constant_part = f.factor * cumulative_checked(table, 0.0);
  out.value = omega * f.factor * cumulative_checked(table, r / f.lambda);
  out.directional_part = out.value - omega * out.constant_part;
  return out;
}

PhiResult phi_content_mc(const ModelParams& p, const WeightedPoint& x,
                         const std::function<double(const Vector&)>& support, double R, Rng& rng, long long n) {
  p.validate();
  const int d = static_cast<int>(x.v.size());
  const double h = x.h;
  if (!(p.kappa * (h + R * R) > 0) || (p.kappa == -1 && !(R * R < -h)))
    throw Error(ErrorCode::WrongSign, "the flower has infinite measure");
  if (n <= 0) throw Error(ErrorCode::InsufficientSample, "Monte Carlo needs at least one sample");

  // Enclosure {h' <= A - c0 |y|^2} with A = h + R^2 / (1 - c0); its mass is c0^(-d/2) times the
  // paraboloid measure at height A. c0 is chosen to minimise the mass.
  const double e = p.exponent();
  const double c_max = p.kappa == 1 ? 1.0 : 1 - R * R / (-h);
  const auto log_mass = [&](double c0) {
    const double A = h + R * R / (1 - c0);
    return -0.5 * d * std::log(c0) + e * std::log(p.kappa * A);
  };
  double lo = 1e-9 * c_max, hi = c_max * (1 - 1e-9);
  const double g = 0.5 * (std::sqrt(5.0) - 1);
  for (int it = 0; it < 200; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (log_mass(a) < log_mass(b))
      hi = b;
    else
      lo = a;
  }
  const double c0 = 0.5 * (lo + hi);
  const double A = h + R * R / (1 - c0);
  const double mass = std::pow(c0, -0.5 * d) * paraboloid_measure(p, A);
  const double sc = 1 / std::sqrt(c0);

  long long hits = 0;
  for (long long i = 0; i < n; ++i) {
    double r2, hp;
    draw_in_paraboloid(p, A, d, rng, &r2, &hp);
    const Vector y = random_direction(rng, d) * (std::sqrt(r2) * sc);
    if (hp <= flower_ceiling(h, y, support)) ++hits;
  }
  PhiResult out;
  out.method = PhiMethod::MonteCarlo;
  out.samples = n;
  out.accepted = hits;
  const double frac = static_cast<double>(hits) / n;
  out.value = mass * frac;
  out.std_error = mass * std::sqrt(frac * (1 - frac) / n);
  out.constant_part = paraboloid_measure(p, h) / sphere_area(d);
  out.directional_part = out.value - paraboloid_measure(p, h);
  return out;
}

PhiResult phi_content_mc(const ModelParams& p, const WeightedPoint& x, const Polytope& K, Rng& rng, long long n) {
  const int d = static_cast<int>(x.v.size());
  if (K.vertices.empty()) throw Error(ErrorCode::DegenerateInput, "body has no vertices");
  if (K.vertices.size() == 1) {
    // The flower is a single paraboloid, which serves as its own enclosure.
    const double a = power_value(x, K.vertices[0]);
    PhiResult out = phi_content_mc_ball(p, WeightedPoint{Vector::Zero(d), a}, 0.0, rng, n);
    out.constant_part = paraboloid_measure(p, x.h) / sphere_area(d);
    out.directional_part = out.value - paraboloid_measure(p, x.h);
    return out;
  }
  double R = 0;
  for (const auto& q : K.vertices) R = std::max(R, (q - x.v).norm());
  return phi_content_mc(
      p, x,
      [&](const Vector& u) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& q : K.vertices) best = std::max(best, (q - x.v).dot(u));
        return best;
      },
      R, rng, n);
}

PhiResult phi_content_mc_ball(const ModelParams& p, const WeightedPoint& x, double r, Rng& rng, long long n) {
  const int d = static_cast<int>(x.v.size());
  if (r > 0) return phi_content_mc(p, x, [r](const Vector&) { return r; }, r, rng, n);
  // r = 0: the flower is the paraboloid at the nucleus; sample it directly.
  p.validate();
  const double A = x.h;
  if (!(p.kappa * A > 0)) throw Error(ErrorCode::WrongSign, "the flower has infinite measure");
  long long hits = 0;
  const double tol = 1e-12 * std::abs(A);
  for (long long i = 0; i < n; ++i) {
    double r2, hp;
    draw_in_paraboloid(p, A, d, rng, &r2, &hp);
    const Vector y = random_direction(rng, d) * std::sqrt(r2);
    if (hp <= A - y.squaredNorm() + tol) ++hits;
  }
  const double mass = paraboloid_measure(p, A);
  PhiResult out;
  out.method = PhiMethod::MonteCarlo;
  out.samples = n;
  out.accepted = hits;
  const double frac = static_cast<double>(hits) / n;
  out.value = mass * frac;
  out.std_error = mass * std::sqrt(frac * (1 - frac) / n);
  out.constant_part = mass / sphere_area(d);
  out.directional_part = 0;
  return out;
}

}  // namespace betatess
