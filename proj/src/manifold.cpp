#include "geoxray/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "geoxray/errors.hpp"
#include "geoxray/ode.hpp"

namespace geoxray {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lorentzian (sigma < 0) or Euclidean (sigma > 0) inner product on R^3.
double ambient_dot(const Vec3& a, const Vec3& b, int sigma) {
  return a.x * b.x + a.y * b.y + (sigma > 0 ? 1.0 : -1.0) * a.z * b.z;
}

double cos_k(double tau, int sigma) { return sigma > 0 ? std::cos(tau) : std::cosh(tau); }
double sin_k(double tau, int sigma) { return sigma > 0 ? std::sin(tau) : std::sinh(tau); }

}  // namespace

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double wrap_signed(double a) {
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= kPi;
  if (r == -kPi) r = kPi;
  return r;
}

double BoundaryRay::santalo_weight() const { return std::cos(phi); }

// ---------------------------------------------------------------- ConformalFactor

ConformalFactor::ConformalFactor(double offset, double quadratic, std::vector<Bump> bumps)
    : offset_(offset), quadratic_(quadratic), bumps_(std::move(bumps)) {
  for (const auto& b : bumps_)
    if (!(b.width > 0.0)) throw DomainError("conformal bump width must be positive");
}

ConformalFactor ConformalFactor::matching_constant_curvature(double K) {
  return ConformalFactor(K == 0.0 ? 0.0 : std::log(2.0), K);
}

double ConformalFactor::value(Vec2 x) const {
  double v = offset_ - std::log1p(quadratic_ * x.norm2());
  for (const auto& b : bumps_)
    v += b.amplitude * std::exp(-(x - b.center).norm2() / (b.width * b.width));
  return v;
}

Vec2 ConformalFactor::gradient(Vec2 x) const {
  Vec2 g = x * (-2.0 * quadratic_ / (1.0 + quadratic_ * x.norm2()));
  for (const auto& b : bumps_) {
    const Vec2 d = x - b.center;
    const double w2 = b.width * b.width;
    g += d * (-2.0 * b.amplitude * std::exp(-d.norm2() / w2) / w2);
  }
  return g;
}

double ConformalFactor::laplacian(Vec2 x) const {
  const double u = 1.0 + quadratic_ * x.norm2();
  double l = -4.0 * quadratic_ / (u * u);
  for (const auto& b : bumps_) {
    const double d2 = (x - b.center).norm2();
    const double w2 = b.width * b.width;
    l += b.amplitude * std::exp(-d2 / w2) * (4.0 * d2 / (w2 * w2) - 4.0 / w2);
  }
  return l;
}

double ConformalFactor::domain_radius() const {
  return quadratic_ < 0.0 ? 1.0 / std::sqrt(-quadratic_) : kInf;
}

// ---------------------------------------------------------------- construction

Manifold Manifold::constant_curvature(double K, double radius) {
  if (!std::isfinite(K) || !(radius > 0.0) || !std::isfinite(radius))
    throw DomainError("constant-curvature model needs finite K and a positive radius");
  Manifold m;
  m.kind_ = ModelKind::ConstantCurvature;
  m.K_ = K;
  m.radius_ = radius;
  if (K == 0.0) {
    m.chart_radius_ = radius;
    return m;
  }
  m.kappa_ = std::sqrt(std::abs(K));
  m.sigma_ = K > 0.0 ? 1 : -1;
  const double kr = m.kappa_ * radius;
  if (m.sigma_ > 0) {
    if (kr >= kPi) throw DomainError("geodesic disk radius must stay below pi/sqrt(K)");
    m.chart_radius_ = std::tan(0.5 * kr) / m.kappa_;
    m.boundary_height_ = std::cos(kr);
  } else {
    m.chart_radius_ = std::tanh(0.5 * kr) / m.kappa_;
    m.boundary_height_ = std::cosh(kr);
    m.domain_radius_ = 1.0 / m.kappa_;
  }
  m.lambda_ = ConformalFactor::matching_constant_curvature(K);
  return m;
}

Manifold Manifold::conformal(ConformalFactor lambda, double chart_radius) {
  if (!(chart_radius > 0.0) || !std::isfinite(chart_radius))
    throw DomainError("conformal model needs a positive chart radius");
  const double dom = lambda.domain_radius();
  if (!(chart_radius < dom)) throw DomainError("chart radius exceeds the conformal factor's domain");
  Manifold m;
  m.kind_ = ModelKind::Conformal;
  m.lambda_ = std::move(lambda);
  m.chart_radius_ = chart_radius;
  m.domain_radius_ = std::isfinite(dom) ? dom : 0.0;
  m.radius_ = chart_radius * std::exp(m.lambda_.value({0.0, 0.0}));
  return m;
}

std::string Manifold::describe() const {
  std::ostringstream os;
  if (is_constant_curvature())
    os << "constant curvature K=" << K_ << ", R_M=" << radius_;
  else
    os << "conformal chart radius " << chart_radius_ << " (q=" << lambda_.quadratic()
       << ", " << lambda_.bumps().size() << " bumps)";
  return os.str();
}

// ---------------------------------------------------------------- metric

bool Manifold::in_chart_domain(Vec2 x) const {
  if (!std::isfinite(x.x) || !std::isfinite(x.y)) return false;
  if (domain_radius_ > 0.0) return x.norm() < domain_radius_;
  return true;
}

double Manifold::log_conformal_factor(Vec2 x) const {
  if (!in_chart_domain(x)) throw DomainError("point outside chart domain");
  if (is_euclidean()) return 0.0;
  return lambda_.value(x);
}

double Manifold::conformal_factor(Vec2 x) const { return std::exp(log_conformal_factor(x)); }

Vec2 Manifold::log_conformal_gradient(Vec2 x) const {
  if (is_euclidean()) return {0.0, 0.0};
  return lambda_.gradient(x);
}

double Manifold::area_density(Vec2 x) const { return std::exp(2.0 * log_conformal_factor(x)); }

double Manifold::curvature_at(Vec2 x) const {
  if (!in_chart_domain(x)) throw DomainError("curvature_at: point outside chart domain");
  if (is_constant_curvature()) return K_;
  // Five-point Laplacian; h balances truncation against cancellation.
  const double h = 1e-4 * std::max(1.0, x.norm());
  const double c = lambda_.value(x);
  const double lap = (lambda_.value({x.x + h, x.y}) + lambda_.value({x.x - h, x.y}) +
                      lambda_.value({x.x, x.y + h}) + lambda_.value({x.x, x.y - h}) - 4.0 * c) /
                     (h * h);
  return -std::exp(-2.0 * c) * lap;
}

double Manifold::boundary_function(Vec2 x) const {
  if (kind_ == ModelKind::Conformal) return x.norm() - chart_radius_;
  const double r = x.norm();
  if (K_ == 0.0) return r - radius_;
  if (sigma_ > 0) return 2.0 * std::atan(kappa_ * r) / kappa_ - radius_;
  if (kappa_ * r >= 1.0) return kInf;
  return 2.0 * std::atanh(kappa_ * r) / kappa_ - radius_;
}

double Manifold::boundary_arc_element(double beta) const {
  if (kind_ == ModelKind::Conformal)
    return chart_radius_ * std::exp(lambda_.value(boundary_point(beta)));
  if (K_ == 0.0) return radius_;
  return sin_k(kappa_ * radius_, sigma_) / kappa_;
}

// ---------------------------------------------------------------- embedding (K != 0)

Vec3 Manifold::embed_point(Vec2 x) const {
  const Vec2 y = x * kappa_;
  const double r2 = y.norm2();
  const double D = 1.0 + sigma_ * r2;
  return {y * (2.0 / D), (1.0 - sigma_ * r2) / D};
}

Manifold::Embedded Manifold::embed(const UnitTangent& v) const {
  const Vec2 y = v.base * kappa_;
  const Vec2 e = v.direction();
  const double r2 = y.norm2();
  const double D = 1.0 + sigma_ * r2;
  const double ye = y.dot(e);
  Embedded out;
  out.P = {y * (2.0 / D), (1.0 - sigma_ * r2) / D};
  out.V = {e - y * (2.0 * sigma_ * ye / D), -2.0 * sigma_ * ye / D};
  return out;
}

Vec2 Manifold::unembed_point(const Vec3& P) const {
  const double den = 1.0 + P.z;
  if (!(den > 0.0)) throw DomainError("point at the chart's antipode");
  return P.spatial() * (1.0 / (den * kappa_));
}

double Manifold::unembed_angle(const Vec3& P, const Vec3& W) const {
  const double den = 1.0 + P.z;
  const Vec2 dy = W.spatial() * (1.0 / den) - P.spatial() * (W.z / (den * den));
  return dy.angle();
}

UnitTangent Manifold::unembed(const Embedded& e) const {
  return {unembed_point(e.P), wrap_angle(unembed_angle(e.P, e.V))};
}

Manifold::Embedded Manifold::advance(const Embedded& e, double t) const {
  const double tau = kappa_ * t;
  const double c = cos_k(tau, sigma_);
  const double s = sin_k(tau, sigma_);
  Embedded out;
  out.P = e.P * c + e.V * s;
  out.V = sigma_ > 0 ? e.V * c - e.P * s : e.V * c + e.P * s;
  // Renormalize against drift from repeated application.
  const double pn = std::sqrt(std::abs(ambient_dot(out.P, out.P, sigma_)));
  out.P = out.P * (1.0 / pn);
  return out;
}

// ---------------------------------------------------------------- flow

void Manifold::geodesic_rhs(Vec2 x, double psi, Vec2& dx, double& dpsi) const {
  const double el = std::exp(-lambda_.value(x));
  const Vec2 g = lambda_.gradient(x);
  const double c = std::cos(psi), s = std::sin(psi);
  dx = {el * c, el * s};
  dpsi = el * (g.y * c - g.x * s);
}

UnitTangent Manifold::flow_conformal(const UnitTangent& v, double t) const {
  auto rhs = [this](double, const OdeState<3>& y) {
    Vec2 dx;
    double dpsi;
    geodesic_rhs({y[0], y[1]}, y[2], dx, dpsi);
    return OdeState<3>{dx.x, dx.y, dpsi};
  };
  const auto y = integrate_dopri5<3>(rhs, {v.base.x, v.base.y, v.psi}, 0.0, t);
  return {{y[0], y[1]}, wrap_angle(y[2])};
}

UnitTangent Manifold::flow_unchecked(const UnitTangent& v, double t) const {
  if (!in_chart_domain(v.base)) throw DomainError("flow: base outside chart domain");
  if (kind_ == ModelKind::Conformal) return flow_conformal(v, t);
  if (K_ == 0.0) return {v.base + v.direction() * t, wrap_angle(v.psi)};
  return unembed(advance(embed(v), t));
}

UnitTangent Manifold::flow(const UnitTangent& v, double t) const {
  const ExitTimes ex = exit_times(v);
  const double slack = 1e-12 * radius_;
  if (t > ex.plus + slack)
    throw OutOfDomain("geodesic leaves M before the requested time", ex.plus);
  if (t < ex.minus - slack)
    throw OutOfDomain("geodesic leaves M before the requested time", ex.minus);
  return flow_unchecked(v, t);
}

// ---------------------------------------------------------------- exit times

ExitTimes Manifold::exit_times_closed_form(const UnitTangent& v) const {
  if (K_ == 0.0) {
    const Vec2 e = v.direction();
    const double xe = v.base.dot(e);
    const double disc = xe * xe - v.base.norm2() + radius_ * radius_;
    const double sq = std::sqrt(std::max(0.0, disc));
    // Cancellation-free pair of roots of t^2 + 2 xe t + (|x|^2 - R^2).
    const double c = v.base.norm2() - radius_ * radius_;
    if (xe >= 0.0) {
      const double tm = -xe - sq;
      return {tm, tm != 0.0 ? c / tm : 0.0};
    }
    const double tp = -xe + sq;
    return {tp != 0.0 ? c / tp : 0.0, tp};
  }
  const Embedded e = embed(v);
  const double A = e.P.z, B = e.V.z, c = boundary_height_;
  if (sigma_ > 0) {
    const double H = std::hypot(A, B);
    const double tau0 = std::atan2(B, A);
    const double half = std::acos(std::clamp(c / H, -1.0, 1.0));
    return {(tau0 - half) / kappa_, (tau0 + half) / kappa_};
  }
  const double rho = std::sqrt(std::max(1.0, A * A - B * B));
  const double tau0 = std::atanh(B / A);
  const double half = std::acosh(std::max(1.0, c / rho));
  return {(-tau0 - half) / kappa_, (-tau0 + half) / kappa_};
}

namespace {

// Signed chart-radius excess of a conformal flow state.
struct MarchState {
  double t;
  UnitTangent v;
  double f;
};

}  // namespace

ExitTimes Manifold::exit_times_by_bisection(const UnitTangent& v) const {
  const double h = radius_ / 64.0;
  const double tol = 1e-10 * radius_;
  const double max_len = 200.0 * radius_;

  auto f_of = [this](const UnitTangent& u) { return boundary_function(u.base); };

  // Forward exit from a state inside M (or on its boundary heading inward).
  auto forward_exit = [&](const UnitTangent& start) -> double {
    MarchState lo{0.0, start, f_of(start)};
    if (lo.f >= 0.0) {
      // On the boundary: move to a strictly interior point first.
      double dt = h;
      bool found = false;
      for (int i = 0; i < 60; ++i, dt *= 0.5) {
        UnitTangent u = flow_unchecked(start, dt);
        const double fu = f_of(u);
        if (fu < 0.0) {
          lo = {dt, u, fu};
          found = true;
          break;
        }
      }
      if (!found) return 0.0;
    }
    MarchState hi = lo;
    for (;;) {
      if (lo.t > max_len) throw SimplicityViolation("geodesic appears trapped");
      UnitTangent u = flow_unchecked(lo.v, h);
      const double fu = f_of(u);
      if (fu >= 0.0) {
        hi = {lo.t + h, u, fu};
        break;
      }
      lo = {lo.t + h, u, fu};
    }
    while (hi.t - lo.t > tol) {
      const double mid = 0.5 * (lo.t + hi.t);
      UnitTangent u = flow_unchecked(lo.v, mid - lo.t);
      const double fu = f_of(u);
      if (fu < 0.0)
        lo = {mid, u, fu};
      else
        hi = {mid, u, fu};
    }
    // Linear interpolation inside the final bracket.
    const double w = lo.f / (lo.f - hi.f);
    return lo.t + std::clamp(w, 0.0, 1.0) * (hi.t - lo.t);
  };

  const double tp = forward_exit(v);
  const double tm = -forward_exit({v.base, wrap_angle(v.psi + kPi)});
  return {tm, tp};
}

ExitTimes Manifold::exit_times(const UnitTangent& v) const {
  if (!in_chart_domain(v.base)) throw DomainError("exit_times: base outside chart domain");
  if (is_constant_curvature()) return exit_times_closed_form(v);
  return exit_times_by_bisection(v);
}

double Manifold::exit_time(const BoundaryRay& w) const {
  if (!(std::cos(w.phi) > 0.0)) throw DomainError("boundary ray must point inward (|phi| < pi/2)");
  if (is_euclidean()) return 2.0 * radius_ * std::cos(w.phi);
  const UnitTangent v = ray_to_tangent(w);
  if (is_constant_curvature()) {
    // The starting point sits on the boundary so tau_- is ~0.
    return exit_times_closed_form(v).plus;
  }
  return exit_times_by_bisection(v).plus;
}

// ---------------------------------------------------------------- boundary

UnitTangent Manifold::ray_to_tangent(const BoundaryRay& w) const {
  if (!(std::abs(w.phi) < 0.5 * kPi)) throw DomainError("invalid boundary ray: |phi| >= pi/2");
  return {boundary_point(w.beta), wrap_angle(w.beta + kPi + w.phi)};
}

BoundaryRay Manifold::ray_from_boundary_tangent(const UnitTangent& v) const {
  const double beta = wrap_angle(v.base.angle());
  const double phi = wrap_signed(v.psi - beta - kPi);
  return {beta, phi};
}

BoundaryRay Manifold::footpoint(const UnitTangent& v) const {
  const ExitTimes ex = exit_times(v);
  if (is_euclidean()) {
    const Vec2 p = v.base + v.direction() * ex.minus;
    return ray_from_boundary_tangent({p, v.psi});
  }
  UnitTangent b = flow_unchecked(v, ex.minus);
  // Project onto the boundary circle: removes the residual of the root.
  b.base = b.base * (chart_radius_ / b.base.norm());
  return ray_from_boundary_tangent(b);
}

void Manifold::sample_geodesic(const UnitTangent& v, double t0, double h, int n,
                               std::vector<Vec2>& out) const {
  out.resize(static_cast<std::size_t>(std::max(n, 0)));
  if (n <= 0) return;
  if (kind_ == ModelKind::Conformal) {
    UnitTangent cur = flow_unchecked(v, t0);
    out[0] = cur.base;
    for (int k = 1; k < n; ++k) {
      cur = flow_unchecked(cur, h);
      out[static_cast<std::size_t>(k)] = cur.base;
    }
    return;
  }
  if (K_ == 0.0) {
    const Vec2 e = v.direction();
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = v.base + e * (t0 + k * h);
    return;
  }
  Embedded st = advance(embed(v), t0);
  const double c = cos_k(kappa_ * h, sigma_), s = sin_k(kappa_ * h, sigma_);
  const double vs = sigma_ > 0 ? -s : s;
  const double inv_k = 1.0 / kappa_;
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = st.P.spatial() * (inv_k / (1.0 + st.P.z));
    const Vec3 P = st.P * c + st.V * s;
    st.V = st.P * vs + st.V * c;
    st.P = P;
  }
}

std::optional<BoundaryRay> Manifold::entry_ray(const UnitTangent& v) const {
  if (!is_constant_curvature()) throw DomainError("entry_ray: only constant-curvature models");
  if (K_ == 0.0) {
    const Vec2 e = v.direction();
    const double xe = v.base.dot(e);
    const double disc = xe * xe - v.base.norm2() + radius_ * radius_;
    if (!(disc > 0.0)) return std::nullopt;
    const Vec2 p = v.base + e * (-xe - std::sqrt(disc));
    return ray_from_boundary_tangent({p, v.psi});
  }
  if (!in_chart_domain(v.base)) return std::nullopt;
  const Embedded e = embed(v);
  const double A = e.P.z, B = e.V.z, c = boundary_height_;
  double tau;
  if (sigma_ > 0) {
    const double H = std::hypot(A, B);
    if (!(H > c)) return std::nullopt;
    tau = std::atan2(B, A) - std::acos(c / H);
  } else {
    const double rho = std::sqrt(std::max(1.0, A * A - B * B));
    if (!(rho < c)) return std::nullopt;
    tau = -std::atanh(B / A) - std::acosh(c / rho);
  }
  UnitTangent b = unembed(advance(e, tau / kappa_));
  b.base = b.base * (chart_radius_ / b.base.norm());
  return ray_from_boundary_tangent(b);
}

std::optional<std::pair<double, double>> Manifold::ball_crossing(const UnitTangent& v,
                                                                 Vec2 center,
                                                                 double radius) const {
  if (!is_constant_curvature()) throw DomainError("ball_crossing: only constant-curvature models");
  if (K_ == 0.0) {
    const Vec2 e = v.direction();
    const Vec2 q = v.base - center;
    const double qe = q.dot(e);
    const double disc = qe * qe - q.norm2() + radius * radius;
    if (!(disc > 0.0)) return std::nullopt;
    const double sq = std::sqrt(disc);
    return std::pair{-qe - sq, -qe + sq};
  }
  const Embedded e = embed(v);
  const Vec3 C = embed_point(center);
  if (sigma_ > 0) {
    // P(tau).C = A cos tau + B sin tau must exceed cos(kappa r).
    const double A = ambient_dot(e.P, C, 1), B = ambient_dot(e.V, C, 1);
    const double H = std::hypot(A, B), c = std::cos(kappa_ * radius);
    if (!(H > c)) return std::nullopt;
    const double tau0 = std::atan2(B, A), half = std::acos(c / H);
    return std::pair{(tau0 - half) / kappa_, (tau0 + half) / kappa_};
  }
  // -<P(tau), C> = A cosh tau + B sinh tau must stay below cosh(kappa r).
  const double A = -ambient_dot(e.P, C, -1), B = -ambient_dot(e.V, C, -1);
  const double rho = std::sqrt(std::max(1.0, A * A - B * B)), c = std::cosh(kappa_ * radius);
  if (!(rho < c)) return std::nullopt;
  const double tau0 = std::atanh(B / A), half = std::acosh(c / rho);
  return std::pair{(-tau0 - half) / kappa_, (-tau0 + half) / kappa_};
}

// ---------------------------------------------------------------- distances

double Manifold::distance(Vec2 a, Vec2 b) const {
  if (!is_constant_curvature()) throw DomainError("distance: only constant-curvature models");
  if (K_ == 0.0) return (a - b).norm();
  const Vec3 d = embed_point(a) - embed_point(b);
  const double q = std::sqrt(std::max(0.0, ambient_dot(d, d, sigma_)));
  return (sigma_ > 0 ? 2.0 * std::asin(std::min(1.0, 0.5 * q)) : 2.0 * std::asinh(0.5 * q)) /
         kappa_;
}

double Manifold::direction_to(Vec2 from, Vec2 to) const {
  if (!is_constant_curvature()) throw DomainError("direction_to: only constant-curvature models");
  if (K_ == 0.0) return wrap_angle((to - from).angle());
  const Vec3 P = embed_point(from), Q = embed_point(to);
  const Vec3 W = Q + P * (sigma_ > 0 ? -ambient_dot(P, Q, 1) : ambient_dot(P, Q, -1));
  return wrap_angle(unembed_angle(P, W));
}

Vec2 Manifold::from_normal_coordinates(Vec2 p) const {
  const double d = p.norm();
  if (d == 0.0) return {0.0, 0.0};
  return flow_unchecked({{0.0, 0.0}, p.angle()}, d).base;
}

// ---------------------------------------------------------------- GeodesicArc

GeodesicArc::GeodesicArc(const Manifold& model, const UnitTangent& start, double step)
    : model_(model), start_(start), step_(step) {
  if (!(step > 0.0)) throw DomainError("geodesic arc step must be positive");
  const ExitTimes ex = model.exit_times(start);
  t_minus_ = ex.minus;
  t_plus_ = ex.plus;
  first_index_ = static_cast<long>(std::ceil(t_minus_ / step_ - 1e-12));
  const long last = static_cast<long>(std::floor(t_plus_ / step_ + 1e-12));
  if (last < first_index_) return;
  samples_.reserve(static_cast<std::size_t>(last - first_index_ + 1));
  if (model.is_constant_curvature()) {
    for (long k = first_index_; k <= last; ++k)
      samples_.push_back(model.flow_unchecked(start_, static_cast<double>(k) * step_));
    return;
  }
  // Sequential integration outward from t = 0 in both directions.
  std::vector<UnitTangent> back;
  UnitTangent cur = start_;
  double tc = 0.0;
  for (long k = std::max(first_index_, 0L); k <= last; ++k) {
    const double tk = static_cast<double>(k) * step_;
    cur = model.flow_unchecked(cur, tk - tc);
    tc = tk;
    samples_.push_back(cur);
  }
  cur = start_;
  tc = 0.0;
  for (long k = std::min(-1L, last); k >= first_index_; --k) {
    const double tk = static_cast<double>(k) * step_;
    cur = model.flow_unchecked(cur, tk - tc);
    tc = tk;
    back.push_back(cur);
  }
  std::reverse(back.begin(), back.end());
  back.insert(back.end(), samples_.begin(), samples_.end());
  samples_ = std::move(back);
}

GeodesicArc GeodesicArc::from_ray(const Manifold& model, const BoundaryRay& w, double step) {
  GeodesicArc arc(model, model.ray_to_tangent(w), step);
  // Entry point is on the boundary by construction.
  arc.t_minus_ = std::max(arc.t_minus_, 0.0);
  if (arc.t_minus_ > 1e-9 * model.radius()) arc.t_minus_ = 0.0;
  return arc;
}

UnitTangent GeodesicArc::at(double t) const {
  if (model_.is_constant_curvature() || samples_.empty()) return model_.flow_unchecked(start_, t);
  const double idx = std::round(t / step_) - static_cast<double>(first_index_);
  const long i = std::clamp(static_cast<long>(idx), 0L, static_cast<long>(samples_.size()) - 1);
  const double ti = sample_time(static_cast<std::size_t>(i));
  return model_.flow_unchecked(samples_[static_cast<std::size_t>(i)], t - ti);
}

double GeodesicArc::curvature_along(double t) const {
  if (model_.is_constant_curvature()) return model_.curvature();
  const Vec2 x = at(t).base;
  const auto& lam = model_.conformal_factor_fn();
  return -std::exp(-2.0 * lam.value(x)) * lam.laplacian(x);
}

// ---------------------------------------------------------------- transport and Jacobi

TangentVector parallel_transport(const GeodesicArc& arc, double t0, double t1, Vec2 X) {
  const UnitTangent a = arc.at(t0);
  const UnitTangent b = arc.at(t1);
  const double rot = b.psi - a.psi;
  const double c = std::cos(rot), s = std::sin(rot);
  return {b.base, {c * X.x - s * X.y, s * X.x + c * X.y}};
}

namespace {

JacobiScalars::Values closed_jacobi(double K, double d) {
  JacobiScalars::Values v;
  if (K == 0.0) {
    v.a = 1.0;
    v.a_t = 0.0;
    v.b = d;
    v.b_t = 1.0;
  } else if (K > 0.0) {
    const double k = std::sqrt(K);
    v.a = std::cos(k * d);
    v.a_t = -k * std::sin(k * d);
    v.b = std::sin(k * d) / k;
    v.b_t = std::cos(k * d);
  } else {
    const double k = std::sqrt(-K);
    v.a = std::cosh(k * d);
    v.a_t = k * std::sinh(k * d);
    v.b = std::sinh(k * d) / k;
    v.b_t = std::cosh(k * d);
  }
  return v;
}

// Integrates the geodesic together with both scalar solutions from s to each
// requested time. Unless `sequential`, every time is integrated directly from
// s so that the value at (t; s) does not depend on the other requests.
std::vector<JacobiScalars::Values> integrate_jacobi(const GeodesicArc& arc, double s,
                                                    const std::vector<double>& times,
                                                    bool sequential = false) {
  const Manifold& m = arc.model();
  const auto& lam = m.conformal_factor_fn();
  auto rhs = [&](double, const OdeState<7>& y) {
    const Vec2 x{y[0], y[1]};
    Vec2 dx;
    double dpsi;
    m.geodesic_rhs(x, y[2], dx, dpsi);
    const double k = -std::exp(-2.0 * lam.value(x)) * lam.laplacian(x);
    return OdeState<7>{dx.x, dx.y, dpsi, y[4], -k * y[3], y[6], -k * y[5]};
  };
  const UnitTangent g = arc.at(s);
  const OdeState<7> y0{g.base.x, g.base.y, g.psi, 1.0, 0.0, 0.0, 1.0};

  std::vector<JacobiScalars::Values> out(times.size());
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Forward and backward halves, each swept monotonically.
  for (int dir : {1, -1}) {
    std::vector<std::size_t> sel;
    for (std::size_t i : order)
      if ((dir > 0) == (times[i] >= s)) sel.push_back(i);
    std::sort(sel.begin(), sel.end(), [&](std::size_t a, std::size_t b) {
      return dir > 0 ? times[a] < times[b] : times[a] > times[b];
    });
    OdeState<7> y = y0;
    double tc = s;
    for (std::size_t i : sel) {
      if (!sequential) {
        y = y0;
        tc = s;
      }
      y = integrate_dopri5<7>(rhs, y, tc, times[i]);
      tc = times[i];
      out[i] = {y[3], y[4], y[5], y[6]};
    }
  }
  return out;
}

}  // namespace

JacobiScalars::JacobiScalars(const GeodesicArc& arc, double s) : arc_(&arc), s_(s) {}

JacobiScalars::Values JacobiScalars::at(double t) const {
  const Manifold& m = arc_->model();
  if (m.is_constant_curvature()) return closed_jacobi(m.curvature(), t - s_);
  return integrate_jacobi(*arc_, s_, {t})[0];
}

JacobiFieldValue jacobi_field(const GeodesicArc& arc, Vec2 Y0, Vec2 dY0, double t) {
  const UnitTangent g0 = arc.at(0.0);
  const Vec2 e0 = g0.direction();
  const double scale = std::max(1.0, std::max(Y0.norm(), dY0.norm()));
  if (std::abs(Y0.dot(e0)) > 1e-10 * scale || std::abs(dY0.dot(e0)) > 1e-10 * scale)
    throw PreconditionError("jacobi_field: initial data must be normal to the geodesic");
  const Vec2 n0 = e0.perp();
  const double y0 = Y0.dot(n0), dy0 = dY0.dot(n0);
  const JacobiScalars::Values v = JacobiScalars(arc, 0.0).at(t);
  const UnitTangent gt = arc.at(t);
  const Vec2 nt = gt.direction().perp();
  return {{gt.base, nt * (v.a * y0 + v.b * dy0)}, {gt.base, nt * (v.a_t * y0 + v.b_t * dy0)}};
}

JacobiFieldValue jacobi_field_general(const GeodesicArc& arc, Vec2 Y0, Vec2 dY0, double t) {
  const Vec2 e0 = arc.at(0.0).direction();
  const Vec2 n0 = e0.perp();
  const double yt = Y0.dot(e0), dyt = dY0.dot(e0);
  JacobiFieldValue out = jacobi_field(arc, n0 * Y0.dot(n0), n0 * dY0.dot(n0), t);
  const Vec2 et = arc.at(t).direction();
  out.Y.frame += et * (yt + t * dyt);
  out.dY.frame += et * dyt;
  return out;
}

double delta_det(const GeodesicArc& arc, double t0, double t0_tilde, double s) {
  if (t0 == t0_tilde) throw PreconditionError("delta_det: t0 and t0~ must differ");
  JacobiScalars::Values p, q;
  const Manifold& m = arc.model();
  if (m.is_constant_curvature()) {
    p = closed_jacobi(m.curvature(), t0 - s);
    q = closed_jacobi(m.curvature(), t0_tilde - s);
  } else {
    const auto v = integrate_jacobi(arc, s, {t0, t0_tilde});
    p = v[0];
    q = v[1];
  }
  const double d = p.a * q.b - q.a * p.b;
  if (std::abs(d) < 1e-12) throw SimplicityViolation("Delta vanishes: conjugate points");
  return d;
}

PropagationWeights propagation_weights(const GeodesicArc& arc, double t0, double t0_tilde,
                                       double s) {
  const Manifold& m = arc.model();
  JacobiScalars::Values p, q;
  if (m.is_constant_curvature()) {
    p = closed_jacobi(m.curvature(), t0 - s);
    q = closed_jacobi(m.curvature(), t0_tilde - s);
  } else {
    const auto v = integrate_jacobi(arc, s, {t0, t0_tilde});
    p = v[0];
    q = v[1];
  }
  const double d = p.a * q.b - q.a * p.b;
  if (t0 == t0_tilde || std::abs(d) < 1e-12)
    throw SimplicityViolation("Delta vanishes: conjugate points");
  return {q.b / d, -p.b / d};
}

// ---------------------------------------------------------------- simplicity

SimplicityCertificate simplicity_check(const Manifold& model, int n_rays) {
  SimplicityCertificate cert;
  auto fail = [&](std::string msg) {
    cert.ok = false;
    if (cert.violations.size() < 32) cert.violations.push_back(std::move(msg));
  };
  n_rays = std::max(n_rays, 1);
  const double R = model.radius();

  // Boundary convexity: the defining function must curve upward along every
  // geodesic tangent to the boundary.
  const double h = 1e-3 * R;
  for (int i = 0; i < n_rays; ++i) {
    const double beta = kTwoPi * i / n_rays;
    const UnitTangent tan{model.boundary_point(beta), wrap_angle(beta + 0.5 * kPi)};
    double second;
    try {
      const double fp = model.boundary_function(model.flow_unchecked(tan, h).base);
      const double fm = model.boundary_function(model.flow_unchecked(tan, -h).base);
      const double f0 = model.boundary_function(tan.base);
      second = (fp + fm - 2.0 * f0) / (h * h);
    } catch (const Error&) {
      second = -1.0;
    }
    if (!(second > 1e-6 / R)) {
      std::ostringstream os;
      os << "boundary not strictly convex at beta=" << beta << " (second difference " << second
         << ")";
      fail(os.str());
    }
  }

  // Chords: finite exit time and no zero of b(t;0) on (0, tau_+].
  const int n_phi = std::max(1, static_cast<int>(std::lround(std::sqrt(double(n_rays)))));
  const int n_beta = std::max(1, n_rays / n_phi);
  for (int ib = 0; ib < n_beta; ++ib) {
    for (int ip = 0; ip < n_phi; ++ip) {
      const BoundaryRay w{kTwoPi * ib / n_beta, (-0.5 + (ip + 0.5) / n_phi) * 0.98 * kPi};
      double tp;
      try {
        tp = model.exit_time(w);
      } catch (const Error& e) {
        fail(std::string("trapped or undefined chord: ") + e.what());
        continue;
      }
      if (!std::isfinite(tp) || tp <= 0.0) {
        fail("non-finite exit time");
        continue;
      }
      const int n_samples = 256;
      std::vector<double> ts(n_samples);
      for (int k = 0; k < n_samples; ++k) ts[k] = tp * (k + 1) / n_samples;
      std::vector<double> bs(n_samples);
      if (model.is_constant_curvature()) {
        for (int k = 0; k < n_samples; ++k) bs[k] = closed_jacobi(model.curvature(), ts[k]).b;
      } else {
        GeodesicArc arc = GeodesicArc::from_ray(model, w, tp / 16.0);
        const auto v = integrate_jacobi(arc, 0.0, ts, true);
        for (int k = 0; k < n_samples; ++k) bs[k] = v[k].b;
      }
      for (int k = 0; k < n_samples; ++k) {
        if (bs[k] <= 0.0) {
          std::ostringstream os;
          os << "conjugate point along chord beta=" << w.beta << " phi=" << w.phi
             << " near t=" << ts[k];
          fail(os.str());
          break;
        }
      }
    }
  }
  return cert;
}

void require_simple(const Manifold& model, int n_rays) {
  const SimplicityCertificate c = simplicity_check(model, n_rays);
  if (!c.ok)
    throw SimplicityViolation("model is not simple: " +
                              (c.violations.empty() ? std::string("?") : c.violations.front()));
}

}  // namespace geoxray
