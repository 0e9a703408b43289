#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geoxray/vec.hpp"

namespace geoxray {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Reduces an angle to [0, 2pi).
double wrap_angle(double a);
/// Reduces an angle to (-pi, pi].
double wrap_signed(double a);

/// Element of S(M): a chart point and a direction angle measured in the
/// orthonormal frame e^{-lambda} d/dx, e^{-lambda} d/dy. Every model here is
/// conformal in its chart, so this angle is also the chart angle.
struct UnitTangent {
  Vec2 base;
  double psi = 0.0;

  Vec2 direction() const { return Vec2::unit(psi); }
};

/// Incoming boundary vector in fan coordinates: beta locates the boundary
/// point, phi is the angle from the inward normal (counter-clockwise positive).
struct BoundaryRay {
  double beta = 0.0;
  double phi = 0.0;

  double santalo_weight() const;
};

/// Tangent vector given by its components in the orthonormal frame at base.
struct TangentVector {
  Vec2 base;
  Vec2 frame;
};

struct ExitTimes {
  double minus = 0.0;
  double plus = 0.0;
};

/// lambda(x) = offset - log(1 + quadratic |x|^2) + sum_i a_i exp(-|x - c_i|^2 / w_i^2).
/// offset = log 2, quadratic = K reproduces the constant-curvature models in
/// stereographic / Poincare coordinates (offset 0 for K = 0).
class ConformalFactor {
 public:
  struct Bump {
    Vec2 center;
    double width = 1.0;
    double amplitude = 0.0;
  };

  ConformalFactor() = default;
  ConformalFactor(double offset, double quadratic, std::vector<Bump> bumps = {});

  static ConformalFactor matching_constant_curvature(double K);

  double value(Vec2 x) const;
  Vec2 gradient(Vec2 x) const;
  double laplacian(Vec2 x) const;
  /// Radius of the chart disk on which lambda is defined (infinite if quadratic >= 0).
  double domain_radius() const;

  double offset() const { return offset_; }
  double quadratic() const { return quadratic_; }
  const std::vector<Bump>& bumps() const { return bumps_; }

 private:
  double offset_ = 0.0;
  double quadratic_ = 0.0;
  std::vector<Bump> bumps_;
};

enum class ModelKind { ConstantCurvature, Conformal };

/// Compact simple surface M: a geodesic disk of radius R_M about the chart
/// origin (constant curvature), or a chart disk carrying the metric
/// e^{2 lambda} |dx|^2 (conformal).
///
/// Charts: K = 0 is Cartesian; K != 0 uses stereographic (K > 0) or Poincare
/// (K < 0) coordinates scaled so that g = 4 |dx|^2 / (1 + K |x|^2)^2. The
/// closed-form flows work in the embedded sphere / hyperboloid.
class Manifold {
 public:
  static Manifold constant_curvature(double K, double radius);
  static Manifold euclidean(double radius) { return constant_curvature(0.0, radius); }
  static Manifold conformal(ConformalFactor lambda, double chart_radius);

  ModelKind kind() const { return kind_; }
  bool is_constant_curvature() const { return kind_ == ModelKind::ConstantCurvature; }
  bool is_euclidean() const { return is_constant_curvature() && K_ == 0.0; }
  /// Constant curvature K (0 for conformal models).
  double curvature() const { return K_; }
  /// Geodesic radius R_M for constant-curvature models; for conformal models
  /// the length scale chart_radius * e^{lambda(0)}.
  double radius() const { return radius_; }
  double chart_radius() const { return chart_radius_; }
  const ConformalFactor& conformal_factor_fn() const { return lambda_; }
  std::string describe() const;

  bool in_chart_domain(Vec2 x) const;
  bool inside(Vec2 x) const { return boundary_function(x) < 0.0; }

  double log_conformal_factor(Vec2 x) const;
  double conformal_factor(Vec2 x) const;
  Vec2 log_conformal_gradient(Vec2 x) const;
  /// Area density of dv_g with respect to chart Lebesgue measure.
  double area_density(Vec2 x) const;

  double curvature_at(Vec2 x) const;

  /// Defining function of M: geodesic distance to the origin minus R_M
  /// (constant curvature) or |x| - chart radius (conformal).
  double boundary_function(Vec2 x) const;

  /// Geodesic distance (constant-curvature models only).
  double distance(Vec2 a, Vec2 b) const;
  /// Direction angle at `from` of the geodesic towards `to` (constant curvature).
  double direction_to(Vec2 from, Vec2 to) const;
  /// exp_0 applied to the normal-coordinate vector p.
  Vec2 from_normal_coordinates(Vec2 p) const;

  /// Geodesic flow Psi(v, t); throws OutOfDomain if the geodesic leaves M
  /// before |t|.
  UnitTangent flow(const UnitTangent& v, double t) const;
  /// Flow without the M-membership check (chart domain still required).
  UnitTangent flow_unchecked(const UnitTangent& v, double t) const;

  ExitTimes exit_times(const UnitTangent& v) const;
  /// Exit time tau_+ of the geodesic entering at w.
  double exit_time(const BoundaryRay& w) const;

  BoundaryRay footpoint(const UnitTangent& v) const;
  UnitTangent ray_to_tangent(const BoundaryRay& w) const;
  /// (beta, phi) of an inward tangent vector based on the boundary.
  BoundaryRay ray_from_boundary_tangent(const UnitTangent& v) const;

  Vec2 boundary_point(double beta) const { return Vec2::polar(chart_radius_, beta); }
  /// Boundary length per unit beta (the |d dS(M)| factor of the Santalo measure).
  double boundary_arc_element(double beta) const;

  /// Chart points gamma_v(t0 + k h), k = 0..n-1 (no membership check).
  void sample_geodesic(const UnitTangent& v, double t0, double h, int n,
                       std::vector<Vec2>& out) const;

  /// Entry ray of the geodesic through v, for base points inside or outside
  /// M (constant curvature only); empty if the geodesic misses M.
  std::optional<BoundaryRay> entry_ray(const UnitTangent& v) const;

  /// Times (t_in, t_out) along the geodesic of v during which it lies in the
  /// geodesic ball B(center, radius); empty if it misses (constant curvature).
  std::optional<std::pair<double, double>> ball_crossing(const UnitTangent& v, Vec2 center,
                                                         double radius) const;

  /// Bracketing + bisection exit search used for conformal models; available
  /// for every model as a cross-check of the closed forms.
  ExitTimes exit_times_by_bisection(const UnitTangent& v) const;

  /// Time derivative of (x, y, psi) along a unit-speed geodesic.
  void geodesic_rhs(Vec2 x, double psi, Vec2& dx, double& dpsi) const;

 private:
  Manifold() = default;

  // constant curvature helpers (K != 0)
  struct Embedded {
    Vec3 P;
    Vec3 V;
  };
  Embedded embed(const UnitTangent& v) const;
  Vec3 embed_point(Vec2 x) const;
  UnitTangent unembed(const Embedded& e) const;
  Vec2 unembed_point(const Vec3& P) const;
  double unembed_angle(const Vec3& P, const Vec3& W) const;
  Embedded advance(const Embedded& e, double t) const;
  ExitTimes exit_times_closed_form(const UnitTangent& v) const;
  UnitTangent flow_conformal(const UnitTangent& v, double t) const;

  ModelKind kind_ = ModelKind::ConstantCurvature;
  double K_ = 0.0;
  double kappa_ = 0.0;  // sqrt(|K|)
  int sigma_ = 0;       // sign of K
  double radius_ = 1.0;
  double chart_radius_ = 1.0;
  double boundary_height_ = 1.0;  // P_0 on the boundary circle (cos / cosh of kappa R)
  double domain_radius_ = 0.0;    // chart domain bound (0 = unbounded)
  ConformalFactor lambda_;

  friend class GeodesicArc;
};

/// Arc of a maximal geodesic through M with samples cached at t = k * step.
class GeodesicArc {
 public:
  GeodesicArc(const Manifold& model, const UnitTangent& start, double step);
  static GeodesicArc from_ray(const Manifold& model, const BoundaryRay& w, double step);

  const Manifold& model() const { return model_; }
  const UnitTangent& start() const { return start_; }
  double t_minus() const { return t_minus_; }
  double t_plus() const { return t_plus_; }
  double step() const { return step_; }

  /// Flow state at time t (t in [t_minus, t_plus] up to a small tolerance).
  UnitTangent at(double t) const;
  /// Cached samples at t_k = k * step for t_minus <= t_k <= t_plus.
  const std::vector<UnitTangent>& samples() const { return samples_; }
  double sample_time(std::size_t i) const { return (first_index_ + static_cast<double>(i)) * step_; }

  /// Gaussian curvature at gamma(t).
  double curvature_along(double t) const;

 private:
  Manifold model_;
  UnitTangent start_;
  double t_minus_ = 0.0;
  double t_plus_ = 0.0;
  double step_ = 0.0;
  long first_index_ = 0;
  std::vector<UnitTangent> samples_;
};

/// Parallel transport along the arc from gamma(t0) to gamma(t1). X is given
/// in frame components at gamma(t0).
TangentVector parallel_transport(const GeodesicArc& arc, double t0, double t1, Vec2 X);

/// Solutions a(t; s), b(t; s) of y'' + k(gamma(t)) y = 0 with a(s) = 1,
/// a'(s) = 0, b(s) = 0, b'(s) = 1.
class JacobiScalars {
 public:
  struct Values {
    double a = 1.0;
    double a_t = 0.0;
    double b = 0.0;
    double b_t = 1.0;
  };

  JacobiScalars(const GeodesicArc& arc, double s);

  double s() const { return s_; }
  Values at(double t) const;
  double a(double t) const { return at(t).a; }
  double b(double t) const { return at(t).b; }

 private:
  const GeodesicArc* arc_;
  double s_;
};

struct JacobiFieldValue {
  TangentVector Y;
  TangentVector dY;
};

/// Jacobi field with Y(0) = Y0, (nabla Y)(0) = dY0, both normal to the arc's
/// initial velocity; throws PreconditionError otherwise.
JacobiFieldValue jacobi_field(const GeodesicArc& arc, Vec2 Y0, Vec2 dY0, double t);

/// Same, allowing tangential components; the tangential part evolves
/// linearly (Gauss lemma) and the normal part through the scalars above.
JacobiFieldValue jacobi_field_general(const GeodesicArc& arc, Vec2 Y0, Vec2 dY0, double t);

/// a(t0;s) b(t0~;s) - a(t0~;s) b(t0;s); throws SimplicityViolation if it is
/// numerically zero (conjugate points).
double delta_det(const GeodesicArc& arc, double t0, double t0_tilde, double s);

struct PropagationWeights {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// c1 = b(t0~;s)/Delta, c2 = -b(t0;s)/Delta.
PropagationWeights propagation_weights(const GeodesicArc& arc, double t0, double t0_tilde,
                                       double s);

struct SimplicityCertificate {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Samples n_rays boundary rays and checks non-trapping, absence of conjugate
/// points along each chord, and strict convexity of the boundary.
SimplicityCertificate simplicity_check(const Manifold& model, int n_rays);

/// Throws SimplicityViolation unless simplicity_check passes.
void require_simple(const Manifold& model, int n_rays = 64);

}  // namespace geoxray
