#pragma once

#include <string>
#include <vector>

#include "geoxray/manifold.hpp"

namespace geoxray {

/// Geodesic disk {x : d_g(x, center) < radius}; center is a chart point.
struct ConvexBody {
  Vec2 center;
  double radius = 0.0;
  int label = 0;
};

/// Tissue bump a (1 - d^2/w^2)^4 for d < w, with d the geodesic distance to
/// the center (chart distance on conformal models).
struct TissueBump {
  Vec2 center;
  double width = 1.0;
  double amplitude = 0.0;
};

struct SpectralModel {
  double E0 = 1.0;
  double epsilon = 0.1;

  /// rho(E) = 1/(2 eps) on [E0 - eps, E0 + eps].
  double density(double E) const;
  void validate() const;
};

struct Phantom {
  std::vector<ConvexBody> bodies;
  std::vector<TissueBump> tissue;
  double alpha = 1.0;
};

/// Signed geodesic distance d_g(x, c_j) - r_j.
double defining_function(const Manifold& model, const ConvexBody& body, Vec2 x);
/// grad f_j = nu_j in orthonormal-frame components; throws DomainError at the center.
Vec2 defining_gradient(const Manifold& model, const ConvexBody& body, Vec2 x);
/// min_j f_j(x) (+infinity without bodies).
double min_defining_function(const Manifold& model, const Phantom& phantom, Vec2 x);

int indicator(const Manifold& model, const Phantom& phantom, Vec2 x);
double tissue_at(const Manifold& model, const Phantom& phantom, Vec2 x);
double attenuation_at(const Manifold& model, const Phantom& phantom, const SpectralModel& spec,
                      double E, Vec2 x);

/// Distance used by tissue bumps (geodesic on constant-curvature models).
double bump_distance(const Manifold& model, Vec2 a, Vec2 b);
double bump_profile(const TissueBump& bump, double d);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> errors;
};

/// Disjointness, interior containment and per-model radius bounds.
/// margin < 0 selects the default 0.02 R_M.
ValidationReport validate(const Phantom& phantom, const Manifold& model, double margin = -1.0);

}  // namespace geoxray
