#include "geoxray/phantom.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "geoxray/errors.hpp"

namespace geoxray {

double SpectralModel::density(double E) const {
  return (E >= E0 - epsilon && E <= E0 + epsilon) ? 0.5 / epsilon : 0.0;
}

void SpectralModel::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < E0))
    throw DomainError("spectral model needs 0 < epsilon < E0");
}

double bump_distance(const Manifold& model, Vec2 a, Vec2 b) {
  if (model.is_constant_curvature()) return model.distance(a, b);
  return (a - b).norm();
}

double bump_profile(const TissueBump& bump, double d) {
  if (d >= bump.width) return 0.0;
  const double q = 1.0 - (d * d) / (bump.width * bump.width);
  const double q2 = q * q;
  return bump.amplitude * q2 * q2;
}

double defining_function(const Manifold& model, const ConvexBody& body, Vec2 x) {
  return model.distance(x, body.center) - body.radius;
}

Vec2 defining_gradient(const Manifold& model, const ConvexBody& body, Vec2 x) {
  if ((x - body.center).norm() < 1e-14 * std::max(1.0, model.chart_radius()))
    throw DomainError("defining function gradient is undefined at the body center");
  return Vec2::unit(model.direction_to(x, body.center) + kPi);
}

double min_defining_function(const Manifold& model, const Phantom& phantom, Vec2 x) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : phantom.bodies) m = std::min(m, defining_function(model, b, x));
  return m;
}

int indicator(const Manifold& model, const Phantom& phantom, Vec2 x) {
  for (const auto& b : phantom.bodies)
    if (defining_function(model, b, x) < 0.0) return 1;
  return 0;
}

double tissue_at(const Manifold& model, const Phantom& phantom, Vec2 x) {
  double v = 0.0;
  for (const auto& t : phantom.tissue) v += bump_profile(t, bump_distance(model, x, t.center));
  return v;
}

double attenuation_at(const Manifold& model, const Phantom& phantom, const SpectralModel& spec,
                      double E, Vec2 x) {
  const double base = tissue_at(model, phantom, x);
  if (!indicator(model, phantom, x)) return base;
  return base + phantom.alpha * (E - spec.E0);
}

ValidationReport validate(const Phantom& phantom, const Manifold& model, double margin) {
  ValidationReport rep;
  auto err = [&](const std::string& s) {
    rep.ok = false;
    rep.errors.push_back(s);
  };
  const double R = model.radius();
  if (margin < 0.0) margin = 0.02 * R;
  if (!(phantom.alpha > 0.0)) err("alpha must be positive");
  if (!phantom.bodies.empty() && !model.is_constant_curvature())
    err("metal bodies require a constant-curvature model");
  const Vec2 origin{0.0, 0.0};
  for (const auto& b : phantom.bodies) {
    std::ostringstream id;
    id << "body " << b.label;
    if (!(b.radius > 0.0)) {
      err(id.str() + ": radius must be positive");
      continue;
    }
    if (!model.is_constant_curvature()) continue;
    if (model.curvature() > 0.0 && b.radius >= 0.5 * kPi / std::sqrt(model.curvature()))
      err(id.str() + ": radius violates the convexity bound pi/(2 sqrt K)");
    if (!model.in_chart_domain(b.center) || model.distance(origin, b.center) + b.radius >= R - margin)
      err(id.str() + ": not contained in the interior of M");
  }
  for (std::size_t i = 0; i < phantom.bodies.size(); ++i) {
    for (std::size_t j = i + 1; j < phantom.bodies.size(); ++j) {
      const auto& a = phantom.bodies[i];
      const auto& b = phantom.bodies[j];
      if (!model.is_constant_curvature()) continue;
      if (model.distance(a.center, b.center) <= a.radius + b.radius + margin) {
        std::ostringstream os;
        os << "bodies " << a.label << " and " << b.label << " overlap or touch";
        err(os.str());
      }
    }
  }
  for (const auto& t : phantom.tissue) {
    if (!(t.width > 0.0)) {
      err("tissue bump width must be positive");
      continue;
    }
    if (!model.in_chart_domain(t.center)) {
      err("tissue bump center outside the chart");
      continue;
    }
    const double reach = model.is_constant_curvature() ? model.distance(origin, t.center) + t.width
                                                       : t.center.norm() + t.width;
    const double limit = model.is_constant_curvature() ? R : model.chart_radius();
    if (reach >= limit) err("tissue bump support must lie inside M");
  }
  return rep;
}

}  // namespace geoxray
