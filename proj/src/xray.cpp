#include "geoxray/xray.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geoxray/errors.hpp"
#include "geoxray/parallel.hpp"

namespace geoxray {

namespace {

constexpr std::uint32_t kMiss = std::numeric_limits<std::uint32_t>::max();

double default_step(const Manifold& model, double step) {
  return step > 0.0 ? step : model.radius() / 256.0;
}

// Composite Simpson over [a, b] of f(gamma_v(t)); at least min_intervals.
template <class F>
double simpson_on(const Manifold& model, const UnitTangent& v, double a, double b, double step,
                  int min_intervals, F&& f, std::vector<Vec2>& buf) {
  const double len = b - a;
  if (!(len > 0.0)) return 0.0;
  int n = 2 * static_cast<int>(std::ceil(0.5 * len / step));
  n = std::max(n, min_intervals + (min_intervals & 1));
  const double h = len / n;
  model.sample_geodesic(v, a, h, n + 1, buf);
  double odd = 0.0, even = 0.0;
  for (int k = 1; k < n; ++k) (k & 1 ? odd : even) += f(buf[static_cast<std::size_t>(k)]);
  return h / 3.0 * (f(buf[0]) + f(buf[static_cast<std::size_t>(n)]) + 4.0 * odd + 2.0 * even);
}

struct StencilParts {
  int kb;
  int il;
  double fb;
  double fp;
};

StencilParts stencil_parts(int n_beta, int n_phi, double beta, double phi) {
  const double pb = wrap_angle(beta) / (kTwoPi / n_beta);
  double kbf = std::floor(pb);
  double fb = pb - kbf;
  int kb = static_cast<int>(kbf) % n_beta;
  if (kb < 0) kb += n_beta;
  const double pl = (phi + 0.5 * kPi) / (kPi / n_phi) - 0.5;
  int il;
  double fp;
  if (pl <= 0.0) {
    il = 0;
    fp = 0.0;
  } else if (pl >= n_phi - 1) {
    il = n_phi - 2;
    fp = 1.0;
  } else {
    il = static_cast<int>(std::floor(pl));
    fp = pl - il;
  }
  return {kb, il, fb, fp};
}

double bilinear(const SinogramGrid& g, int kb, int il, double fb, double fp) {
  const int kb1 = kb + 1 == g.n_beta ? 0 : kb + 1;
  const double* r0 = &g.values[static_cast<std::size_t>(kb) * g.n_phi + il];
  const double* r1 = &g.values[static_cast<std::size_t>(kb1) * g.n_phi + il];
  const double a = r0[0] + fp * (r0[1] - r0[0]);
  const double b = r1[0] + fp * (r1[1] - r1[0]);
  return a + fb * (b - a);
}

void require_grid(int n_beta, int n_phi) {
  if (n_beta < 1 || n_phi < 2) throw DomainError("sinogram grid needs n_beta >= 1 and n_phi >= 2");
}

}  // namespace

// ---------------------------------------------------------------- SinogramGrid

SinogramGrid SinogramGrid::zeros(const Manifold& model, int n_beta, int n_phi) {
  require_grid(n_beta, n_phi);
  SinogramGrid g;
  g.n_beta = n_beta;
  g.n_phi = n_phi;
  g.values.assign(static_cast<std::size_t>(n_beta) * n_phi, 0.0);
  g.arc.resize(static_cast<std::size_t>(n_beta));
  for (int k = 0; k < n_beta; ++k) g.arc[static_cast<std::size_t>(k)] = model.boundary_arc_element(g.beta(k));
  return g;
}

SinogramGrid SinogramGrid::like() const {
  SinogramGrid g = *this;
  std::fill(g.values.begin(), g.values.end(), 0.0);
  return g;
}

double SinogramGrid::weight(int l) const { return std::cos(phi(l)); }

double SinogramGrid::cell_measure(int k, int l) const {
  const double a = arc.empty() ? 1.0 : arc[static_cast<std::size_t>(k)];
  return weight(l) * a * d_beta() * d_phi();
}

double SinogramGrid::interpolate(double b, double p) const {
  const StencilParts s = stencil_parts(n_beta, n_phi, b, p);
  return bilinear(*this, s.kb, s.il, s.fb, s.fp);
}

// ---------------------------------------------------------------- ScalarField

ScalarField ScalarField::over(const Manifold& model, int n_x, int n_y, double extent) {
  if (n_x < 2 || n_y < 2) throw DomainError("raster needs at least 2x2 cells");
  if (!(extent > 0.0)) throw DomainError("raster extent must be positive");
  ScalarField f;
  f.n_x = n_x;
  f.n_y = n_y;
  f.half_width = extent * model.chart_radius();
  const std::size_t n = static_cast<std::size_t>(n_x) * n_y;
  f.values.assign(n, 0.0);
  f.mask.assign(n, 0);
  f.measure.assign(n, 0.0);
  const double cell = f.dx() * f.dy();
  for (int j = 0; j < n_y; ++j) {
    for (int i = 0; i < n_x; ++i) {
      const Vec2 c = f.center(i, j);
      if (!model.in_chart_domain(c)) continue;
      const std::size_t id = f.index(i, j);
      f.measure[id] = model.area_density(c) * cell;
      f.mask[id] = model.boundary_function(c) < 0.0 ? 1 : 0;
    }
  }
  return f;
}

ScalarField ScalarField::like() const {
  ScalarField f = *this;
  std::fill(f.values.begin(), f.values.end(), 0.0);
  return f;
}

double ScalarField::sample(Vec2 x) const {
  const double px = (x.x + half_width) / dx() - 0.5;
  const double py = (x.y + half_width) / dy() - 0.5;
  const double fx = std::floor(px), fy = std::floor(py);
  const int i = static_cast<int>(fx), j = static_cast<int>(fy);
  const double ax = px - fx, ay = py - fy;
  auto v = [&](int ii, int jj) {
    if (ii < 0 || jj < 0 || ii >= n_x || jj >= n_y) return 0.0;
    return values[index(ii, jj)];
  };
  if (i < -1 || j < -1 || i >= n_x || j >= n_y) return 0.0;
  const double a = v(i, j) + ax * (v(i + 1, j) - v(i, j));
  const double b = v(i, j + 1) + ax * (v(i + 1, j + 1) - v(i, j + 1));
  return a + ay * (b - a);
}

ScalarField rasterize(const Manifold& model, int n_x, int n_y,
                      const std::function<double(Vec2)>& f, double extent) {
  ScalarField out = ScalarField::over(model, n_x, n_y, extent);
  parallel_for(static_cast<std::size_t>(n_y), [&](std::size_t j) {
    for (int i = 0; i < n_x; ++i) {
      const std::size_t id = out.index(i, static_cast<int>(j));
      if (out.mask[id]) out.values[id] = f(out.center(i, static_cast<int>(j)));
    }
  });
  return out;
}

// ---------------------------------------------------------------- line integrals

double chord_length(const Manifold& model, const ConvexBody& body, const BoundaryRay& w) {
  const auto c = model.ball_crossing(model.ray_to_tangent(w), body.center, body.radius);
  if (!c) return 0.0;
  return c->second - c->first;
}

double chord_length_bisection(const Manifold& model, const ConvexBody& body,
                              const BoundaryRay& w) {
  const UnitTangent v = model.ray_to_tangent(w);
  const double tp = model.exit_time(w);
  const double h = model.radius() / 256.0;
  const int n = std::max(2, static_cast<int>(std::ceil(tp / h)));
  const double dt = tp / n;
  std::vector<Vec2> pts;
  model.sample_geodesic(v, 0.0, dt, n + 1, pts);
  auto f_at = [&](double t) {
    return defining_function(model, body, model.flow_unchecked(v, t).base);
  };
  auto refine = [&](double lo, double hi, bool rising) {
    // rising: f goes from negative to positive across [lo, hi].
    for (int it = 0; it < 200 && hi - lo > 1e-15 * model.radius(); ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool neg = f_at(mid) < 0.0;
      if (neg == rising)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double total = 0.0, entry = -1.0;
  double prev = defining_function(model, body, pts[0]);
  for (int k = 1; k <= n; ++k) {
    const double cur = defining_function(model, body, pts[static_cast<std::size_t>(k)]);
    if (prev >= 0.0 && cur < 0.0) entry = refine((k - 1) * dt, k * dt, false);
    if (prev < 0.0 && cur >= 0.0 && entry >= 0.0) {
      total += refine((k - 1) * dt, k * dt, true) - entry;
      entry = -1.0;
    }
    prev = cur;
  }
  return total;
}

double indicator_line_integral(const Manifold& model, const Phantom& phantom,
                               const BoundaryRay& w) {
  double s = 0.0;
  for (const auto& b : phantom.bodies) s += chord_length(model, b, w);
  return s;
}

double line_integral(const Manifold& model, const std::function<double(Vec2)>& f,
                     const BoundaryRay& w, double step) {
  std::vector<Vec2> buf;
  return simpson_on(model, model.ray_to_tangent(w), 0.0, model.exit_time(w),
                    default_step(model, step), 2, f, buf);
}

double tissue_line_integral(const Manifold& model, const Phantom& phantom, const BoundaryRay& w,
                            double step) {
  const double h = default_step(model, step);
  const UnitTangent v = model.ray_to_tangent(w);
  std::vector<Vec2> buf;
  if (!model.is_constant_curvature()) {
    return simpson_on(model, v, 0.0, model.exit_time(w), h, 2,
                      [&](Vec2 x) { return tissue_at(model, phantom, x); }, buf);
  }
  // Each bump only over its support interval, where its profile is smooth.
  double total = 0.0;
  for (const auto& bump : phantom.tissue) {
    const auto c = model.ball_crossing(v, bump.center, bump.width);
    if (!c) continue;
    total += simpson_on(model, v, c->first, c->second, h, 16,
                        [&](Vec2 x) { return bump_profile(bump, bump_distance(model, x, bump.center)); },
                        buf);
  }
  return total;
}

double field_line_integral(const Manifold& model, const ScalarField& f, const BoundaryRay& w,
                           double step) {
  std::vector<Vec2> buf;
  return simpson_on(model, model.ray_to_tangent(w), 0.0, model.exit_time(w),
                    default_step(model, step), 2, [&](Vec2 x) { return f.sample(x); }, buf);
}

namespace {

template <class RayFn>
SinogramGrid forward_rows(const Manifold& model, int n_beta, int n_phi, RayFn&& fn) {
  SinogramGrid g = SinogramGrid::zeros(model, n_beta, n_phi);
  parallel_for(static_cast<std::size_t>(n_beta), [&](std::size_t k) {
    std::vector<Vec2> buf;
    for (int l = 0; l < n_phi; ++l)
      g.at(static_cast<int>(k), l) = fn(g.ray(static_cast<int>(k), l), buf);
  });
  return g;
}

}  // namespace

SinogramGrid forward_indicator(const Manifold& model, const Phantom& phantom, int n_beta,
                               int n_phi) {
  return forward_rows(model, n_beta, n_phi, [&](const BoundaryRay& w, std::vector<Vec2>&) {
    return indicator_line_integral(model, phantom, w);
  });
}

SinogramGrid forward_tissue(const Manifold& model, const Phantom& phantom, int n_beta, int n_phi) {
  return forward_rows(model, n_beta, n_phi, [&](const BoundaryRay& w, std::vector<Vec2>&) {
    return tissue_line_integral(model, phantom, w);
  });
}

SinogramGrid forward_field(const Manifold& model, const ScalarField& f, int n_beta, int n_phi) {
  const double h = default_step(model, 0.0);
  return forward_rows(model, n_beta, n_phi, [&](const BoundaryRay& w, std::vector<Vec2>& buf) {
    return simpson_on(model, model.ray_to_tangent(w), 0.0, model.exit_time(w), h, 2,
                      [&](Vec2 x) { return f.sample(x); }, buf);
  });
}

SinogramGrid forward_function(const Manifold& model, const std::function<double(Vec2)>& f,
                              int n_beta, int n_phi) {
  const double h = default_step(model, 0.0);
  return forward_rows(model, n_beta, n_phi, [&](const BoundaryRay& w, std::vector<Vec2>& buf) {
    return simpson_on(model, model.ray_to_tangent(w), 0.0, model.exit_time(w), h, 2, f, buf);
  });
}

// ---------------------------------------------------------------- adjoint

Backprojector::Backprojector(const Manifold& model, const ScalarField& raster, int n_beta,
                             int n_phi, BackprojectorOptions opt)
    : model_(model), raster_(raster.like()), n_beta_(n_beta), n_phi_(n_phi), opt_(opt) {
  require_grid(n_beta, n_phi);
  if (opt_.n_psi < 1) throw DomainError("backprojection needs at least one direction");
  if (opt_.exterior && !model.is_constant_curvature())
    throw DomainError("exterior backprojection needs a constant-curvature model");
  if (static_cast<double>(n_beta) * n_phi >= static_cast<double>(kMiss))
    throw DomainError("sinogram grid too large");
  for (std::size_t c = 0; c < raster_.values.size(); ++c)
    if (active(c)) cells_.push_back(c);
  if (!opt_.cache) return;
  const std::size_t np = static_cast<std::size_t>(opt_.n_psi);
  cache_.resize(cells_.size() * np);
  parallel_for(cells_.size(), [&](std::size_t ci) {
    const std::size_t c = cells_[ci];
    const int i = static_cast<int>(c % raster_.n_x), j = static_cast<int>(c / raster_.n_x);
    const Vec2 x = raster_.center(i, j);
    const bool inside = raster_.mask[c] != 0;
    for (std::size_t p = 0; p < np; ++p) {
      const auto w = ray_for(x, kTwoPi * p / opt_.n_psi, inside);
      cache_[ci * np + p] = w ? stencil(*w) : Stencil{kMiss, 0.0f, 0.0f};
    }
  });
}

bool Backprojector::active(std::size_t cell) const {
  if (raster_.mask[cell]) return true;
  return opt_.exterior && raster_.measure[cell] > 0.0;
}

std::optional<BoundaryRay> Backprojector::ray_for(Vec2 x, double psi, bool inside) const {
  if (model_.is_constant_curvature()) return model_.entry_ray({x, psi});
  if (!inside) return std::nullopt;
  return model_.footpoint({x, psi});
}

Backprojector::Stencil Backprojector::stencil(const BoundaryRay& w) const {
  const StencilParts s = stencil_parts(n_beta_, n_phi_, w.beta, w.phi);
  return {static_cast<std::uint32_t>(s.kb * n_phi_ + s.il), static_cast<float>(s.fb),
          static_cast<float>(s.fp)};
}

ScalarField Backprojector::apply(const SinogramGrid& g) const {
  if (g.n_beta != n_beta_ || g.n_phi != n_phi_)
    throw ShapeMismatch("backprojector built for a different sinogram grid");
  ScalarField out = raster_.like();
  const std::size_t np = static_cast<std::size_t>(opt_.n_psi);
  const double scale = kTwoPi / opt_.n_psi;
  const std::uint32_t last_row = static_cast<std::uint32_t>((n_beta_ - 1) * n_phi_);
  const double* v = g.values.data();
  auto eval = [&](const Stencil& s) {
    if (s.index == kMiss) return 0.0;
    const double* r0 = v + s.index;
    const double* r1 = s.index >= last_row ? r0 - last_row : r0 + n_phi_;
    const double a = r0[0] + s.fp * (r0[1] - r0[0]);
    const double b = r1[0] + s.fp * (r1[1] - r1[0]);
    return a + s.fb * (b - a);
  };
  parallel_for(cells_.size(), [&](std::size_t ci) {
    const std::size_t c = cells_[ci];
    double acc = 0.0;
    if (opt_.cache) {
      const Stencil* st = &cache_[ci * np];
      for (std::size_t p = 0; p < np; ++p) acc += eval(st[p]);
    } else {
      const int i = static_cast<int>(c % raster_.n_x), j = static_cast<int>(c / raster_.n_x);
      const Vec2 x = raster_.center(i, j);
      const bool inside = raster_.mask[c] != 0;
      for (std::size_t p = 0; p < np; ++p) {
        const auto w = ray_for(x, kTwoPi * p / opt_.n_psi, inside);
        if (w) acc += eval(stencil(*w));
      }
    }
    out.values[c] = scale * acc;
  });
  return out;
}

ScalarField adjoint(const Manifold& model, const SinogramGrid& g, const ScalarField& raster,
                    int n_psi) {
  BackprojectorOptions opt;
  opt.n_psi = n_psi;
  opt.cache = false;
  return Backprojector(model, raster, g.n_beta, g.n_phi, opt).apply(g);
}

// ---------------------------------------------------------------- pairings

double inner_product_sino(const SinogramGrid& a, const SinogramGrid& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("sinogram shapes differ");
  std::vector<double> terms(a.values.size());
  for (int k = 0; k < a.n_beta; ++k)
    for (int l = 0; l < a.n_phi; ++l) {
      const std::size_t id = static_cast<std::size_t>(k) * a.n_phi + l;
      terms[id] = a.values[id] * b.values[id] * a.cell_measure(k, l);
    }
  return pairwise_sum(terms);
}

double inner_product_field(const ScalarField& a, const ScalarField& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("field shapes differ");
  std::vector<double> terms(a.values.size(), 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (a.mask[i]) terms[i] = a.values[i] * b.values[i] * a.measure[i];
  return pairwise_sum(terms);
}

}  // namespace geoxray
