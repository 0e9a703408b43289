#include "geoxray/artifact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoxray/errors.hpp"
#include "geoxray/parallel.hpp"

namespace geoxray {

UnitTangent body_boundary_normal(const Manifold& model, const ConvexBody& body, double theta) {
  return model.flow_unchecked({body.center, wrap_angle(theta)}, body.radius);
}

SigmaCurve sigma_curve(const Manifold& model, const ConvexBody& body, int n_samples) {
  if (n_samples < 3) throw DomainError("sigma_curve needs at least 3 samples");
  SigmaCurve c;
  c.left.resize(n_samples + 1);
  c.right.resize(n_samples + 1);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
    const UnitTangent n = body_boundary_normal(model, body, kTwoPi * i / n_samples);
    c.left[i] = model.footpoint({n.base, wrap_angle(n.psi + 0.5 * kPi)});
    c.right[i] = model.footpoint({n.base, wrap_angle(n.psi - 0.5 * kPi)});
  });
  c.left[n_samples] = c.left[0];
  c.right[n_samples] = c.right[0];
  return c;
}

double sigma_distance_cells(const SigmaCurve& sigma, const BoundaryRay& w, double d_beta,
                            double d_phi) {
  // Point-to-segment distance in the scaled (beta / d_beta, phi / d_phi) plane.
  double best = std::numeric_limits<double>::infinity();
  for (const auto* curve : {&sigma.left, &sigma.right}) {
    for (std::size_t i = 0; i + 1 < curve->size(); ++i) {
      const BoundaryRay& a = (*curve)[i];
      const BoundaryRay& b = (*curve)[i + 1];
      const Vec2 pa{wrap_signed(a.beta - w.beta) / d_beta, (a.phi - w.phi) / d_phi};
      const Vec2 ab{wrap_signed(b.beta - a.beta) / d_beta, (b.phi - a.phi) / d_phi};
      const double len2 = ab.norm2();
      const double t = len2 > 0.0 ? std::clamp(-pa.dot(ab) / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, (pa + ab * t).norm());
    }
  }
  return best;
}

double TangentGeodesic::Residuals::max() const {
  return std::max({std::abs(f_j), std::abs(df_j), std::abs(f_k), std::abs(df_k), transport});
}

namespace {

struct PairSystem {
  const Manifold& model;
  const ConvexBody& bj;
  const ConvexBody& bk;

  UnitTangent tangent(double theta) const {
    const UnitTangent n = body_boundary_normal(model, bj, theta);
    return {n.base, wrap_angle(n.psi + 0.5 * kPi)};
  }

  std::array<double, 2> residual(double theta, double s) const {
    const UnitTangent q = model.flow_unchecked(tangent(theta), s);
    return {defining_function(model, bk, q.base),
            defining_gradient(model, bk, q.base).dot(q.direction())};
  }
};

double inf_norm(const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); }

struct Root {
  double theta;
  double s;
  double residual;
};

// Newton on (theta, s) with s kept inside [s_lo, s_hi]; trial points outside
// the chart domain count as failed steps.
std::optional<Root> newton(const PairSystem& sys, double theta, double s, double scale, double s_lo,
                           double s_hi) try {
  auto r = sys.residual(theta, s);
  double nr = inf_norm(r);
  const double ht = 1e-7, hs = 1e-7 * scale;
  for (int it = 0; it < 60 && nr > 1e-14 * scale; ++it) {
    const auto rtp = sys.residual(theta + ht, s), rtm = sys.residual(theta - ht, s);
    const auto rsp = sys.residual(theta, s + hs), rsm = sys.residual(theta, s - hs);
    const double j00 = (rtp[0] - rtm[0]) / (2 * ht), j10 = (rtp[1] - rtm[1]) / (2 * ht);
    const double j01 = (rsp[0] - rsm[0]) / (2 * hs), j11 = (rsp[1] - rsm[1]) / (2 * hs);
    const double det = j00 * j11 - j01 * j10;
    if (!(std::abs(det) > 0.0)) return std::nullopt;
    const double dt = -(j11 * r[0] - j01 * r[1]) / det;
    const double ds = -(-j10 * r[0] + j00 * r[1]) / det;
    double lam = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, lam *= 0.5) {
      const double s_new = s + lam * ds;
      if (s_new < s_lo || s_new > s_hi) continue;
      std::array<double, 2> rn;
      try {
        rn = sys.residual(theta + lam * dt, s_new);
      } catch (const DomainError&) {
        continue;
      }
      if (inf_norm(rn) < nr) {
        theta += lam * dt;
        s += lam * ds;
        r = rn;
        nr = inf_norm(rn);
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(nr < 1e-10)) return std::nullopt;
  return Root{wrap_angle(theta), s, nr};
} catch (const DomainError&) {
  return std::nullopt;
}

}  // namespace

std::vector<TangentGeodesic> common_tangents(const Manifold& model, const ConvexBody& body_j,
                                             const ConvexBody& body_k, int j, int k) {
  if (!model.is_constant_curvature())
    throw DomainError("common tangents need a constant-curvature model");
  if (model.distance(body_j.center, body_k.center) <= body_j.radius + body_k.radius)
    throw PreconditionError("common tangents need disjoint bodies");
  const PairSystem sys{model, body_j, body_k};
  const double scale = model.radius();
  constexpr int kSeeds = 32;
  std::vector<std::optional<Root>> found(kSeeds);
  parallel_for(kSeeds, [&](std::size_t i) {
    const double theta = kTwoPi * i / kSeeds;
    const UnitTangent v = sys.tangent(theta);
    const ExitTimes ex = model.exit_times(v);
    // Closest approach to body k along a coarse scan of the chord.
    double best_s = 0.0, best_f = std::numeric_limits<double>::infinity();
    for (int m = 0; m <= 64; ++m) {
      const double s = ex.minus + (ex.plus - ex.minus) * m / 64.0;
      const double f = defining_function(model, body_k, model.flow_unchecked(v, s).base);
      if (f < best_f) {
        best_f = f;
        best_s = s;
      }
    }
    auto root = newton(sys, theta, best_s, scale, ex.minus - scale, ex.plus + scale);
    if (root && root->s >= ex.minus && root->s <= ex.plus) found[i] = root;
  });
  std::vector<Root> roots;
  for (const auto& r : found) {
    if (!r) continue;
    const bool dup = std::any_of(roots.begin(), roots.end(), [&](const Root& o) {
      return std::abs(wrap_signed(o.theta - r->theta)) < 1e-6 && std::abs(o.s - r->s) < 1e-6 * scale;
    });
    if (!dup) roots.push_back(*r);
  }
  if (roots.empty()) throw SolverError("common_tangents: Newton failed from every seed");
  std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) { return a.theta < b.theta; });

  std::vector<TangentGeodesic> out;
  for (const Root& r : roots) {
    TangentGeodesic t;
    t.v = sys.tangent(r.theta);
    t.s = r.s;
    t.j = j;
    t.k = k;
    t.ray = model.footpoint(t.v);
    const UnitTangent q = model.flow_unchecked(t.v, r.s);
    const Vec2 nu_j = defining_gradient(model, body_j, t.v.base);
    const Vec2 nu_k = defining_gradient(model, body_k, q.base);
    const GeodesicArc arc(model, t.v, model.radius() / 64.0);
    const Vec2 moved = parallel_transport(arc, 0.0, r.s, nu_j).frame;
    t.sign = moved.dot(nu_k) > 0.0 ? 1 : -1;
    t.residuals.f_j = defining_function(model, body_j, t.v.base);
    t.residuals.df_j = nu_j.dot(t.v.direction());
    t.residuals.f_k = defining_function(model, body_k, q.base);
    t.residuals.df_k = nu_k.dot(q.direction());
    t.residuals.transport = (moved - nu_k * t.sign).norm();
    out.push_back(t);
  }
  return out;
}

ScalarField polyline_distance(const std::vector<std::vector<Vec2>>& traces,
                              const ScalarField& raster) {
  struct Seg {
    Vec2 a, d;
    double len2;
  };
  std::vector<Seg> segs;
  for (const auto& tr : traces)
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) segs.push_back({tr[i], tr[i + 1] - tr[i], (tr[i + 1] - tr[i]).norm2()});
  ScalarField out = raster.like();
  parallel_for(static_cast<std::size_t>(raster.n_y), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < raster.n_x; ++i) {
      const Vec2 x = raster.center(i, j);
      double best = std::numeric_limits<double>::infinity();
      for (const Seg& s : segs) {
        const Vec2 p = x - s.a;
        const double t = s.len2 > 0.0 ? std::clamp(p.dot(s.d) / s.len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - s.d * t).norm2());
      }
      out.at(i, j) = std::sqrt(best);
    }
  });
  return out;
}

ArtifactLocus artifact_locus(const Manifold& model, const Phantom& phantom,
                             const ScalarField& raster, double step, double shift) {
  ArtifactLocus loc;
  const auto& bodies = phantom.bodies;
  for (std::size_t a = 0; a < bodies.size(); ++a)
    for (std::size_t b = a + 1; b < bodies.size(); ++b) {
      auto t = common_tangents(model, bodies[a], bodies[b], static_cast<int>(a), static_cast<int>(b));
      for (auto& g : t) {
        for (std::size_t m = 0; m < bodies.size(); ++m) {
          if (m == a || m == b) continue;
          const ExitTimes ex = model.exit_times(g.v);
          const auto hit = model.ball_crossing(g.v, bodies[m].center, bodies[m].radius);
          if (hit && hit->second > ex.minus && hit->first < ex.plus) g.occluded = true;
        }
        loc.tangents.push_back(g);
      }
    }
  if (step <= 0.0) step = 0.25 * std::min(raster.dx(), raster.dy());
  // Metric step whose chart length never exceeds `step`.
  const double rc = model.chart_radius();
  const double min_factor =
      std::min(model.conformal_factor({0.0, 0.0}), model.conformal_factor({rc, 0.0}));
  const double h_metric = step * min_factor;
  for (const auto& g : loc.tangents) {
    const ExitTimes ex = model.exit_times(g.v);
    // Both tangency points (t = 0 and t = s) are exact samples of the trace.
    std::array<double, 4> knots{ex.minus, 0.0, g.s, ex.plus};
    std::sort(knots.begin(), knots.end());
    std::vector<Vec2> pts, piece;
    for (int p = 0; p < 3; ++p) {
      const double len = knots[p + 1] - knots[p];
      if (len <= 0.0) continue;
      const int n = std::max(2, static_cast<int>(std::ceil(len / h_metric)) + 1);
      model.sample_geodesic(g.v, knots[p], len / (n - 1), n, piece);
      pts.insert(pts.end(), piece.begin() + (pts.empty() ? 0 : 1), piece.end());
    }
    if (shift != 0.0) {
      std::vector<Vec2> moved(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2 d = pts[std::min(i + 1, pts.size() - 1)] - pts[i == 0 ? 0 : i - 1];
        moved[i] = pts[i] + d.perp() * (shift * rc / d.norm());
      }
      pts = std::move(moved);
    }
    loc.traces.push_back(std::move(pts));
  }
  loc.distance = polyline_distance(loc.traces, raster);
  return loc;
}

// ---------------------------------------------------------------- ridge scoring

RidgeMeasure parse_ridge_measure(const std::string& s) {
  if (s == "magnitude") return RidgeMeasure::Magnitude;
  if (s == "laplacian") return RidgeMeasure::Laplacian;
  if (s == "hessian") return RidgeMeasure::Hessian;
  throw DomainError("unknown ridge measure '" + s + "'");
}

std::string to_string(RidgeMeasure m) {
  switch (m) {
    case RidgeMeasure::Magnitude: return "magnitude";
    case RidgeMeasure::Laplacian: return "laplacian";
    case RidgeMeasure::Hessian: return "hessian";
  }
  return "?";
}

namespace {

std::vector<double> gaussian_smooth(const std::vector<double>& v, int nx, int ny, double sigma) {
  if (sigma <= 0.0) return v;
  const int rad = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * rad + 1);
  for (int i = -rad; i <= rad; ++i) k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double ks = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& x : k) x /= ks;
  std::vector<double> tmp(v.size(), 0.0), out(v.size(), 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int d = -rad; d <= rad; ++d) {
        const int ii = i + d;
        if (ii >= 0 && ii < nx) acc += k[d + rad] * v[static_cast<std::size_t>(j) * nx + ii];
      }
      tmp[static_cast<std::size_t>(j) * nx + i] = acc;
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int d = -rad; d <= rad; ++d) {
        const int jj = j + d;
        if (jj >= 0 && jj < ny) acc += k[d + rad] * tmp[static_cast<std::size_t>(jj) * nx + i];
      }
      out[static_cast<std::size_t>(j) * nx + i] = acc;
    }
  return out;
}

double local_factor(const Manifold& model, Vec2 x) { return model.conformal_factor(x); }

bool near_body(const Manifold& model, const Phantom& phantom, Vec2 x, double guard_chart) {
  const double g = guard_chart * local_factor(model, x);
  for (const auto& b : phantom.bodies)
    if (defining_function(model, b, x) <= g) return true;
  return false;
}

std::vector<std::uint8_t> interior_mask(const Manifold& model, const ScalarField& raster,
                                        double band_cells) {
  std::vector<std::uint8_t> keep(raster.values.size(), 0);
  const double cell = std::max(raster.dx(), raster.dy());
  for (int j = 0; j < raster.n_y; ++j)
    for (int i = 0; i < raster.n_x; ++i) {
      const std::size_t id = raster.index(i, j);
      keep[id] = raster.mask[id] && model.chart_radius() - raster.center(i, j).norm() > band_cells * cell;
    }
  return keep;
}

// Indices of the top `fraction` of values among the selected cells (ties
// broken by index so the selection is deterministic).
std::vector<std::size_t> top_cells(const std::vector<double>& v, const std::vector<std::uint8_t>& sel,
                                   double fraction) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (sel[i]) idx.push_back(i);
  if (idx.empty()) return idx;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * idx.size())));
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), [&](std::size_t a, std::size_t b) {
    return v[a] != v[b] ? v[a] > v[b] : a < b;
  });
  idx.resize(n);
  return idx;
}

RidgeStats tube_stats(const std::vector<double>& a, const std::vector<std::uint8_t>& keep,
                      const std::vector<std::uint8_t>& tube, double fraction) {
  std::vector<double> in, out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!keep[i]) continue;
    (tube[i] ? in : out).push_back(a[i]);
  }
  RidgeStats s;
  s.mean_in = pairwise_sum(in) / static_cast<double>(in.size());
  s.mean_out = pairwise_sum(out) / static_cast<double>(out.size());
  s.ratio = s.mean_out > 0.0 ? s.mean_in / s.mean_out : std::numeric_limits<double>::infinity();
  const auto top = top_cells(a, keep, fraction);
  std::size_t hit = 0;
  for (std::size_t i : top) hit += tube[i];
  s.capture = static_cast<double>(hit) / static_cast<double>(top.size());
  return s;
}

std::vector<double> absolute(const std::vector<double>& v) {
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  return a;
}

}  // namespace

ScalarField ridge_strength(const ScalarField& f, RidgeMeasure measure, double smoothing_cells) {
  ScalarField out = f.like();
  if (measure == RidgeMeasure::Magnitude) {
    out.values = absolute(f.values);
    return out;
  }
  const int nx = f.n_x, ny = f.n_y;
  const std::vector<double> s = gaussian_smooth(f.values, nx, ny, smoothing_cells);
  const double dx = f.dx(), dy = f.dy();
  auto at = [&](int i, int j) { return s[static_cast<std::size_t>(j) * nx + i]; };
  for (int j = 1; j + 1 < ny; ++j)
    for (int i = 1; i + 1 < nx; ++i) {
      const double c = at(i, j);
      const double fxx = (at(i + 1, j) - 2 * c + at(i - 1, j)) / (dx * dx);
      const double fyy = (at(i, j + 1) - 2 * c + at(i, j - 1)) / (dy * dy);
      double v;
      if (measure == RidgeMeasure::Laplacian) {
        v = std::abs(fxx + fyy);
      } else {
        const double fxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * dx * dy);
        const double half_tr = 0.5 * (fxx + fyy);
        const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - (fxx * fyy - fxy * fxy)));
        v = std::max(std::abs(half_tr + disc), std::abs(half_tr - disc));
      }
      out.at(i, j) = v;
    }
  return out;
}

std::vector<std::uint8_t> guard_mask(const Manifold& model, const Phantom& phantom,
                                     const ScalarField& raster, const RidgeOptions& opt) {
  std::vector<std::uint8_t> keep = interior_mask(model, raster, opt.boundary_band_cells);
  const double cell = std::max(raster.dx(), raster.dy());
  for (int j = 0; j < raster.n_y; ++j)
    for (int i = 0; i < raster.n_x; ++i) {
      const std::size_t id = raster.index(i, j);
      if (keep[id] && near_body(model, phantom, raster.center(i, j), opt.guard_cells * cell)) keep[id] = 0;
    }
  return keep;
}

RidgeReport ridge_alignment_score(const Manifold& model, const ScalarField& f_ma,
                                  const ArtifactLocus& locus, const Phantom& phantom,
                                  const RidgeOptions& opt, double scale) {
  if (opt.tube_cells < 2.0) throw DomainError("tube width must be at least 2 cells");
  RidgeReport rep;
  rep.measure = to_string(opt.measure);
  if (locus.empty()) {
    double peak = 0.0;
    for (double v : f_ma.values) peak = std::max(peak, std::abs(v));
    if (peak <= 1e-8 * scale) {
      rep.trivial = true;
      return rep;
    }
    throw DomainError("empty artifact locus but f_MA is not numerically zero");
  }
  if (!locus.distance.same_shape(f_ma)) throw ShapeMismatch("locus raster differs from f_MA");
  const std::vector<std::uint8_t> keep = guard_mask(model, phantom, f_ma, opt);
  const double width = opt.tube_cells * std::max(f_ma.dx(), f_ma.dy());
  std::vector<std::uint8_t> tube(keep.size(), 0);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    tube[i] = locus.distance.values[i] <= width;
    (tube[i] ? rep.n_tube : rep.n_out) += 1;
  }
  if (rep.n_tube == 0 || rep.n_out == 0) throw DomainError("empty tube or complement under the guard mask");
  rep.stats = tube_stats(ridge_strength(f_ma, opt.measure, opt.smoothing_cells).values, keep, tube,
                         opt.top_fraction);
  rep.magnitude = tube_stats(absolute(f_ma.values), keep, tube, opt.top_fraction);
  rep.n_top = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(opt.top_fraction * (rep.n_tube + rep.n_out))));
  return rep;
}

LocalizationReport boundary_localization(const Manifold& model, const ScalarField& f_ma,
                                         const Phantom& phantom, const RidgeOptions& opt) {
  const std::vector<std::uint8_t> keep = interior_mask(model, f_ma, opt.boundary_band_cells);
  const ScalarField a = ridge_strength(f_ma, opt.measure, opt.smoothing_cells);
  const auto top = top_cells(a.values, keep, opt.top_fraction);
  const double cell = std::max(f_ma.dx(), f_ma.dy());
  LocalizationReport rep;
  rep.n_top = top.size();
  std::size_t near = 0;
  for (std::size_t id : top) {
    const Vec2 x = f_ma.center(static_cast<int>(id % f_ma.n_x), static_cast<int>(id / f_ma.n_x));
    near += near_body(model, phantom, x, opt.guard_cells * cell);
  }
  rep.fraction_near_bodies = top.empty() ? 0.0 : static_cast<double>(near) / top.size();
  return rep;
}

double peak_tube_amplitude(const Manifold& model, const ScalarField& f, const ArtifactLocus& locus,
                           const Phantom& phantom, const RidgeOptions& opt) {
  const std::vector<std::uint8_t> keep = guard_mask(model, phantom, f, opt);
  const double width = opt.tube_cells * std::max(f.dx(), f.dy());
  double peak = 0.0;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i] && locus.distance.values[i] <= width) peak = std::max(peak, std::abs(f.values[i]));
  return peak;
}

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeMismatch("fit_log_slope: length mismatch");
  if (x.size() < 3) throw DomainError("fit_log_slope needs at least three samples");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_log_slope needs positive samples");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw DomainError("fit_log_slope needs distinct abscissae");
  return sxy / sxx;
}

std::vector<ScalarField> quadratic_residuals(const std::vector<double>& a,
                                             const std::vector<ScalarField>& fields) {
  if (a.size() != fields.size()) throw ShapeMismatch("quadratic_residuals: length mismatch");
  if (a.size() < 2) throw DomainError("quadratic_residuals needs at least two samples");
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return a[p] < a[q]; });
  const double a1 = a[order[0]], a2 = a[order[1]];
  if (!(a1 > 0.0) || !(a2 > a1)) throw DomainError("quadratic_residuals needs distinct positive samples");
  const ScalarField& f1 = fields[order[0]];
  const ScalarField& f2 = fields[order[1]];
  const double den = a1 * a1 * a2 * a2 * (a2 * a2 - a1 * a1);
  const double w1 = std::pow(a2, 4) / den, w2 = std::pow(a1, 4) / den;
  std::vector<ScalarField> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ScalarField r = fields[i];
    const double ai2 = a[i] * a[i];
    for (std::size_t c = 0; c < r.values.size(); ++c)
      r.values[c] -= ai2 * (w1 * f1.values[c] - w2 * f2.values[c]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace geoxray
