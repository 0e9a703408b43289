#include <cmath>
#include <random>

#include "doctest.h"
#include "geoxray/errors.hpp"
#include "geoxray/reconstruction.hpp"

using namespace geoxray;

namespace {

constexpr int kRaster = 128;
constexpr int kBeta = 360;
constexpr int kPhi = 180;

Phantom smooth_phantom(const Manifold& m) {
  const double R = m.radius();
  Phantom ph;
  ph.alpha = 1.0;
  ph.tissue.push_back({m.from_normal_coordinates({0.2 * R, -0.1 * R}), 0.5 * R, 1.0});
  ph.tissue.push_back({m.from_normal_coordinates({-0.3 * R, 0.25 * R}), 0.3 * R, 0.5});
  return ph;
}

ScalarField truth_of(const Manifold& m, const Phantom& ph, int n) {
  return rasterize(m, n, n, [&](Vec2 x) { return tissue_at(m, ph, x); });
}

// Relative L2 (dv_g) difference over cells within `inner` of the chart radius.
double rel_error(const Manifold& m, const ScalarField& a, const ScalarField& b, double inner = 1.0) {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < a.n_y; ++j)
    for (int i = 0; i < a.n_x; ++i) {
      const std::size_t id = a.index(i, j);
      if (!a.mask[id] || a.center(i, j).norm() > inner * m.chart_radius()) continue;
      const double d = a.values[id] - b.values[id];
      num += d * d * a.measure[id];
      den += b.values[id] * b.values[id] * a.measure[id];
    }
  return std::sqrt(num / den);
}

double max_abs(const ScalarField& f) {
  double v = 0.0;
  for (double x : f.values) v = std::max(v, std::abs(x));
  return v;
}

ReconstructionPlan plan_for(ReconMethod method, int n = kRaster) {
  ReconstructionPlan p;
  p.method = method;
  p.n_x = p.n_y = n;
  return p;
}

ScalarField random_smooth(const Manifold& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double rc = m.chart_radius();
  std::vector<std::array<double, 4>> bumps;
  for (int k = 0; k < 6; ++k) bumps.push_back({u(rng) * rc, u(rng) * rc, 0.15 * rc + 0.1 * rc * (u(rng) + 0.5), u(rng)});
  return rasterize(m, kRaster, kRaster, [&](Vec2 x) {
    double v = 0.0;
    for (const auto& b : bumps) v += b[3] * std::exp(-((x.x - b[0]) * (x.x - b[0]) + (x.y - b[1]) * (x.y - b[1])) / (b[2] * b[2]));
    return v;
  });
}

}  // namespace

TEST_CASE("plan validation and parsing") {
  CHECK(parse_recon_method("lambda_fbp") == ReconMethod::LambdaFbp);
  CHECK(parse_recon_method("cg_normal") == ReconMethod::CgNormal);
  CHECK_THROWS_AS(parse_recon_method("art"), DomainError);
  CHECK(parse_preconditioner("none") == Preconditioner::None);
  ReconstructionPlan p = plan_for(ReconMethod::LambdaFbp);
  CHECK_NOTHROW(p.validate(Manifold::euclidean(1.0)));
  CHECK_THROWS_AS(p.validate(Manifold::constant_curvature(-1.0, 2.0)), DomainError);
  p.method = ReconMethod::CgNormal;
  p.rel_tol = 1.0;
  CHECK_THROWS_AS(p.validate(Manifold::euclidean(1.0)), DomainError);
  p.rel_tol = 0.0;
  CHECK_THROWS_AS(p.validate(Manifold::euclidean(1.0)), DomainError);
}

TEST_CASE("square-root Laplacian of a Gaussian") {
  // Lambda exp(-|x|^2 / 2s^2) at the origin equals sqrt(pi/2) / s.
  const int n = 256;
  const double hw = 1.0, dx = 2.0 * hw / n, s = 0.1;
  const double x0 = -hw + (n / 2 + 0.5) * dx;  // a cell center
  std::vector<double> v(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = -hw + (i + 0.5) * dx - x0, y = -hw + (j + 0.5) * dx - x0;
      v[j * n + i] = std::exp(-(x * x + y * y) / (2 * s * s));
    }
  apply_sqrt_laplacian(v, n, n, dx, dx, 0.8, 2);
  // Periodic images of the r^-3 tail shift the value by about 1e-4 relative.
  CHECK(v[(n / 2) * n + n / 2] == doctest::Approx(std::sqrt(kPi / 2) / s).epsilon(5e-4));
}

TEST_CASE("apodization window") {
  const Manifold m = Manifold::euclidean(1.0);
  const ScalarField r = ScalarField::over(m, 64, 64);
  const ScalarField w = apodization_window(m, r, 2.0);
  for (std::size_t i = 0; i < w.values.size(); ++i) {
    CHECK(w.values[i] >= 0.0);
    CHECK(w.values[i] <= 1.0);
    if (!r.mask[i]) CHECK(w.values[i] == 0.0);
  }
  CHECK(w.at(32, 32) == 1.0);
}

TEST_CASE("normal operator: symmetry, positivity, equivariance") {
  for (const Manifold& m : {Manifold::euclidean(1.0), Manifold::constant_curvature(1.0, 1.2),
                            Manifold::constant_curvature(-1.0, 2.0)}) {
    const Reconstructor rec(m, plan_for(ReconMethod::CgNormal), kBeta, kPhi);
    const ScalarField f = random_smooth(m, 1), h = random_smooth(m, 2);
    const ScalarField nf = rec.normal_apply(f), nh = rec.normal_apply(h);
    const double a = inner_product_field(nf, h), b = inner_product_field(f, nh);
    CHECK(std::abs(a - b) / std::max(std::abs(a), std::abs(b)) < 1e-3);
    CHECK(inner_product_field(nf, f) > 0.0);
    CHECK(inner_product_field(nh, h) > 0.0);

    // Quarter-turn of a centered, non-radial input.
    const double rc = m.chart_radius();
    const auto g = [&](Vec2 x) { return std::exp(-((x.x - 0.3 * rc) * (x.x - 0.3 * rc) + x.y * x.y) / (0.04 * rc * rc)); };
    const int n = kRaster;
    const ScalarField u = rasterize(m, n, n, g);
    const ScalarField ur = rasterize(m, n, n, [&](Vec2 x) { return g({x.y, -x.x}); });
    const ScalarField nu = rec.normal_apply(u), nur = rec.normal_apply(ur);
    double dev = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) dev = std::max(dev, std::abs(nur.at(i, j) - nu.at(j, n - 1 - i)));
    CHECK(dev < 1e-6 * max_abs(nu));
  }
}

TEST_CASE("lambda FBP closed loop, localization and linearity") {
  const Manifold m = Manifold::euclidean(1.0);
  const Phantom ph = smooth_phantom(m);
  const SinogramGrid g = forward_tissue(m, ph, kBeta, kPhi);
  const Reconstructor rec(m, plan_for(ReconMethod::LambdaFbp), kBeta, kPhi);
  const ScalarField f = rec.lambda_fbp(g);
  CHECK(rel_error(m, f, truth_of(m, ph, kRaster)) < 0.05);

  SUBCASE("linearity") {
    const SinogramGrid g2 = forward_function(m, [](Vec2 x) { return x.x * x.x; }, kBeta, kPhi);
    SinogramGrid s = g;
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = 2.0 * g.values[i] - 3.0 * g2.values[i];
    const ScalarField fs = rec.lambda_fbp(s), f2 = rec.lambda_fbp(g2);
    double worst = 0.0;
    for (std::size_t i = 0; i < fs.values.size(); ++i)
      worst = std::max(worst, std::abs(fs.values[i] - (2.0 * f.values[i] - 3.0 * f2.values[i])));
    CHECK(worst < 1e-12 * max_abs(fs));
  }

  SUBCASE("narrow bump peak within one cell") {
    Phantom d;
    d.alpha = 1.0;
    const Vec2 c{0.31, -0.47};
    d.tissue.push_back({c, 4.0 * 2.0 / kRaster, 1.0});
    const ScalarField fd = rec.lambda_fbp(forward_tissue(m, d, kBeta, kPhi));
    std::size_t best = 0;
    for (std::size_t i = 0; i < fd.values.size(); ++i)
      if (fd.values[i] > fd.values[best]) best = i;
    const Vec2 p = fd.center(static_cast<int>(best % kRaster), static_cast<int>(best / kRaster));
    CHECK(std::abs(p.x - c.x) <= fd.dx());
    CHECK(std::abs(p.y - c.y) <= fd.dy());
  }
}

TEST_CASE("CG closed loop on every model") {
  for (const Manifold& m : {Manifold::euclidean(1.0), Manifold::constant_curvature(1.0, 1.2),
                            Manifold::constant_curvature(-1.0, 2.0)}) {
    CAPTURE(m.describe());
    const Phantom ph = smooth_phantom(m);
    const SinogramGrid g = forward_tissue(m, ph, kBeta, kPhi);
    const Reconstructor rec(m, plan_for(ReconMethod::CgNormal), kBeta, kPhi);
    const CgResult res = rec.cg_invert(g);
    CHECK(res.converged);
    CHECK(res.history.size() <= 51);
    for (std::size_t k = 1; k < res.history.size(); ++k) CHECK(res.history[k] <= res.history[k - 1]);
    CHECK(res.history.back() <= rec.plan().rel_tol);
    CHECK(rel_error(m, res.field, truth_of(m, ph, kRaster)) < 0.08);

    // Replaying the recorded polynomial on the same data reproduces the solve.
    const ScalarField again = rec.cg_replay(res.steps, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < again.values.size(); ++i)
      worst = std::max(worst, std::abs(again.values[i] - res.field.values[i]));
    CHECK(worst < 1e-12 * max_abs(res.field));

    if (m.is_euclidean()) {
      const ScalarField fbp =
          Reconstructor(m, plan_for(ReconMethod::LambdaFbp), kBeta, kPhi).lambda_fbp(g);
      CHECK(rel_error(m, res.field, fbp, 0.9) < 0.03);
    }
  }
}

TEST_CASE("zero data gives a zero field") {
  const Manifold m = Manifold::constant_curvature(-1.0, 2.0);
  const Reconstructor rec(m, plan_for(ReconMethod::CgNormal, 64), 180, 90);
  const CgResult res = rec.cg_invert(SinogramGrid::zeros(m, 180, 90));
  CHECK(res.converged);
  CHECK(max_abs(res.field) == 0.0);
}

TEST_CASE("iteration cap leaves the solve unconverged") {
  const Manifold m = Manifold::euclidean(1.0);
  ReconstructionPlan p = plan_for(ReconMethod::CgNormal, 64);
  p.rel_tol = 1e-12;
  p.max_iters = 2;
  const Reconstructor rec(m, p, 90, 45);
  const CgResult res = rec.cg_invert(forward_tissue(m, smooth_phantom(m), 90, 45));
  CHECK_FALSE(res.converged);
  CHECK(res.history.size() == 3);
  CHECK(res.steps.size() == 2);
}

TEST_CASE("f_CT splits into the tissue and metal reconstructions") {
  const Manifold m = Manifold::euclidean(1.0);
  Phantom ph = smooth_phantom(m);
  ph.bodies.push_back({{0.35, 0.0}, 0.1, 0});
  ph.bodies.push_back({{-0.35, 0.0}, 0.1, 1});
  ph.alpha = 2.0;
  const SpectralModel spec{1.0, 0.1};
  const MeasurementSet ms = measure_closed_form(m, ph, spec, 180, 90);
  for (ReconMethod method : {ReconMethod::LambdaFbp, ReconMethod::CgNormal}) {
    const Reconstructor rec(m, plan_for(method, 64), 180, 90);
    const ReconstructedPair pr = reconstruct_pair(rec, ms);
    const LinearInverse inv(rec, ms.P_MA);  // the polynomial reconstruct_pair records
    const ScalarField fe0 = inv.apply(ms.tissue);
    double worst = 0.0;
    for (std::size_t i = 0; i < fe0.values.size(); ++i)
      worst = std::max(worst, std::abs(pr.f_ct.values[i] - fe0.values[i] - pr.f_ma.values[i]));
    CHECK(worst < 1e-10 * max_abs(pr.f_ct));
  }

  // Without metal the artifact reconstruction vanishes.
  ph.bodies.clear();
  const MeasurementSet clean = measure_closed_form(m, ph, spec, 180, 90);
  const Reconstructor rec(m, plan_for(ReconMethod::CgNormal, 64), 180, 90);
  const ReconstructedPair pr = reconstruct_pair(rec, clean);
  CHECK(max_abs(pr.f_ma) < 1e-8 * max_abs(pr.f_ct));
}
