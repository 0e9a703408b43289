#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "geoxray/manifold.hpp"
#include "geoxray/phantom.hpp"

namespace geoxray {

/// Function on the fan grid beta_k = 2 pi k / n_beta,
/// phi_l = -pi/2 + pi (l + 1/2) / n_phi, stored row-major in beta.
struct SinogramGrid {
  int n_beta = 0;
  int n_phi = 0;
  std::vector<double> values;
  /// Boundary length element per beta row (part of the dmu cell measure).
  std::vector<double> arc;

  static SinogramGrid zeros(const Manifold& model, int n_beta, int n_phi);
  SinogramGrid like() const;

  double d_beta() const { return kTwoPi / n_beta; }
  double d_phi() const { return kPi / n_phi; }
  double beta(int k) const { return d_beta() * k; }
  double phi(int l) const { return -0.5 * kPi + d_phi() * (l + 0.5); }
  BoundaryRay ray(int k, int l) const { return {beta(k), phi(l)}; }
  /// Santalo density cos(phi).
  double weight(int l) const;
  double cell_measure(int k, int l) const;

  double& at(int k, int l) { return values[static_cast<std::size_t>(k) * n_phi + l]; }
  double at(int k, int l) const { return values[static_cast<std::size_t>(k) * n_phi + l]; }

  /// Bilinear interpolation, periodic in beta and clamped in phi.
  double interpolate(double beta, double phi) const;
  bool same_shape(const SinogramGrid& o) const { return n_beta == o.n_beta && n_phi == o.n_phi; }
};

/// Raster on the chart square [-half_width, half_width]^2 with cell centers
/// x_i = -half_width + (i + 1/2) dx. mask marks cells whose center lies in M.
struct ScalarField {
  int n_x = 0;
  int n_y = 0;
  double half_width = 1.0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  /// dv_g of each cell: area density at the center times dx dy.
  std::vector<double> measure;

  /// extent scales the half-width relative to the chart radius of M.
  static ScalarField over(const Manifold& model, int n_x, int n_y, double extent = 1.0);
  ScalarField like() const;

  double dx() const { return 2.0 * half_width / n_x; }
  double dy() const { return 2.0 * half_width / n_y; }
  Vec2 center(int i, int j) const {
    return {-half_width + (i + 0.5) * dx(), -half_width + (j + 0.5) * dy()};
  }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n_x + i; }
  double& at(int i, int j) { return values[index(i, j)]; }
  double at(int i, int j) const { return values[index(i, j)]; }
  /// Bilinear interpolation of the values (zero beyond the raster).
  double sample(Vec2 x) const;
  bool same_shape(const ScalarField& o) const {
    return n_x == o.n_x && n_y == o.n_y && half_width == o.half_width;
  }
};

/// Fills every masked cell with f(center); unmasked cells are zero.
ScalarField rasterize(const Manifold& model, int n_x, int n_y,
                      const std::function<double(Vec2)>& f, double extent = 1.0);

/// Length of gamma_w inside the body (closed-form intersection).
double chord_length(const Manifold& model, const ConvexBody& body, const BoundaryRay& w);
/// Same quantity by bracketing and bisection on f_j along the geodesic.
double chord_length_bisection(const Manifold& model, const ConvexBody& body,
                              const BoundaryRay& w);

/// X[1_D](w): sum of chord lengths over the (disjoint) bodies.
double indicator_line_integral(const Manifold& model, const Phantom& phantom,
                               const BoundaryRay& w);

/// Composite Simpson quadrature of f along gamma_w with step about `step`
/// (default R_M / 256).
double line_integral(const Manifold& model, const std::function<double(Vec2)>& f,
                     const BoundaryRay& w, double step = 0.0);
double tissue_line_integral(const Manifold& model, const Phantom& phantom, const BoundaryRay& w,
                            double step = 0.0);
double field_line_integral(const Manifold& model, const ScalarField& f, const BoundaryRay& w,
                           double step = 0.0);

SinogramGrid forward_indicator(const Manifold& model, const Phantom& phantom, int n_beta,
                               int n_phi);
SinogramGrid forward_tissue(const Manifold& model, const Phantom& phantom, int n_beta, int n_phi);
SinogramGrid forward_field(const Manifold& model, const ScalarField& f, int n_beta, int n_phi);
SinogramGrid forward_function(const Manifold& model, const std::function<double(Vec2)>& f,
                              int n_beta, int n_phi);

struct BackprojectorOptions {
  int n_psi = 360;
  /// Precompute interpolation stencils (12 bytes per cell and direction).
  bool cache = true;
  /// Also backproject at cells outside M along geodesics that meet M
  /// (constant-curvature models).
  bool exterior = false;
};

/// Adjoint X^T g(x) = (2 pi / n_psi) sum_psi g~(F(x, psi)) on a fixed raster.
class Backprojector {
 public:
  Backprojector(const Manifold& model, const ScalarField& raster, int n_beta, int n_phi,
                BackprojectorOptions opt = {});

  ScalarField apply(const SinogramGrid& g) const;
  const ScalarField& raster() const { return raster_; }
  int n_psi() const { return opt_.n_psi; }

 private:
  struct Stencil {
    std::uint32_t index;  // lower corner; UINT32_MAX when the geodesic misses M
    float fb;
    float fp;
  };
  Stencil stencil(const BoundaryRay& w) const;
  bool active(std::size_t cell) const;
  std::optional<BoundaryRay> ray_for(Vec2 x, double psi, bool inside) const;

  Manifold model_;
  ScalarField raster_;
  int n_beta_;
  int n_phi_;
  BackprojectorOptions opt_;
  std::vector<std::size_t> cells_;
  std::vector<Stencil> cache_;
};

ScalarField adjoint(const Manifold& model, const SinogramGrid& g, const ScalarField& raster,
                    int n_psi = 360);

/// sum g1 g2 dmu over the fan grid.
double inner_product_sino(const SinogramGrid& a, const SinogramGrid& b);
/// sum f1 f2 dv_g over masked cells.
double inner_product_field(const ScalarField& a, const ScalarField& b);

}  // namespace geoxray
