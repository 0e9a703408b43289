#pragma once

#include <string>
#include <vector>

#include "geoxray/manifold.hpp"
#include "geoxray/phantom.hpp"
#include "geoxray/xray.hpp"

namespace geoxray {

/// Boundary point of a geodesic disk at frame angle theta, with the outward
/// unit normal as its direction.
UnitTangent body_boundary_normal(const Manifold& model, const ConvexBody& body, double theta);

/// Rays F(v) of the unit tangents of dD_j, one closed curve per orientation
/// (psi = nu + pi/2 and psi = nu - pi/2). Each curve has n_samples + 1 entries
/// and repeats its first sample at the end.
struct SigmaCurve {
  std::vector<BoundaryRay> left;
  std::vector<BoundaryRay> right;
};
SigmaCurve sigma_curve(const Manifold& model, const ConvexBody& body, int n_samples);

/// Distance from w to the curve in fan-grid cells (beta periodic).
double sigma_distance_cells(const SigmaCurve& sigma, const BoundaryRay& w, double d_beta,
                            double d_phi);

struct TangentGeodesic {
  /// Tangency point on dD_j with direction nu_j + pi/2.
  UnitTangent v;
  /// gamma_v(s) is the tangency point on dD_k.
  double s = 0.0;
  /// +1 when the transported nu_j equals nu_k, -1 when it equals -nu_k.
  int sign = 0;
  int j = 0;
  int k = 0;
  BoundaryRay ray;
  /// The geodesic also crosses a third body.
  bool occluded = false;

  struct Residuals {
    double f_j = 0.0;
    double df_j = 0.0;
    double f_k = 0.0;
    double df_k = 0.0;
    double transport = 0.0;
    double max() const;
  } residuals;
};

/// Common tangent geodesics of two disjoint bodies by Newton iteration on
/// (theta, s) from 32 seeds; undirected (one entry per geodesic).
std::vector<TangentGeodesic> common_tangents(const Manifold& model, const ConvexBody& body_j,
                                             const ConvexBody& body_k, int j = 0, int k = 1);

struct ArtifactLocus {
  std::vector<TangentGeodesic> tangents;
  /// Chart polylines of the full geodesics through M, one per tangent.
  std::vector<std::vector<Vec2>> traces;
  /// Per-cell chart distance to the nearest trace.
  ScalarField distance;

  bool empty() const { return tangents.empty(); }
};

/// Union over body pairs of the tangent geodesics, traced through M with
/// chart step `step` (default a quarter of the raster cell). `shift` moves
/// every trace sideways by shift * chart radius (negative-control hook).
ArtifactLocus artifact_locus(const Manifold& model, const Phantom& phantom,
                             const ScalarField& raster, double step = 0.0, double shift = 0.0);

/// Distance field of a set of chart polylines on the raster.
ScalarField polyline_distance(const std::vector<std::vector<Vec2>>& traces,
                              const ScalarField& raster);

enum class RidgeMeasure { Magnitude, Laplacian, Hessian };
RidgeMeasure parse_ridge_measure(const std::string& s);
std::string to_string(RidgeMeasure m);

/// Pointwise ridge strength of a field: |f|, |Laplacian of G_sigma * f| or the
/// largest |eigenvalue| of the Hessian of G_sigma * f (sigma in cells).
ScalarField ridge_strength(const ScalarField& f, RidgeMeasure measure, double smoothing_cells);

struct RidgeOptions {
  double tube_cells = 2.0;
  double guard_cells = 3.0;
  /// Cells next to the boundary of M left out of the statistics.
  double boundary_band_cells = 4.0;
  RidgeMeasure measure = RidgeMeasure::Laplacian;
  double smoothing_cells = 0.7;
  double top_fraction = 0.01;
};

/// Cells kept for scoring: inside M beyond the boundary band, and farther than
/// guard_cells (metric cell size) from every body boundary.
std::vector<std::uint8_t> guard_mask(const Manifold& model, const Phantom& phantom,
                                     const ScalarField& raster, const RidgeOptions& opt);

struct RidgeStats {
  double mean_in = 0.0;
  double mean_out = 0.0;
  double ratio = 0.0;
  double capture = 0.0;
};

struct RidgeReport {
  std::string measure;
  RidgeStats stats;
  /// The same statistics on |f_MA| itself.
  RidgeStats magnitude;
  std::size_t n_tube = 0;
  std::size_t n_out = 0;
  std::size_t n_top = 0;
  /// Empty locus with a numerically zero f_MA.
  bool trivial = false;

  bool pass(double min_ratio, double min_capture) const {
    return trivial || (stats.ratio >= min_ratio && stats.capture >= min_capture);
  }
};

/// Tube statistics of f_MA around the locus. `scale` sets what counts as a
/// numerically zero field when the locus is empty.
RidgeReport ridge_alignment_score(const Manifold& model, const ScalarField& f_ma,
                                  const ArtifactLocus& locus, const Phantom& phantom,
                                  const RidgeOptions& opt = {}, double scale = 1.0);

struct LocalizationReport {
  /// Fraction of the top cells lying within guard_cells of some body (or inside it).
  double fraction_near_bodies = 0.0;
  std::size_t n_top = 0;
  bool pass() const { return n_top > 0 && fraction_near_bodies >= 1.0; }
};

/// Where the strongest cells of f_MA sit relative to the bodies.
LocalizationReport boundary_localization(const Manifold& model, const ScalarField& f_ma,
                                         const Phantom& phantom, const RidgeOptions& opt = {});

/// max |f| over the tube cells of the guard mask.
double peak_tube_amplitude(const Manifold& model, const ScalarField& f, const ArtifactLocus& locus,
                           const Phantom& phantom, const RidgeOptions& opt = {});

/// Least-squares slope of log y against log x; needs at least three points.
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Given fields f(a_i) = a_i^2 F1 + a_i^4 F2 + ..., eliminates F2 between the
/// two smallest a_i to estimate F1 and returns f(a_i) - a_i^2 F1 for every i.
std::vector<ScalarField> quadratic_residuals(const std::vector<double>& a,
                                             const std::vector<ScalarField>& fields);

}  // namespace geoxray
