#pragma once

#include <memory>
#include <string>
#include <vector>

#include "geoxray/beam_hardening.hpp"
#include "geoxray/xray.hpp"

namespace geoxray {

enum class ReconMethod { LambdaFbp, CgNormal };
enum class Preconditioner { None, Lambda };

ReconMethod parse_recon_method(const std::string& s);
Preconditioner parse_preconditioner(const std::string& s);

struct ReconstructionPlan {
  ReconMethod method = ReconMethod::CgNormal;
  int n_x = 256;
  int n_y = 256;
  int n_psi = 360;
  int max_iters = 50;
  double rel_tol = 1e-3;
  Preconditioner preconditioner = Preconditioner::Lambda;
  /// Hann taper starts at this fraction of the Nyquist frequency.
  double taper_start = 0.8;
  /// Side of the exterior-backprojection / padding domain relative to the raster.
  int pad = 2;
  /// Width of the cosine apodization band at the boundary of M, in cells.
  double apodization_cells = 2.0;

  void validate(const Manifold& model) const;
};

/// Multiplies by |xi| H(|xi|) on the raster's frequency grid, where H is the
/// Hann taper; the array is zero-padded by pad in each direction.
void apply_sqrt_laplacian(std::vector<double>& values, int n_x, int n_y, double dx, double dy,
                          double taper_start, int pad = 1);

/// Cosine ramp from 0 at the boundary of M to 1 at `cells` cells inside.
ScalarField apodization_window(const Manifold& model, const ScalarField& raster, double cells);

/// Coefficients of one minimal-residual iteration, enough to replay it on
/// another right-hand side.
struct KrylovStep {
  std::vector<double> beta;  // orthogonalization against earlier images
  double norm = 0.0;
  double alpha = 0.0;
};

struct CgResult {
  ScalarField field;
  std::vector<double> history;  // relative residual per iteration, starting at 1
  bool converged = false;
  std::vector<KrylovStep> steps;
};

/// Holds the backprojection stencils for one (model, raster, sinogram grid)
/// combination so that repeated inversions reuse them.
class Reconstructor {
 public:
  Reconstructor(const Manifold& model, const ReconstructionPlan& plan, int n_beta, int n_phi);

  const Manifold& model() const { return model_; }
  const ReconstructionPlan& plan() const { return plan_; }
  const ScalarField& raster() const { return raster_; }

  /// X^T g on the raster.
  ScalarField backproject(const SinogramGrid& g) const;
  /// X^T X f.
  ScalarField normal_apply(const ScalarField& f) const;
  /// (1/4 pi) Lambda X^T g with exact exterior backprojection (K = 0 only).
  ScalarField lambda_fbp(const SinogramGrid& g) const;
  /// Right-preconditioned minimal-residual solve of N f = X^T g.
  CgResult cg_invert(const SinogramGrid& g) const;
  /// Applies the Krylov polynomial recorded by an earlier cg_invert to g. The
  /// result is linear in g and reproduces the recorded solve for its own data.
  ScalarField cg_replay(const std::vector<KrylovStep>& steps, const SinogramGrid& g) const;
  /// Applies the plan's inverter.
  ScalarField invert(const SinogramGrid& g) const;
  /// Preconditioner (1/4 pi) e^{-lambda} Lambda applied to a raster field.
  ScalarField precondition(const ScalarField& r) const;

 private:
  ScalarField masked_apodized(ScalarField f) const;

  Manifold model_;
  ReconstructionPlan plan_;
  int n_beta_;
  int n_phi_;
  ScalarField raster_;
  ScalarField window_;
  std::unique_ptr<Backprojector> bp_;
};

/// A fixed linear inverse: Lambda-FBP, or the Krylov polynomial of one CG solve.
class LinearInverse {
 public:
  /// For cg_normal the polynomial is recorded from the solve on `reference`.
  LinearInverse(const Reconstructor& r, const SinogramGrid& reference);
  ScalarField apply(const SinogramGrid& g) const;
  const CgResult& reference_solve() const { return solve_; }

 private:
  const Reconstructor* r_;
  CgResult solve_;
};

struct ReconstructedPair {
  ScalarField f_ct;
  ScalarField f_ma;
  std::vector<double> history;
  bool converged = true;
};

/// f_CT from P and f_MA from P_MA through the same linear inverse (recorded on
/// P_MA, or on P without metal), so that f_CT - Q X^T X[f_E0] = f_MA up to
/// rounding.
ReconstructedPair reconstruct_pair(const Reconstructor& r, const MeasurementSet& m);
ScalarField reconstruct_fct(const Reconstructor& r, const MeasurementSet& m);
ScalarField reconstruct_fma(const Reconstructor& r, const MeasurementSet& m);

}  // namespace geoxray
