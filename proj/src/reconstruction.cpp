#include "geoxray/reconstruction.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "geoxray/errors.hpp"
#include "geoxray/parallel.hpp"

namespace geoxray {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double hann_taper(double rho, double start) {
  if (rho <= start) return 1.0;
  if (rho >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (rho - start) / (1.0 - start)));
}

double norm_field(const ScalarField& f) { return std::sqrt(std::max(0.0, inner_product_field(f, f))); }

void axpy(ScalarField& y, double a, const ScalarField& x) {
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

void scale(ScalarField& y, double a) {
  for (double& v : y.values) v *= a;
}

// Embeds src at the center of a grid `factor` times larger. Cells within radius
// r_in (and inside src's mask when masked_only) are copied; everything farther
// out is continued radially as value(r_in x/|x|) r_in/|x|, the decay of a
// backprojection outside the support.
std::vector<double> radial_extension(const ScalarField& src, double r_in, int factor,
                                     bool masked_only) {
  const int nx = factor * src.n_x, ny = factor * src.n_y;
  const double hw = factor * src.half_width;
  const double dx = 2.0 * hw / nx, dy = 2.0 * hw / ny;
  const int ox = (factor - 1) * src.n_x / 2, oy = (factor - 1) * src.n_y / 2;
  std::vector<double> out(static_cast<std::size_t>(nx) * ny, 0.0);
  parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < nx; ++i) {
      const Vec2 x{-hw + (i + 0.5) * dx, -hw + (j + 0.5) * dy};
      const double rad = x.norm();
      const int si = i - ox, sj = j - oy;
      double& o = out[static_cast<std::size_t>(j) * nx + i];
      if (rad < r_in) {
        if (si < 0 || sj < 0 || si >= src.n_x || sj >= src.n_y) continue;
        const std::size_t id = src.index(si, sj);
        if (!masked_only || src.mask[id]) o = src.values[id];
        continue;
      }
      o = src.sample(x * (r_in / rad)) * (r_in / rad);
    }
  });
  return out;
}

}  // namespace

ReconMethod parse_recon_method(const std::string& s) {
  if (s == "lambda_fbp") return ReconMethod::LambdaFbp;
  if (s == "cg_normal" || s == "cg") return ReconMethod::CgNormal;
  throw DomainError("unknown reconstruction method '" + s + "'");
}

Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "none") return Preconditioner::None;
  if (s == "lambda") return Preconditioner::Lambda;
  throw DomainError("unknown preconditioner '" + s + "'");
}

void ReconstructionPlan::validate(const Manifold& model) const {
  if (method == ReconMethod::LambdaFbp && !model.is_euclidean())
    throw DomainError("lambda_fbp requires the Euclidean model");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw DomainError("cg rel_tol must lie in (0, 1)");
  if (max_iters < 1) throw DomainError("cg max_iters must be positive");
  if (n_x < 2 || n_y < 2 || n_x % 2 || n_y % 2) throw DomainError("raster sizes must be even");
  if (n_psi < 1) throw DomainError("n_psi must be positive");
  if (!(taper_start > 0.0 && taper_start < 1.0)) throw DomainError("taper start must lie in (0, 1)");
  if (pad < 1) throw DomainError("pad must be at least 1");
  if (apodization_cells < 0.0) throw DomainError("apodization band must be non-negative");
}

void apply_sqrt_laplacian(std::vector<double>& values, int n_x, int n_y, double dx, double dy,
                          double taper_start, int pad) {
  const int nx = n_x * pad, ny = n_y * pad;
  const int nxc = nx / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(nx) * ny);
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(nxc) * ny);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_2d(ny, nx, in, out, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_2d(ny, nx, out, in, FFTW_ESTIMATE);
  }
  std::fill(in, in + static_cast<std::size_t>(nx) * ny, 0.0);
  for (int j = 0; j < n_y; ++j)
    for (int i = 0; i < n_x; ++i)
      in[static_cast<std::size_t>(j) * nx + i] = values[static_cast<std::size_t>(j) * n_x + i];
  fftw_execute(fwd);
  const double norm = 1.0 / (static_cast<double>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    const int mj = j <= ny / 2 ? j : j - ny;
    const double ky = kTwoPi * mj / (ny * dy);
    for (int i = 0; i < nxc; ++i) {
      const double kx = kTwoPi * i / (nx * dx);
      const double mag = std::hypot(kx, ky);
      const double rho = std::hypot(kx * dx / kPi, ky * dy / kPi);
      const double m = mag * hann_taper(rho, taper_start) * norm;
      fftw_complex& c = out[static_cast<std::size_t>(j) * nxc + i];
      c[0] *= m;
      c[1] *= m;
    }
  }
  fftw_execute(bwd);
  for (int j = 0; j < n_y; ++j)
    for (int i = 0; i < n_x; ++i)
      values[static_cast<std::size_t>(j) * n_x + i] = in[static_cast<std::size_t>(j) * nx + i];
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(in);
  fftw_free(out);
}

ScalarField apodization_window(const Manifold& model, const ScalarField& raster, double cells) {
  ScalarField w = raster.like();
  const double rc = model.chart_radius();
  const double cell = std::min(raster.dx(), raster.dy());
  for (int j = 0; j < raster.n_y; ++j)
    for (int i = 0; i < raster.n_x; ++i) {
      const std::size_t id = raster.index(i, j);
      if (!raster.mask[id]) continue;
      const double d = (rc - raster.center(i, j).norm()) / cell;
      w.values[id] = (cells <= 0.0 || d >= cells) ? 1.0 : 0.5 * (1.0 - std::cos(kPi * d / cells));
    }
  return w;
}

// ---------------------------------------------------------------- Reconstructor

Reconstructor::Reconstructor(const Manifold& model, const ReconstructionPlan& plan, int n_beta,
                             int n_phi)
    : model_(model), plan_(plan), n_beta_(n_beta), n_phi_(n_phi) {
  plan_.validate(model_);
  raster_ = ScalarField::over(model_, plan_.n_x, plan_.n_y);
  window_ = apodization_window(model_, raster_, plan_.apodization_cells);
  BackprojectorOptions opt;
  opt.n_psi = plan_.n_psi;
  opt.cache = plan_.method == ReconMethod::CgNormal;
  bp_ = std::make_unique<Backprojector>(model_, raster_, n_beta_, n_phi_, opt);
}

ScalarField Reconstructor::backproject(const SinogramGrid& g) const { return bp_->apply(g); }

ScalarField Reconstructor::normal_apply(const ScalarField& f) const {
  return bp_->apply(forward_field(model_, f, n_beta_, n_phi_));
}

ScalarField Reconstructor::masked_apodized(ScalarField f) const {
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] *= window_.values[i];
  return f;
}

ScalarField Reconstructor::lambda_fbp(const SinogramGrid& g) const {
  if (!model_.is_euclidean()) throw DomainError("lambda_fbp requires the Euclidean model");
  const int pad = plan_.pad;
  ScalarField ext = ScalarField::over(model_, pad * plan_.n_x, pad * plan_.n_y, pad);
  BackprojectorOptions opt;
  opt.n_psi = plan_.n_psi;
  opt.cache = false;
  opt.exterior = pad > 1;
  ext = Backprojector(model_, ext, g.n_beta, g.n_phi, opt).apply(g);
  // The backprojection decays like 1/r; continuing it avoids the truncation
  // error a hard cut at the padded square would leave in the filtered result.
  const int fx = 2;
  const double r_in = ext.half_width - 2.0 * std::max(ext.dx(), ext.dy());
  std::vector<double> big = radial_extension(ext, r_in, fx, false);
  const int bn_x = fx * ext.n_x, bn_y = fx * ext.n_y;
  apply_sqrt_laplacian(big, bn_x, bn_y, ext.dx(), ext.dy(), plan_.taper_start, 1);
  ScalarField out = raster_.like();
  const int ox = (fx * pad - 1) * plan_.n_x / 2, oy = (fx * pad - 1) * plan_.n_y / 2;
  const double s = 1.0 / (4.0 * kPi);
  for (int j = 0; j < plan_.n_y; ++j)
    for (int i = 0; i < plan_.n_x; ++i)
      out.at(i, j) = s * big[static_cast<std::size_t>(j + oy) * bn_x + (i + ox)];
  return masked_apodized(std::move(out));
}

ScalarField Reconstructor::precondition(const ScalarField& r) const {
  if (plan_.preconditioner == Preconditioner::None) return r;
  const int pad = 2 * std::max(2, plan_.pad);
  const int nx = pad * plan_.n_x;
  const double r_in = model_.chart_radius() - 2.0 * std::max(raster_.dx(), raster_.dy());
  std::vector<double> ext = radial_extension(r, r_in, pad, true);
  apply_sqrt_laplacian(ext, nx, pad * plan_.n_y, raster_.dx(), raster_.dy(), plan_.taper_start, 1);
  const int ox = (pad - 1) * plan_.n_x / 2, oy = (pad - 1) * plan_.n_y / 2;
  ScalarField out = raster_.like();
  const double s = 1.0 / (4.0 * kPi);
  for (int j = 0; j < plan_.n_y; ++j)
    for (int i = 0; i < plan_.n_x; ++i) {
      const std::size_t id = raster_.index(i, j);
      if (!raster_.mask[id]) continue;
      const Vec2 x = raster_.center(i, j);
      out.values[id] = s * std::exp(-model_.log_conformal_factor(x)) *
                       ext[static_cast<std::size_t>(j + oy) * nx + (i + ox)];
    }
  return out;
}

CgResult Reconstructor::cg_invert(const SinogramGrid& g) const {
  CgResult res;
  res.field = raster_.like();
  const ScalarField b = backproject(g);
  const double nb = norm_field(b);
  res.history.push_back(1.0);
  if (nb == 0.0) {
    res.converged = true;
    return res;
  }
  ScalarField r = b;
  std::vector<ScalarField> dirs, images;  // images are orthonormal
  double rel = 1.0;
  int stalled = 0;
  for (int it = 0; it < plan_.max_iters; ++it) {
    ScalarField z = precondition(r);
    ScalarField q = normal_apply(z);
    KrylovStep step;
    for (std::size_t k = 0; k < images.size(); ++k) {
      const double beta = inner_product_field(q, images[k]);
      axpy(q, -beta, images[k]);
      axpy(z, -beta, dirs[k]);
      step.beta.push_back(beta);
    }
    const double nq = norm_field(q);
    if (!(nq > 1e-14 * nb)) throw SolverError("cg_normal: Krylov breakdown", res.history);
    scale(q, 1.0 / nq);
    scale(z, 1.0 / nq);
    const double alpha = inner_product_field(r, q);
    step.norm = nq;
    step.alpha = alpha;
    res.steps.push_back(std::move(step));
    axpy(res.field, alpha, z);
    axpy(r, -alpha, q);
    const double next = norm_field(r) / nb;
    stalled = next > rel * (1.0 - 1e-6) ? stalled + 1 : 0;
    rel = std::min(rel, next);
    res.history.push_back(rel);
    if (rel <= plan_.rel_tol) {
      res.converged = true;
      break;
    }
    if (stalled >= 5) throw SolverError("cg_normal: residual stagnated", res.history);
    dirs.push_back(std::move(z));
    images.push_back(std::move(q));
  }
  res.field = masked_apodized(std::move(res.field));
  return res;
}

ScalarField Reconstructor::cg_replay(const std::vector<KrylovStep>& steps,
                                     const SinogramGrid& g) const {
  ScalarField x = raster_.like();
  ScalarField r = backproject(g);
  std::vector<ScalarField> dirs, images;
  for (std::size_t it = 0; it < steps.size(); ++it) {
    const KrylovStep& step = steps[it];
    ScalarField z = precondition(r);
    ScalarField q = normal_apply(z);
    for (std::size_t k = 0; k < step.beta.size(); ++k) {
      axpy(q, -step.beta[k], images[k]);
      axpy(z, -step.beta[k], dirs[k]);
    }
    scale(q, 1.0 / step.norm);
    scale(z, 1.0 / step.norm);
    axpy(x, step.alpha, z);
    if (it + 1 == steps.size()) break;
    axpy(r, -step.alpha, q);
    dirs.push_back(std::move(z));
    images.push_back(std::move(q));
  }
  return masked_apodized(std::move(x));
}

ScalarField Reconstructor::invert(const SinogramGrid& g) const {
  if (plan_.method == ReconMethod::LambdaFbp) return lambda_fbp(g);
  return cg_invert(g).field;
}

LinearInverse::LinearInverse(const Reconstructor& r, const SinogramGrid& reference) : r_(&r) {
  if (r.plan().method == ReconMethod::CgNormal) solve_ = r.cg_invert(reference);
}

ScalarField LinearInverse::apply(const SinogramGrid& g) const {
  if (r_->plan().method == ReconMethod::LambdaFbp) return r_->lambda_fbp(g);
  return r_->cg_replay(solve_.steps, g);
}

namespace {

bool all_zero(const SinogramGrid& g) {
  return std::all_of(g.values.begin(), g.values.end(), [](double v) { return v == 0.0; });
}

}  // namespace

ReconstructedPair reconstruct_pair(const Reconstructor& r, const MeasurementSet& m) {
  // The polynomial is fitted to P_MA, the small term whose singularities are
  // of interest; the tissue part of P is smooth and needs fewer iterations.
  const bool metal = !all_zero(m.P_MA);
  const LinearInverse inv(r, metal ? m.P_MA : m.P);
  ReconstructedPair out;
  const CgResult& ref = inv.reference_solve();
  out.f_ct = inv.apply(m.P);
  out.f_ma = metal && r.plan().method == ReconMethod::CgNormal ? ref.field : inv.apply(m.P_MA);
  out.history = ref.history;
  out.converged = r.plan().method == ReconMethod::LambdaFbp || ref.converged;
  return out;
}

ScalarField reconstruct_fct(const Reconstructor& r, const MeasurementSet& m) { return r.invert(m.P); }

ScalarField reconstruct_fma(const Reconstructor& r, const MeasurementSet& m) {
  return reconstruct_pair(r, m).f_ma;
}

}  // namespace geoxray
