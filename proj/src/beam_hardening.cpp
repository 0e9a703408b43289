#include "geoxray/beam_hardening.hpp"

#include <array>
#include <cmath>

#include "geoxray/errors.hpp"
#include "geoxray/parallel.hpp"

namespace geoxray {

namespace {

constexpr int kNodes = 64;

struct GaussLegendre {
  std::array<double, kNodes> x{};
  std::array<double, kNodes> w{};

  GaussLegendre() {
    // Newton iteration on P_n from the Chebyshev-like initial guesses.
    for (int i = 0; i < kNodes / 2; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (kNodes + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= kNodes; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = kNodes * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      x[kNodes - 1 - i] = -z;
      w[i] = w[kNodes - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre gl;
  return gl;
}

}  // namespace

std::string to_string(Provenance p) {
  return p == Provenance::Quadrature ? "quadrature" : "closed_form";
}

double log_sinhc(double u) {
  const double a = std::abs(u);
  if (a < 1e-8) return a * a / 6.0;
  if (a < 1.0) {
    // sinh(u)/u - 1 = sum_{k>=1} u^{2k} / (2k+1)!
    const double u2 = a * a;
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 30; ++k) {
      term *= u2 / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return std::log1p(sum);
  }
  if (a < 20.0) return std::log(std::sinh(a) / a);
  return a - std::log(2.0 * a) + std::log1p(-std::exp(-2.0 * a));
}

double p_ma_closed_form(double u) { return -log_sinhc(u); }

double p_ma_quadrature(double u) {
  // The nodes are symmetric, so each pair contributes cosh(u x) - 1
  // = 2 sinh^2(u x / 2) to (1/2) int exp(-u x) dx - 1 without cancellation.
  const GaussLegendre& gl = gauss_legendre();
  double excess = 0.0;
  for (int i = 0; i < kNodes / 2; ++i) {
    const double s = std::sinh(0.5 * u * gl.x[i]);
    excess += gl.w[i] * 2.0 * s * s;
  }
  return -std::log1p(excess);
}

double series_coefficient(int l) {
  if (l <= 0 || l > 8) throw DomainError("series coefficient index must be in 1..8");
  // log(1 + g(x)) with g_k = 1/(2k+1)!, x = u^2; k f_k = k g_k - sum_j j f_j g_{k-j}.
  std::array<double, 9> g{}, f{};
  double fact = 1.0;
  for (int k = 1; k <= 8; ++k) {
    fact *= (2.0 * k) * (2.0 * k + 1.0);
    g[k] = 1.0 / fact;
  }
  for (int k = 1; k <= l; ++k) {
    double acc = k * g[k];
    for (int j = 1; j < k; ++j) acc -= j * f[j] * g[k - j];
    f[k] = acc / k;
  }
  return -f[l];
}

MeasurementSet measure_from_sinograms(const SinogramGrid& tissue, const SinogramGrid& indicator,
                                      double alpha, const SpectralModel& spectral,
                                      Provenance provenance) {
  if (!tissue.same_shape(indicator)) throw ShapeMismatch("tissue and indicator sinograms differ");
  spectral.validate();
  MeasurementSet m;
  m.tissue = tissue;
  m.u = indicator.like();
  m.P_MA = indicator.like();
  m.P = indicator.like();
  m.provenance = provenance;
  const double ae = alpha * spectral.epsilon;
  parallel_for(tissue.values.size(), [&](std::size_t i) {
    const double u = ae * indicator.values[i];
    const double pma = provenance == Provenance::Quadrature ? p_ma_quadrature(u) : p_ma_closed_form(u);
    m.u.values[i] = u;
    m.P_MA.values[i] = pma;
    m.P.values[i] = tissue.values[i] + pma;
  });
  return m;
}

namespace {

MeasurementSet measure(const Manifold& model, const Phantom& phantom, const SpectralModel& spectral,
                       int n_beta, int n_phi, Provenance prov) {
  const SinogramGrid t = forward_tissue(model, phantom, n_beta, n_phi);
  const SinogramGrid d = forward_indicator(model, phantom, n_beta, n_phi);
  return measure_from_sinograms(t, d, phantom.alpha, spectral, prov);
}

}  // namespace

MeasurementSet measure_closed_form(const Manifold& model, const Phantom& phantom,
                                   const SpectralModel& spectral, int n_beta, int n_phi) {
  return measure(model, phantom, spectral, n_beta, n_phi, Provenance::ClosedForm);
}

MeasurementSet measure_quadrature(const Manifold& model, const Phantom& phantom,
                                  const SpectralModel& spectral, int n_beta, int n_phi) {
  return measure(model, phantom, spectral, n_beta, n_phi, Provenance::Quadrature);
}

SinogramGrid p_ma(const MeasurementSet& m) {
  if (!m.P.same_shape(m.tissue)) throw ShapeMismatch("measurement sinograms differ in shape");
  SinogramGrid out = m.P.like();
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = m.P.values[i] - m.tissue.values[i];
  return out;
}

}  // namespace geoxray
