#pragma once

#include <string>

#include "geoxray/phantom.hpp"
#include "geoxray/xray.hpp"

namespace geoxray {

enum class Provenance { Quadrature, ClosedForm };

std::string to_string(Provenance p);

struct MeasurementSet {
  SinogramGrid P;
  SinogramGrid P_MA;
  /// alpha * epsilon * X[1_D]
  SinogramGrid u;
  /// X[f_E0]
  SinogramGrid tissue;
  Provenance provenance = Provenance::ClosedForm;
};

/// log(sinh u / u), accurate for all u (even in u).
double log_sinhc(double u);

/// -log(sinh u / u): the metal part of the polychromatic log measurement.
double p_ma_closed_form(double u);
/// -log((1/2) int_{-1}^{1} exp(-u x) dx) by 64-point Gauss-Legendre.
double p_ma_quadrature(double u);

/// B_l of -log(sinh u / u) = sum_l B_l u^{2l}, 1 <= l <= 8.
double series_coefficient(int l);

/// Measurements from precomputed X[f_E0] and X[1_D].
MeasurementSet measure_from_sinograms(const SinogramGrid& tissue, const SinogramGrid& indicator,
                                      double alpha, const SpectralModel& spectral,
                                      Provenance provenance);

MeasurementSet measure_closed_form(const Manifold& model, const Phantom& phantom,
                                   const SpectralModel& spectral, int n_beta, int n_phi);
MeasurementSet measure_quadrature(const Manifold& model, const Phantom& phantom,
                                  const SpectralModel& spectral, int n_beta, int n_phi);

/// P - X[f_E0] elementwise.
SinogramGrid p_ma(const MeasurementSet& m);

}  // namespace geoxray
