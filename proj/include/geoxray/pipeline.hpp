#pragma once

#include <string>
#include <vector>

#include "geoxray/config.hpp"
#include "geoxray/io.hpp"

namespace geoxray {

/// Each command writes its files into out_dir (created if missing) and
/// returns the lines of its summary report, which is also written as
/// <command>.txt. Outputs depend only on the scenario.
Report cmd_phantom(const Scenario& s, const std::string& out_dir);
Report cmd_sinogram(const Scenario& s, const std::string& out_dir);
Report cmd_measure(const Scenario& s, const std::string& out_dir);
Report cmd_recon(const Scenario& s, const std::string& out_dir);
Report cmd_predict(const Scenario& s, const std::string& out_dir);

struct AmplitudeFit {
  std::vector<double> alpha_eps;
  std::vector<double> peak;
  /// Peak tube amplitude left after removing the fitted (alpha eps)^2 term.
  std::vector<double> residual_peak;
  double slope = 0.0;
  double residual_slope = 0.0;
};

/// Runs measurement and reconstruction at each alpha * epsilon (alpha fixed,
/// epsilon varied) through one fixed linear inverse, and fits log peak |f_MA|
/// in the locus tube against log(alpha eps). Without a locus the peak is
/// taken over all of M.
AmplitudeFit amplitude_scaling_fit(const Scenario& s, const LinearInverse& inverse,
                                   const ArtifactLocus& locus,
                                   const std::vector<double>& alpha_eps);

struct VerifyResult {
  Report report;
  bool pass = false;
  bool trivial = false;
};

/// Ridge alignment (two or more bodies), boundary localization (one body) or
/// the trivial no-metal check, plus the amplitude law when enabled.
/// shift_locus displaces the predicted locus (negative control).
VerifyResult cmd_verify(const Scenario& s, const std::string& out_dir, double shift_locus = 0.0);

/// The amplitude sweep alone, with its table in sweep.csv.
Report cmd_sweep(const Scenario& s, const std::string& out_dir);

}  // namespace geoxray
