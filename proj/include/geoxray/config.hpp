#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoxray/artifact.hpp"
#include "geoxray/manifold.hpp"
#include "geoxray/phantom.hpp"
#include "geoxray/reconstruction.hpp"

namespace geoxray {

/// Scenario file contents. The format is a TOML subset: [section] headers,
/// key = value lines, '#' comments; values are numbers, "strings", true/false,
/// flat numeric arrays or arrays of numeric arrays.
struct ScenarioConfig {
  struct ModelSection {
    std::string kind = "constant_curvature";  // or "conformal"
    double K = 0.0;
    double R_M = 1.0;
    // conformal models
    double chart_radius = 1.0;
    double offset = 0.0;
    double quadratic = 0.0;
    std::vector<ConformalFactor::Bump> bumps;
  } model;

  struct PhantomSection {
    /// "normal": centers are exp_0 normal coordinates; "chart": raw chart points.
    std::string coordinates = "normal";
    double alpha = 1.0;
    std::vector<ConvexBody> bodies;
    std::vector<TissueBump> tissue;
  } phantom;

  SpectralModel spectral;

  struct GridsSection {
    int n_beta = 720;
    int n_phi = 360;
    int n_x = 160;
    int n_y = 160;
  } grids;

  ReconstructionPlan recon;

  struct VerifySection {
    RidgeOptions ridge;
    double min_ratio = 5.0;
    double min_capture = 0.9;
    bool amplitude = true;
    std::vector<double> alpha_eps{0.05, 0.1, 0.2};
    double slope = 2.0;
    double slope_tol = 0.15;
    double residual_slope = 4.0;
    double residual_slope_tol = 0.3;
  } verify;

  std::string output_dir = "out";
  std::uint64_t seed = 0;
  std::string source;
};

/// Parses scenario text; throws ConfigError with the offending line number.
/// The physical content is validated as part of the parse.
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<string>");
ScenarioConfig load_config(const std::string& path);

/// Validated objects built from a configuration.
struct Scenario {
  ScenarioConfig config;
  Manifold model;
  /// Bodies and bumps with chart-coordinate centers.
  Phantom phantom;
};

/// Throws ConfigError when the model, phantom, spectral model or plan is invalid.
Scenario build_scenario(const ScenarioConfig& config);

}  // namespace geoxray
