#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geoxray/artifact.hpp"
#include "geoxray/xray.hpp"

namespace geoxray {

/// Round-trip exact decimal form (%.17g).
std::string format_double(double v);

/// Header "n_beta,n_phi", the two sizes, then one row of n_phi values per beta.
void write_sinogram_csv(const std::string& path, const SinogramGrid& g);
/// Values and sizes only; `arc` is left empty.
SinogramGrid read_sinogram_csv(const std::string& path);

/// Header "n_x,n_y,half_width", the sizes, then one row of n_x values per j.
void write_field_csv(const std::string& path, const ScalarField& f);
struct FieldData {
  int n_x = 0;
  int n_y = 0;
  double half_width = 0.0;
  std::vector<double> values;
};
FieldData read_field_csv(const std::string& path);

/// 16-bit grayscale preview; the linear min-max scaling goes to path + ".scale".
/// Rows run from the top of the image, i.e. from the largest y.
void write_pgm(const std::string& path, const std::vector<double>& values, int width, int height);
void write_field_pgm(const std::string& path, const ScalarField& f);
void write_sinogram_pgm(const std::string& path, const SinogramGrid& g);

struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> samples;  // row-major, top row first
  double min = 0.0;
  double max = 0.0;

  /// Sample mapped back through the recorded scaling.
  double value(std::size_t i) const;
};
PgmImage read_pgm(const std::string& path);

void write_locus_csv(const std::string& path, const ArtifactLocus& locus);
void write_tangents_csv(const std::string& path, const std::vector<TangentGeodesic>& t);
void write_sigma_csv(const std::string& path, const std::vector<SigmaCurve>& curves);

/// Ordered "key = value" lines.
using Report = std::vector<std::pair<std::string, std::string>>;
std::string format_report(const Report& r);
void write_text(const std::string& path, const std::string& text);

}  // namespace geoxray
