#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geoxray/config.hpp"
#include "geoxray/errors.hpp"
#include "geoxray/io.hpp"
#include "geoxray/pipeline.hpp"

using namespace geoxray;

namespace {

const char* kBase = R"(# comment line
[model]
kind = "constant_curvature"
K = 0.0
R_M = 4.0   # trailing comment

[phantom]
alpha = 1.0
bodies = [
  [-1.5, 0.0, 0.5],
  [1.5, 0.0, 0.5],
]
tissue = [[0.4, 1.2, 1.6, 0.5]]

[spectral]
E0 = 1.0
epsilon = 0.1

[grids]
n_beta = 64
n_phi = 32
n_x = 32
n_y = 32

[recon]
method = "lambda_fbp"

[verify]
alpha_eps = [0.05, 0.1, 0.2]

[output]
dir = "out"
seed = 7
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto p = s.find(from);
  REQUIRE(p != std::string::npos);
  return s.replace(p, from.size(), to);
}

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("geoxray_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parses every section") {
  const ScenarioConfig c = parse_config(kBase);
  CHECK(c.model.R_M == 4.0);
  REQUIRE(c.phantom.bodies.size() == 2);
  CHECK(c.phantom.bodies[1].center.x == 1.5);
  CHECK(c.phantom.bodies[1].label == 1);
  CHECK(c.phantom.tissue.size() == 1);
  CHECK(c.grids.n_beta == 64);
  CHECK(c.recon.method == ReconMethod::LambdaFbp);
  CHECK(c.recon.n_x == 32);
  CHECK(c.verify.alpha_eps.size() == 3);
  CHECK(c.seed == 7);
  const Scenario s = build_scenario(c);
  CHECK(s.model.is_euclidean());
  CHECK(s.phantom.bodies[0].center.x == doctest::Approx(-1.5));
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line(replace(kBase, "R_M = 4.0", "R_M = four")) == 5);
  CHECK(error_line(replace(kBase, "seed = 7", "seed = 7\ncolour = 1")) == 34);
  CHECK(error_line(replace(kBase, "[grids]", "[grid]")) == 19);
  CHECK(error_line(replace(kBase, "n_x = 32", "n_x = 32.5")) == 22);
  CHECK(error_line(replace(kBase, "n_phi = 32", "n_phi = 32\nn_phi = 16")) == 22);
  CHECK(error_line(replace(kBase, "method = \"lambda_fbp\"", "method = \"sart\"")) == 26);
  CHECK(error_line(replace(kBase, "epsilon = 0.1", "epsilon = [0.1")) == 17);
  // Physical validation: overlapping bodies point at the bodies key.
  CHECK(error_line(replace(kBase, "[1.5, 0.0, 0.5]", "[-1.0, 0.0, 0.5]")) == 9);
  // Lambda-FBP on a curved model.
  std::string cap = replace(kBase, "K = 0.0\nR_M = 4.0", "K = 1.0\nR_M = 1.2");
  cap = replace(cap, "[-1.5, 0.0, 0.5]", "[-0.45, 0.0, 0.15]");
  cap = replace(replace(cap, "[1.5, 0.0, 0.5]", "[0.45, 0.0, 0.15]"), "[[0.4, 1.2, 1.6, 0.5]]", "[]");
  CHECK(error_line(cap) == 26);
  CHECK(error_line(replace(kBase, "K = 0.0\nR_M = 4.0", "K = 1.0\nR_M = 1.6")) > 0);
  CHECK_THROWS_AS(load_config("/nonexistent/scenario.toml"), ConfigError);
}

TEST_CASE("sinogram and field CSV round trips are exact") {
  const auto dir = temp_dir("csv");
  const Manifold m = Manifold::euclidean(2.0);
  SinogramGrid g = SinogramGrid::zeros(m, 12, 6);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = std::sin(0.37 * i) / 3.0 + 1e-300 * i;
  write_sinogram_csv((dir / "g.csv").string(), g);
  const SinogramGrid back = read_sinogram_csv((dir / "g.csv").string());
  CHECK(back.n_beta == 12);
  CHECK(back.n_phi == 6);
  CHECK(back.values == g.values);
  CHECK(slurp(dir / "g.csv").rfind("n_beta,n_phi\n12,6\n", 0) == 0);

  const ScalarField f = rasterize(m, 10, 8, [](Vec2 x) { return std::exp(x.x) / 7.0; });
  write_field_csv((dir / "f.csv").string(), f);
  const FieldData fb = read_field_csv((dir / "f.csv").string());
  CHECK(fb.n_x == 10);
  CHECK(fb.n_y == 8);
  CHECK(fb.half_width == f.half_width);
  CHECK(fb.values == f.values);
}

TEST_CASE("PGM round trip within the recorded scaling") {
  const auto dir = temp_dir("pgm");
  const Manifold m = Manifold::euclidean(1.0);
  const ScalarField f = rasterize(m, 20, 14, [](Vec2 x) { return x.x - 2.0 * x.y * x.y; });
  const std::string path = (dir / "f.pgm").string();
  write_field_pgm(path, f);
  const PgmImage img = read_pgm(path);
  REQUIRE(img.width == 20);
  REQUIRE(img.height == 14);
  const double span = img.max - img.min;
  CHECK(img.min == *std::min_element(f.values.begin(), f.values.end()));
  const std::string raw = slurp(dir / "f.pgm");
  CHECK(raw.rfind("P5\n20 14\n65535\n", 0) == 0);
  for (int j = 0; j < 14; ++j)
    for (int i = 0; i < 20; ++i) {
      const std::size_t row = static_cast<std::size_t>(13 - j);  // top row is the largest y
      CHECK(std::abs(img.value(row * 20 + i) - f.at(i, j)) <= 0.5 * span / 65535.0 + 1e-15);
    }
}

TEST_CASE("phantom command: empty mask without bodies, area with two disks") {
  ScenarioConfig c = parse_config(replace(kBase, "n_x = 32\nn_y = 32", "n_x = 256\nn_y = 256"));
  const auto dir = temp_dir("phantom");
  Report r = cmd_phantom(build_scenario(c), dir.string());
  double area = 0.0;
  for (const auto& [k, v] : r)
    if (k == "metal_area") area = std::stod(v);
  CHECK(area == doctest::Approx(2.0 * kPi * 0.25).epsilon(0.01));
  const FieldData ind = read_field_csv((dir / "indicator.csv").string());
  CHECK(ind.n_x == 256);

  c.phantom.bodies.clear();
  cmd_phantom(build_scenario(c), dir.string());
  const FieldData none = read_field_csv((dir / "indicator.csv").string());
  for (double v : none.values) CHECK(v == 0.0);
}

TEST_CASE("sinogram command is deterministic and centered disks give constant rows") {
  ScenarioConfig c = parse_config(kBase);
  c.phantom.bodies = {{{0.0, 0.0}, 0.8, 0}};
  c.phantom.tissue.clear();
  const Scenario s = build_scenario(c);
  const auto a = temp_dir("sino_a"), b = temp_dir("sino_b");
  cmd_sinogram(s, a.string());
  cmd_sinogram(s, b.string());
  for (const char* name : {"sino_indicator.csv", "sino_indicator.pgm", "sino_tissue.csv", "sinogram.txt"})
    CHECK(slurp(a / name) == slurp(b / name));
  const SinogramGrid g = read_sinogram_csv((a / "sino_indicator.csv").string());
  double drift = 0.0;
  for (int k = 1; k < g.n_beta; ++k)
    for (int l = 0; l < g.n_phi; ++l) drift = std::max(drift, std::abs(g.at(k, l) - g.at(0, l)));
  CHECK(drift < 1e-8);
  // Chord law 2 sqrt(r^2 - (R sin phi)^2).
  for (int l = 0; l < g.n_phi; ++l) {
    const double p = 4.0 * std::sin(g.phi(l));
    CHECK(std::abs(g.at(0, l) - (std::abs(p) < 0.8 ? 2.0 * std::sqrt(0.64 - p * p) : 0.0)) < 1e-6);
  }
}

TEST_CASE("verify on a no-metal scenario is a trivial pass") {
  ScenarioConfig c = parse_config(kBase);
  c.phantom.bodies.clear();
  c.verify.amplitude = false;
  const VerifyResult v = cmd_verify(build_scenario(c), temp_dir("verify").string());
  CHECK(v.pass);
  CHECK(v.trivial);
}
