#include "geoxray/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoxray/errors.hpp"

namespace geoxray {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  return in;
}

std::vector<double> parse_row(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i <= line.size()) {
    std::size_t j = line.find(',', i);
    if (j == std::string::npos) j = line.size();
    double v = 0.0;
    const auto [p, ec] = std::from_chars(line.data() + i, line.data() + j, v);
    if (ec != std::errc() || p != line.data() + j) throw Error("malformed number in '" + path + "'");
    out.push_back(v);
    i = j + 1;
  }
  return out;
}

void write_rows(std::ofstream& out, const std::vector<double>& v, std::size_t n_rows,
                std::size_t n_cols) {
  std::string line;
  for (std::size_t r = 0; r < n_rows; ++r) {
    line.clear();
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (c) line += ',';
      line += format_double(v[r * n_cols + c]);
    }
    line += '\n';
    out << line;
  }
}

std::vector<double> read_rows(std::ifstream& in, std::size_t n_rows, std::size_t n_cols,
                              const std::string& path) {
  std::vector<double> v;
  v.reserve(n_rows * n_cols);
  std::string line;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (!std::getline(in, line)) throw Error("truncated file '" + path + "'");
    const auto row = parse_row(line, path);
    if (row.size() != n_cols) throw Error("wrong row length in '" + path + "'");
    v.insert(v.end(), row.begin(), row.end());
  }
  return v;
}

std::vector<double> read_header(std::ifstream& in, const std::string& expect,
                                const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != expect) throw Error("'" + path + "' lacks header " + expect);
  if (!std::getline(in, line)) throw Error("truncated file '" + path + "'");
  return parse_row(line, path);
}

}  // namespace

std::string format_double(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_sinogram_csv(const std::string& path, const SinogramGrid& g) {
  auto out = open_out(path);
  out << "n_beta,n_phi\n" << g.n_beta << ',' << g.n_phi << '\n';
  write_rows(out, g.values, g.n_beta, g.n_phi);
}

SinogramGrid read_sinogram_csv(const std::string& path) {
  auto in = open_in(path);
  const auto h = read_header(in, "n_beta,n_phi", path);
  if (h.size() != 2 || h[0] < 1 || h[1] < 1) throw Error("bad sinogram sizes in '" + path + "'");
  SinogramGrid g;
  g.n_beta = static_cast<int>(h[0]);
  g.n_phi = static_cast<int>(h[1]);
  g.values = read_rows(in, g.n_beta, g.n_phi, path);
  return g;
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  auto out = open_out(path);
  out << "n_x,n_y,half_width\n" << f.n_x << ',' << f.n_y << ',' << format_double(f.half_width) << '\n';
  write_rows(out, f.values, f.n_y, f.n_x);
}

FieldData read_field_csv(const std::string& path) {
  auto in = open_in(path);
  const auto h = read_header(in, "n_x,n_y,half_width", path);
  if (h.size() != 3 || h[0] < 1 || h[1] < 1) throw Error("bad field sizes in '" + path + "'");
  FieldData f;
  f.n_x = static_cast<int>(h[0]);
  f.n_y = static_cast<int>(h[1]);
  f.half_width = h[2];
  f.values = read_rows(in, f.n_y, f.n_x, path);
  return f;
}

void write_pgm(const std::string& path, const std::vector<double>& values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw ShapeMismatch("pgm size");
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    const auto [a, b] = std::minmax_element(values.begin(), values.end());
    lo = *a;
    hi = *b;
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::string data;
  data.reserve(values.size() * 2);
  for (int r = height - 1; r >= 0; --r)
    for (int c = 0; c < width; ++c) {
      const double t = (values[static_cast<std::size_t>(r) * width + c] - lo) / span;
      const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
      data += static_cast<char>(s >> 8);
      data += static_cast<char>(s & 0xff);
    }
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  auto side = open_out(path + ".scale");
  side << "min = " << format_double(lo) << "\nmax = " << format_double(hi) << '\n';
}

void write_field_pgm(const std::string& path, const ScalarField& f) {
  write_pgm(path, f.values, f.n_x, f.n_y);
}

void write_sinogram_pgm(const std::string& path, const SinogramGrid& g) {
  // phi across, beta down.
  std::vector<double> flipped(g.values.size());
  for (int k = 0; k < g.n_beta; ++k)
    for (int l = 0; l < g.n_phi; ++l)
      flipped[static_cast<std::size_t>(g.n_beta - 1 - k) * g.n_phi + l] = g.at(k, l);
  write_pgm(path, flipped, g.n_phi, g.n_beta);
}

double PgmImage::value(std::size_t i) const {
  const double span = max > min ? max - min : 1.0;
  return min + span * samples[i] / 65535.0;
}

PgmImage read_pgm(const std::string& path) {
  auto in = open_in(path);
  std::string magic;
  int maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 65535 || img.width < 1 || img.height < 1)
    throw Error("'" + path + "' is not a 16-bit P5 image");
  in.get();
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::string raw(n * 2, '\0');
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) throw Error("truncated '" + path + "'");
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    img.samples[i] = static_cast<std::uint16_t>((static_cast<unsigned char>(raw[2 * i]) << 8) |
                                                static_cast<unsigned char>(raw[2 * i + 1]));
  auto side = open_in(path + ".scale");
  std::string key, eq, val;
  while (side >> key >> eq >> val) {
    const double v = std::stod(val);
    if (key == "min") img.min = v;
    if (key == "max") img.max = v;
  }
  return img;
}

void write_locus_csv(const std::string& path, const ArtifactLocus& locus) {
  auto out = open_out(path);
  out << "trace,x,y\n";
  for (std::size_t t = 0; t < locus.traces.size(); ++t)
    for (const Vec2& p : locus.traces[t])
      out << t << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

void write_tangents_csv(const std::string& path, const std::vector<TangentGeodesic>& ts) {
  auto out = open_out(path);
  out << "j,k,sign,x,y,psi,s,beta,phi,occluded,max_residual\n";
  for (const auto& t : ts)
    out << t.j << ',' << t.k << ',' << t.sign << ',' << format_double(t.v.base.x) << ','
        << format_double(t.v.base.y) << ',' << format_double(t.v.psi) << ',' << format_double(t.s)
        << ',' << format_double(t.ray.beta) << ',' << format_double(t.ray.phi) << ','
        << (t.occluded ? 1 : 0) << ',' << format_double(t.residuals.max()) << '\n';
}

void write_sigma_csv(const std::string& path, const std::vector<SigmaCurve>& curves) {
  auto out = open_out(path);
  out << "body,branch,beta,phi\n";
  for (std::size_t b = 0; b < curves.size(); ++b) {
    for (const auto& w : curves[b].left)
      out << b << ",left," << format_double(w.beta) << ',' << format_double(w.phi) << '\n';
    for (const auto& w : curves[b].right)
      out << b << ",right," << format_double(w.beta) << ',' << format_double(w.phi) << '\n';
  }
}

std::string format_report(const Report& r) {
  std::string s;
  for (const auto& [k, v] : r) s += k + " = " + v + "\n";
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace geoxray
