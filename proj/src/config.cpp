#include "geoxray/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <variant>

#include "geoxray/errors.hpp"

namespace geoxray {

namespace {

using Row = std::vector<double>;
using Value = std::variant<double, std::string, bool, Row, std::vector<Row>>;

struct Entry {
  Value value;
  int line = 0;
};

class Cursor {
 public:
  Cursor(std::string_view s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool done() {
    skip_ws();
    return i_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return i_ < s_.size() ? s_[i_] : '\0';
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, line_); }

  double number() {
    skip_ws();
    std::size_t j = i_;
    while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '.' ||
                             s_[j] == '-' || s_[j] == '+'))
      ++j;
    std::string tok(s_.substr(i_, j - i_));
    std::erase(tok, '_');
    if (!tok.empty() && tok[0] == '+') tok.erase(0, 1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
      fail("invalid number '" + std::string(s_.substr(i_, j - i_)) + "'");
    i_ = j;
    return v;
  }

  Row row() {
    expect('[');
    Row r;
    if (peek() == ']') {
      ++i_;
      return r;
    }
    for (;;) {
      r.push_back(number());
      const char c = peek();
      ++i_;
      if (c == ']') break;
      if (c != ',') fail("expected ',' or ']' in array");
      if (peek() == ']') {
        ++i_;
        break;
      }
    }
    return r;
  }

  Value value() {
    const char c = peek();
    if (c == '"') {
      ++i_;
      const std::size_t end = s_.find('"', i_);
      if (end == std::string_view::npos) fail("unterminated string");
      std::string out(s_.substr(i_, end - i_));
      i_ = end + 1;
      return out;
    }
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    if (c != '[') return number();
    // Flat array or array of arrays.
    const std::size_t save = i_;
    ++i_;
    if (peek() != '[') {
      i_ = save;
      return row();
    }
    std::vector<Row> rows;
    for (;;) {
      rows.push_back(row());
      const char d = peek();
      ++i_;
      if (d == ']') break;
      if (d != ',') fail("expected ',' or ']' in array");
      if (peek() == ']') {
        ++i_;
        break;
      }
    }
    return rows;
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  int line_;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::set<std::string> kSections{"model", "phantom", "spectral", "grids",
                                      "recon", "verify",  "output"};

class Table {
 public:
  explicit Table(const std::string& text) {
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    // Multi-line arrays are joined until the brackets balance.
    std::string pending;
    int pending_line = 0, depth = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string s = trim(strip_comment(raw));
      if (s.empty()) continue;
      if (depth == 0 && s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
        section = trim(s.substr(1, s.size() - 2));
        if (!kSections.count(section)) throw ConfigError("unknown section [" + section + "]", line);
        if (!seen_sections_.insert(section).second)
          throw ConfigError("duplicate section [" + section + "]", line);
        section_lines_[section] = line;
        continue;
      }
      if (depth == 0) {
        pending = s;
        pending_line = line;
      } else {
        pending += " " + s;
      }
      for (char c : s) depth += (c == '[') - (c == ']');
      if (depth < 0) throw ConfigError("unbalanced ']'", line);
      if (depth > 0) continue;
      add(section, pending, pending_line);
    }
    if (depth != 0) throw ConfigError("unterminated array", pending_line);
  }

  const Entry* find(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  int line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it != entries_.end()) return it->second.line;
    const auto dot = key.find('.');
    const auto s = section_lines_.find(key.substr(0, dot));
    return s == section_lines_.end() ? 0 : s->second;
  }

  void reject_unused() const {
    for (const auto& [k, e] : entries_)
      if (!used_.count(k)) throw ConfigError("unknown key '" + k + "'", e.line);
  }

  template <class T>
  bool get(const std::string& key, T& out);

 private:
  void add(const std::string& section, const std::string& s, int line) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty() || key.find_first_of(" \t[]\"") != std::string::npos)
      throw ConfigError("invalid key '" + key + "'", line);
    Cursor c(std::string_view(s).substr(eq + 1), line);
    Value v = c.value();
    if (!c.done()) c.fail("trailing characters after value");
    const std::string full = section + "." + key;
    if (!entries_.emplace(full, Entry{std::move(v), line}).second)
      throw ConfigError("duplicate key '" + full + "'", line);
  }

  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
  std::set<std::string> seen_sections_;
  std::map<std::string, int> section_lines_;
};

template <>
bool Table::get(const std::string& key, double& out) {
  const Entry* e = find(key);
  if (!e) return false;
  if (!std::holds_alternative<double>(e->value)) throw ConfigError("'" + key + "' must be a number", e->line);
  out = std::get<double>(e->value);
  return true;
}

template <>
bool Table::get(const std::string& key, int& out) {
  const Entry* e = find(key);
  if (!e) return false;
  const double* d = std::get_if<double>(&e->value);
  if (!d || *d != std::floor(*d) || std::abs(*d) > 1e9)
    throw ConfigError("'" + key + "' must be an integer", e->line);
  out = static_cast<int>(*d);
  return true;
}

template <>
bool Table::get(const std::string& key, std::uint64_t& out) {
  const Entry* e = find(key);
  if (!e) return false;
  const double* d = std::get_if<double>(&e->value);
  if (!d || *d != std::floor(*d) || *d < 0.0 || *d > 9.007199254740992e15)
    throw ConfigError("'" + key + "' must be a non-negative integer", e->line);
  out = static_cast<std::uint64_t>(*d);
  return true;
}

template <>
bool Table::get(const std::string& key, bool& out) {
  const Entry* e = find(key);
  if (!e) return false;
  if (!std::holds_alternative<bool>(e->value)) throw ConfigError("'" + key + "' must be true or false", e->line);
  out = std::get<bool>(e->value);
  return true;
}

template <>
bool Table::get(const std::string& key, std::string& out) {
  const Entry* e = find(key);
  if (!e) return false;
  if (!std::holds_alternative<std::string>(e->value)) throw ConfigError("'" + key + "' must be a string", e->line);
  out = std::get<std::string>(e->value);
  return true;
}

template <>
bool Table::get(const std::string& key, Row& out) {
  const Entry* e = find(key);
  if (!e) return false;
  if (const auto* r = std::get_if<Row>(&e->value)) {
    out = *r;
    return true;
  }
  throw ConfigError("'" + key + "' must be a flat numeric array", e->line);
}

template <>
bool Table::get(const std::string& key, std::vector<Row>& out) {
  const Entry* e = find(key);
  if (!e) return false;
  if (const auto* r = std::get_if<std::vector<Row>>(&e->value)) {
    out = *r;
    return true;
  }
  // An empty array is an empty list of rows.
  if (const auto* r = std::get_if<Row>(&e->value); r && r->empty()) {
    out.clear();
    return true;
  }
  throw ConfigError("'" + key + "' must be an array of arrays", e->line);
}

template <class F>
void checked(Table& t, const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string(e.what()), t.line_of(key));
  }
}

}  // namespace

namespace {
Scenario build(const ScenarioConfig& c, const std::function<int(const std::string&)>& line_of);
}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  Table t(text);
  ScenarioConfig c;
  c.source = source;

  auto& m = c.model;
  t.get("model.kind", m.kind);
  t.get("model.K", m.K);
  t.get("model.R_M", m.R_M);
  t.get("model.chart_radius", m.chart_radius);
  t.get("model.offset", m.offset);
  t.get("model.quadratic", m.quadratic);
  std::vector<Row> rows;
  if (t.get("model.bumps", rows))
    for (const Row& r : rows) {
      if (r.size() != 4) throw ConfigError("model bumps are [x, y, width, amplitude]", t.line_of("model.bumps"));
      m.bumps.push_back({{r[0], r[1]}, r[2], r[3]});
    }
  if (m.kind != "constant_curvature" && m.kind != "conformal")
    throw ConfigError("model kind must be \"constant_curvature\" or \"conformal\"", t.line_of("model.kind"));

  auto& p = c.phantom;
  t.get("phantom.coordinates", p.coordinates);
  if (p.coordinates != "normal" && p.coordinates != "chart")
    throw ConfigError("phantom coordinates must be \"normal\" or \"chart\"", t.line_of("phantom.coordinates"));
  t.get("phantom.alpha", p.alpha);
  rows.clear();
  if (t.get("phantom.bodies", rows))
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != 3) throw ConfigError("bodies are [x, y, radius]", t.line_of("phantom.bodies"));
      p.bodies.push_back({{rows[i][0], rows[i][1]}, rows[i][2], static_cast<int>(i)});
    }
  rows.clear();
  if (t.get("phantom.tissue", rows))
    for (const Row& r : rows) {
      if (r.size() != 4) throw ConfigError("tissue bumps are [x, y, width, amplitude]", t.line_of("phantom.tissue"));
      p.tissue.push_back({{r[0], r[1]}, r[2], r[3]});
    }

  t.get("spectral.E0", c.spectral.E0);
  t.get("spectral.epsilon", c.spectral.epsilon);

  t.get("grids.n_beta", c.grids.n_beta);
  t.get("grids.n_phi", c.grids.n_phi);
  t.get("grids.n_x", c.grids.n_x);
  t.get("grids.n_y", c.grids.n_y);
  if (c.grids.n_beta < 8 || c.grids.n_phi < 4)
    throw ConfigError("sinogram grid too small", t.line_of("grids.n_beta"));

  auto& r = c.recon;
  std::string s;
  if (t.get("recon.method", s)) checked(t, "recon.method", [&] { r.method = parse_recon_method(s); });
  if (t.get("recon.preconditioner", s))
    checked(t, "recon.preconditioner", [&] { r.preconditioner = parse_preconditioner(s); });
  t.get("recon.n_psi", r.n_psi);
  t.get("recon.max_iters", r.max_iters);
  t.get("recon.rel_tol", r.rel_tol);
  t.get("recon.taper_start", r.taper_start);
  t.get("recon.pad", r.pad);
  t.get("recon.apodization_cells", r.apodization_cells);
  r.n_x = c.grids.n_x;
  r.n_y = c.grids.n_y;

  auto& v = c.verify;
  t.get("verify.tube_cells", v.ridge.tube_cells);
  t.get("verify.guard_cells", v.ridge.guard_cells);
  t.get("verify.boundary_band_cells", v.ridge.boundary_band_cells);
  if (t.get("verify.measure", s)) checked(t, "verify.measure", [&] { v.ridge.measure = parse_ridge_measure(s); });
  t.get("verify.smoothing_cells", v.ridge.smoothing_cells);
  t.get("verify.top_fraction", v.ridge.top_fraction);
  t.get("verify.min_ratio", v.min_ratio);
  t.get("verify.min_capture", v.min_capture);
  t.get("verify.amplitude", v.amplitude);
  t.get("verify.alpha_eps", v.alpha_eps);
  t.get("verify.slope", v.slope);
  t.get("verify.slope_tol", v.slope_tol);
  t.get("verify.residual_slope", v.residual_slope);
  t.get("verify.residual_slope_tol", v.residual_slope_tol);
  if (v.ridge.tube_cells < 2.0) throw ConfigError("tube must be at least 2 cells", t.line_of("verify.tube_cells"));
  if (v.ridge.guard_cells < 0.0) throw ConfigError("guard must be non-negative", t.line_of("verify.guard_cells"));
  if (!(v.ridge.top_fraction > 0.0 && v.ridge.top_fraction <= 1.0))
    throw ConfigError("top_fraction must lie in (0, 1]", t.line_of("verify.top_fraction"));
  if (v.amplitude) {
    if (v.alpha_eps.size() < 3)
      throw ConfigError("alpha_eps needs at least three values", t.line_of("verify.alpha_eps"));
    for (double a : v.alpha_eps)
      if (!(a > 0.0)) throw ConfigError("alpha_eps values must be positive", t.line_of("verify.alpha_eps"));
  }

  t.get("output.dir", c.output_dir);
  t.get("output.seed", c.seed);
  t.reject_unused();

  // Physical validation, reported at the line of the offending key.
  build(c, [&](const std::string& key) { return t.line_of(key); });
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {

Manifold make_model(const ScenarioConfig::ModelSection& m) {
  if (m.kind == "conformal")
    return Manifold::conformal(ConformalFactor(m.offset, m.quadratic, m.bumps), m.chart_radius);
  return Manifold::constant_curvature(m.K, m.R_M);
}

Scenario build(const ScenarioConfig& c, const std::function<int(const std::string&)>& line_of) {
  auto fail = [&](const std::string& key, const std::string& what) -> void {
    throw ConfigError("[" + key.substr(0, key.find('.')) + "] " + what, line_of(key));
  };
  std::optional<Manifold> model;
  try {
    model = make_model(c.model);
    require_simple(*model);
  } catch (const Error& e) {
    fail(c.model.kind == "conformal" ? "model.chart_radius" : "model.R_M", e.what());
  }
  Phantom ph;
  ph.alpha = c.phantom.alpha;
  const bool normal = c.phantom.coordinates == "normal";
  try {
    for (ConvexBody b : c.phantom.bodies) {
      if (normal) b.center = model->from_normal_coordinates(b.center);
      ph.bodies.push_back(b);
    }
    for (TissueBump t : c.phantom.tissue) {
      if (normal) t.center = model->from_normal_coordinates(t.center);
      ph.tissue.push_back(t);
    }
  } catch (const Error& e) {
    fail("phantom.bodies", e.what());
  }
  const ValidationReport rep = validate(ph, *model);
  if (!rep.ok) fail(rep.errors.front().rfind("tissue", 0) == 0 ? "phantom.tissue" : "phantom.bodies", rep.errors.front());
  try {
    c.spectral.validate();
  } catch (const Error& e) {
    fail("spectral.epsilon", e.what());
  }
  try {
    c.recon.validate(*model);
  } catch (const Error& e) {
    fail("recon.method", e.what());
  }
  return Scenario{c, *model, ph};
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& config) {
  return build(config, [](const std::string&) { return 0; });
}

}  // namespace geoxray
