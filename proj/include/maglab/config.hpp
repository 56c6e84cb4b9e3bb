// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/io.hpp"
#include "maglab/material.hpp"
#include "maglab/mesh.hpp"
#include "maglab/solve.hpp"

namespace maglab {

inline constexpr std::string_view config_magic = "maglab-config v1";

struct MaterialSpec {
  std::string law = "linear";  // linear | atan | table
  double mu_r = 1.0;           // linear permeability, or atan background, relative to mu0
  double b_s = 0.0;            // atan: saturation flux, T
  double h0 = 0.0;             // atan: knee field, A/m
  std::string file;            // table: B-H CSV, relative to the config file
  double mu_ext_r = 1.0;       // table: extrapolation slope relative to mu0

  friend bool operator==(const MaterialSpec&, const MaterialSpec&) = default;
};

struct RegionBox {
  std::string name;
  Rect box;
  double mesh_size = 0.0;

  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

struct RunConfig {
  Rect bbox;
  double mesh_size = 0.0;
  std::optional<std::string> background;
  std::vector<RegionBox> regions;
  std::vector<std::pair<std::string, MaterialSpec>> materials;
  std::vector<std::pair<std::string, double>> sources;  // j3, A/m^2
  std::optional<Formulation> formulation;
  std::vector<double> epsilon0;
  double length_scale = 0.04;
  int fit_points = 0;  // 0: fit over all sweep rows
  NewtonConfig solver;
  bool warm_start = false;
  int quadrature = 3;
  std::string output_dir;
  std::filesystem::path base_dir;  // directory of the config file, not serialized

  /// Region names in tag order: background first, then first appearance.
  std::vector<std::string> region_names() const {
    std::vector<std::string> names;
    if (background) names.push_back(*background);
    for (const auto& r : regions)
      if (std::find(names.begin(), names.end(), r.name) == names.end()) names.push_back(r.name);
    return names;
  }

  int tag_of(const std::string& name) const {
    const auto names = region_names();
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  }

  GeometrySpec geometry() const {
    GeometrySpec g;
    g.bbox = bbox;
    g.mesh_size = mesh_size;
    g.tag_names = region_names();
    if (background) g.background_tag = 0;
    for (const auto& r : regions) g.regions.push_back({tag_of(r.name), r.box, r.mesh_size});
    return g;
  }

  SourceSpec source() const {
    SourceSpec s;
    s.geometry = geometry();
    s.current_by_tag.assign(s.geometry.tag_names.size(), 0.0);
    for (const auto& [name, j] : sources) s.current_by_tag[tag_of(name)] = j;
    return s;
  }

  bool operator==(const RunConfig& o) const {
    return bbox == o.bbox && mesh_size == o.mesh_size && background == o.background &&
           regions == o.regions && materials == o.materials && sources == o.sources &&
           formulation == o.formulation && epsilon0 == o.epsilon0 &&
           length_scale == o.length_scale && fit_points == o.fit_points && solver == o.solver &&
           warm_start == o.warm_start && quadrature == o.quadrature && output_dir == o.output_dir;
  }
};

namespace detail {

using json = nlohmann::ordered_json;

class ConfigReader {
 public:
  explicit ConfigReader(std::string path) : path_(std::move(path)) {}

  void error(const std::string& where, const std::string& msg) {
    diags_.push_back({path_, 0, (where.empty() ? msg : where + ": " + msg), Severity::error});
  }

  bool ok() const { return diags_.empty(); }
  std::vector<Diagnostic> take() { return std::move(diags_); }

  bool require_object(const json& j, const std::string& where) {
    if (j.is_object()) return true;
    error(where, "expected an object");
    return false;
  }

  void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* a) { return it.key() == a; });
      if (!known) error(where, "unknown key \"" + it.key() + "\"");
    }
  }

  std::optional<double> number(const json& j, const std::string& where) {
    if (!j.is_number()) {
      error(where, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      error(where, "expected a finite number");
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> positive(const json& j, const std::string& where) {
    auto v = number(j, where);
    if (v && !(*v > 0.0)) {
      error(where, "must be positive");
      return std::nullopt;
    }
    return v;
  }

  std::optional<int> integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) {
      error(where, "expected an integer");
      return std::nullopt;
    }
    const auto v = j.get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      error(where, "integer out of range");
      return std::nullopt;
    }
    return static_cast<int>(v);
  }

  std::optional<std::string> string(const json& j, const std::string& where) {
    if (!j.is_string()) {
      error(where, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<Rect> box(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) {
      error(where, "expected [x0, x1, y0, y1]");
      return std::nullopt;
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
      auto x = number(j[i], where + "[" + std::to_string(i) + "]");
      if (!x) return std::nullopt;
      v[i] = *x;
    }
    if (!(v[1] > v[0]) || !(v[3] > v[2])) {
      error(where, "box needs x0 < x1 and y0 < y1");
      return std::nullopt;
    }
    return Rect{v[0], v[1], v[2], v[3]};
  }

 private:
  std::string path_;
  std::vector<Diagnostic> diags_;
};

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

inline void read_solver(ConfigReader& r, const json& j, NewtonConfig& s, bool& warm_start) {
  if (!r.require_object(j, "solver")) return;
  r.check_keys(j, "solver", {"tolerance", "abs_tolerance", "max_iterations", "armijo_c1", "backtrack",
                             "min_step", "warm_start"});
  if (j.contains("tolerance"))
    if (auto v = r.positive(j["tolerance"], "solver.tolerance")) s.tolerance = *v;
  if (j.contains("abs_tolerance"))
    if (auto v = r.number(j["abs_tolerance"], "solver.abs_tolerance")) {
      if (*v < 0.0) r.error("solver.abs_tolerance", "must be >= 0");
      else s.abs_tolerance = *v;
    }
  if (j.contains("max_iterations"))
    if (auto v = r.integer(j["max_iterations"], "solver.max_iterations")) {
      if (*v < 0) r.error("solver.max_iterations", "must be >= 0");
      else s.max_iterations = *v;
    }
  if (j.contains("armijo_c1"))
    if (auto v = r.number(j["armijo_c1"], "solver.armijo_c1")) {
      if (!(*v > 0.0 && *v < 1.0)) r.error("solver.armijo_c1", "must lie in (0, 1)");
      else s.armijo_c1 = *v;
    }
  if (j.contains("backtrack"))
    if (auto v = r.number(j["backtrack"], "solver.backtrack")) {
      if (!(*v > 0.0 && *v < 1.0)) r.error("solver.backtrack", "must lie in (0, 1)");
      else s.backtrack = *v;
    }
  if (j.contains("min_step"))
    if (auto v = r.number(j["min_step"], "solver.min_step")) {
      if (!(*v > 0.0 && *v <= 1.0)) r.error("solver.min_step", "must lie in (0, 1]");
      else s.min_step = *v;
    }
  if (j.contains("warm_start")) {
    if (!j["warm_start"].is_boolean()) r.error("solver.warm_start", "expected true or false");
    else warm_start = j["warm_start"].get<bool>();
  }
}

inline void read_material(ConfigReader& r, const json& j, const std::string& where, MaterialSpec& m) {
  if (!r.require_object(j, where)) return;
  r.check_keys(j, where, {"law", "mu_r", "b_s", "h0", "file", "mu_ext_r"});
  if (!j.contains("law")) {
    r.error(where, "missing key \"law\"");
    return;
  }
  auto law = r.string(j["law"], where + ".law");
  if (!law) return;
  m.law = *law;
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (j.contains(k)) r.error(where, "key \"" + std::string(k) + "\" does not apply to law \"" + m.law + "\"");
  };
  if (m.law == "linear") {
    forbid({"b_s", "h0", "file", "mu_ext_r"});
    if (j.contains("mu_r"))
      if (auto v = r.positive(j["mu_r"], where + ".mu_r")) m.mu_r = *v;
  } else if (m.law == "atan") {
    forbid({"file", "mu_ext_r"});
    if (j.contains("mu_r"))
      if (auto v = r.positive(j["mu_r"], where + ".mu_r")) m.mu_r = *v;
    if (!j.contains("b_s")) r.error(where, "atan law needs \"b_s\"");
    else if (auto v = r.number(j["b_s"], where + ".b_s")) {
      if (*v < 0.0) r.error(where + ".b_s", "must be >= 0");
      else m.b_s = *v;
    }
    if (!j.contains("h0")) r.error(where, "atan law needs \"h0\"");
    else if (auto v = r.positive(j["h0"], where + ".h0")) m.h0 = *v;
  } else if (m.law == "table") {
    forbid({"mu_r", "b_s", "h0"});
    if (!j.contains("file")) r.error(where, "table law needs \"file\"");
    else if (auto v = r.string(j["file"], where + ".file")) m.file = *v;
    if (j.contains("mu_ext_r"))
      if (auto v = r.number(j["mu_ext_r"], where + ".mu_ext_r")) {
        if (*v < 0.0) r.error(where + ".mu_ext_r", "must be >= 0");
        else m.mu_ext_r = *v;
      }
  } else {
    r.error(where + ".law", "unknown law \"" + m.law + "\" (expected linear, atan or table)");
  }
}

}  // namespace detail

/// Parse and validate a config document. `path` names the source in
/// diagnostics; `base_dir` resolves relative table paths.
inline RunConfig parse_config(const std::string& text, const std::string& path = {},
                              const std::filesystem::path& base_dir = {}) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({Diagnostic{path, detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1),
                                  std::string("invalid JSON: ") + e.what(), Severity::error}});
  } catch (const json::exception& e) {
    throw ConfigError({Diagnostic{path, 0, std::string("invalid JSON: ") + e.what(), Severity::error}});
  }
  detail::ConfigReader r(path);
  RunConfig c;
  c.base_dir = base_dir;
  if (!r.require_object(root, "")) throw ConfigError(r.take());
  r.check_keys(root, "", {"format", "geometry", "materials", "sources", "formulation", "epsilon0",
                          "length_scale", "fit_points", "solver", "quadrature", "output_dir"});

  if (!root.contains("format") || !root["format"].is_string() ||
      root["format"].get<std::string>() != config_magic)
    r.error("format", "expected \"" + std::string(config_magic) + "\"");

  // geometry
  if (!root.contains("geometry")) {
    r.error("", "missing key \"geometry\"");
  } else if (const json& g = root["geometry"]; r.require_object(g, "geometry")) {
    r.check_keys(g, "geometry", {"bbox", "mesh_size", "background", "regions"});
    if (!g.contains("bbox")) r.error("geometry", "missing key \"bbox\"");
    else if (auto b = r.box(g["bbox"], "geometry.bbox")) c.bbox = *b;
    if (!g.contains("mesh_size")) r.error("geometry", "missing key \"mesh_size\"");
    else if (auto v = r.positive(g["mesh_size"], "geometry.mesh_size")) c.mesh_size = *v;
    if (g.contains("background"))
      if (auto v = r.string(g["background"], "geometry.background")) c.background = *v;
    if (!g.contains("regions") || !g["regions"].is_array()) {
      r.error("geometry", "\"regions\" must be an array");
    } else {
      for (std::size_t i = 0; i < g["regions"].size(); ++i) {
        const json& rj = g["regions"][i];
        const std::string where = "geometry.regions[" + std::to_string(i) + "]";
        if (!r.require_object(rj, where)) continue;
        r.check_keys(rj, where, {"name", "box", "mesh_size"});
        RegionBox rb;
        if (!rj.contains("name")) r.error(where, "missing key \"name\"");
        else if (auto v = r.string(rj["name"], where + ".name")) rb.name = *v;
        if (!rj.contains("box")) r.error(where, "missing key \"box\"");
        else if (auto b = r.box(rj["box"], where + ".box")) rb.box = *b;
        if (rj.contains("mesh_size"))
          if (auto v = r.positive(rj["mesh_size"], where + ".mesh_size")) rb.mesh_size = *v;
        if (c.background && rb.name == *c.background)
          r.error(where, "region name \"" + rb.name + "\" is the background");
        c.regions.push_back(std::move(rb));
      }
    }
  }

  const auto names = c.region_names();
  auto known_region = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
  };

  // materials
  if (!root.contains("materials")) {
    r.error("", "missing key \"materials\"");
  } else if (const json& m = root["materials"]; r.require_object(m, "materials")) {
    for (auto it = m.begin(); it != m.end(); ++it) {
      const std::string where = "materials." + it.key();
      if (!known_region(it.key())) r.error(where, "no region named \"" + it.key() + "\"");
      MaterialSpec spec;
      detail::read_material(r, it.value(), where, spec);
      c.materials.emplace_back(it.key(), std::move(spec));
    }
    for (const auto& n : names) {
      const bool has = std::any_of(c.materials.begin(), c.materials.end(),
                                   [&](const auto& p) { return p.first == n; });
      if (!has) r.error("materials", "region \"" + n + "\" has no material");
    }
  }

  // sources
  if (root.contains("sources")) {
    const json& s = root["sources"];
    if (r.require_object(s, "sources")) {
      for (auto it = s.begin(); it != s.end(); ++it) {
        const std::string where = "sources." + it.key();
        if (!known_region(it.key())) r.error(where, "no region named \"" + it.key() + "\"");
        if (auto v = r.number(it.value(), where)) c.sources.emplace_back(it.key(), *v);
      }
    }
  }

  if (root.contains("formulation")) {
    if (auto v = r.string(root["formulation"], "formulation")) {
      c.formulation = parse_formulation(*v);
      if (!c.formulation)
        r.error("formulation", "unknown formulation \"" + *v + "\" (expected penalty, scalar, vector or limit)");
    }
  }

  if (root.contains("epsilon0")) {
    const json& e = root["epsilon0"];
    if (!e.is_array()) {
      r.error("epsilon0", "expected an array of positive numbers");
    } else {
      for (std::size_t i = 0; i < e.size(); ++i)
        if (auto v = r.positive(e[i], "epsilon0[" + std::to_string(i) + "]")) c.epsilon0.push_back(*v);
    }
  }
  if (root.contains("length_scale"))
    if (auto v = r.positive(root["length_scale"], "length_scale")) c.length_scale = *v;
  if (root.contains("fit_points"))
    if (auto v = r.integer(root["fit_points"], "fit_points")) {
      if (*v != 0 && *v < 3) r.error("fit_points", "must be 0 (all rows) or at least 3");
      else c.fit_points = *v;
    }
  if (root.contains("solver")) detail::read_solver(r, root["solver"], c.solver, c.warm_start);
  if (root.contains("quadrature"))
    if (auto v = r.integer(root["quadrature"], "quadrature")) {
      if (*v != 3 && *v != 7) r.error("quadrature", "must be 3 or 7 points");
      else c.quadrature = *v;
    }
  if (root.contains("output_dir"))
    if (auto v = r.string(root["output_dir"], "output_dir")) c.output_dir = *v;

  if (!r.ok()) throw ConfigError(r.take());
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), path.parent_path());
}

inline std::string dump_config(const RunConfig& c) {
  using detail::json;
  json root;
  root["format"] = config_magic;
  json g;
  g["bbox"] = {c.bbox.x0, c.bbox.x1, c.bbox.y0, c.bbox.y1};
  g["mesh_size"] = c.mesh_size;
  if (c.background) g["background"] = *c.background;
  g["regions"] = json::array();
  for (const auto& r : c.regions) {
    json rj;
    rj["name"] = r.name;
    rj["box"] = {r.box.x0, r.box.x1, r.box.y0, r.box.y1};
    if (r.mesh_size > 0.0) rj["mesh_size"] = r.mesh_size;
    g["regions"].push_back(rj);
  }
  root["geometry"] = g;
  json m = json::object();
  for (const auto& [name, spec] : c.materials) {
    json mj;
    mj["law"] = spec.law;
    if (spec.law == "linear") {
      mj["mu_r"] = spec.mu_r;
    } else if (spec.law == "atan") {
      mj["mu_r"] = spec.mu_r;
      mj["b_s"] = spec.b_s;
      mj["h0"] = spec.h0;
    } else {
      mj["file"] = spec.file;
      mj["mu_ext_r"] = spec.mu_ext_r;
    }
    m[name] = mj;
  }
  root["materials"] = m;
  json s = json::object();
  for (const auto& [name, j] : c.sources) s[name] = j;
  root["sources"] = s;
  if (c.formulation) root["formulation"] = to_string(*c.formulation);
  root["epsilon0"] = c.epsilon0;
  root["length_scale"] = c.length_scale;
  if (c.fit_points != 0) root["fit_points"] = c.fit_points;
  json sv;
  sv["tolerance"] = c.solver.tolerance;
  sv["abs_tolerance"] = c.solver.abs_tolerance;
  sv["max_iterations"] = c.solver.max_iterations;
  sv["armijo_c1"] = c.solver.armijo_c1;
  sv["backtrack"] = c.solver.backtrack;
  sv["min_step"] = c.solver.min_step;
  sv["warm_start"] = c.warm_start;
  root["solver"] = sv;
  root["quadrature"] = c.quadrature;
  if (!c.output_dir.empty()) root["output_dir"] = c.output_dir;
  return root.dump(2) + "\n";
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
  write_text(path, dump_config(c));
}

/// Material law objects for a config, in tag order.
inline std::vector<MaterialLaw> build_laws(const RunConfig& c) {
  std::vector<MaterialLaw> laws;
  for (const auto& name : c.region_names()) {
    const auto it = std::find_if(c.materials.begin(), c.materials.end(),
                                 [&](const auto& p) { return p.first == name; });
    if (it == c.materials.end()) throw ConfigError("region \"" + name + "\" has no material");
    const MaterialSpec& m = it->second;
    if (m.law == "linear") {
      laws.push_back(MaterialLaw::linear(m.mu_r * mu0));
    } else if (m.law == "atan") {
      laws.push_back(MaterialLaw::atan_saturation(m.mu_r * mu0, m.b_s, m.h0));
    } else if (m.law == "table") {
      const std::filesystem::path p = c.base_dir / m.file;
      laws.push_back(MaterialLaw::tabulated(load_bh(p), m.mu_ext_r * mu0));
    } else {
      throw ConfigError("unknown law \"" + m.law + "\" for region \"" + name + "\"");
    }
  }
  return laws;
}

inline std::shared_ptr<const Model> build_model(const RunConfig& c) {
  Mesh2D mesh;
  try {
    mesh = generate(c.geometry());
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  const QuadratureRule rule = c.quadrature == 7 ? QuadratureRule::degree5() : QuadratureRule::degree2();
  return std::make_shared<const Model>(std::move(mesh), build_laws(c), c.source(), rule);
}

}  // namespace maglab
