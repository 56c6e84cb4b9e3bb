// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maglab/config.hpp"
#include "maglab/errors.hpp"
#include "maglab/formulations.hpp"
#include "maglab/io.hpp"
#include "maglab/postprocess.hpp"
#include "maglab/solve.hpp"

namespace maglab {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Ordinary least squares of log(error) against log(eps0).
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw FitError("fit_slope: need at least 3 points");
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  std::vector<double> xs, ys;
  for (const auto& [e, err] : points) {
    if (!(e > 0.0) || !std::isfinite(e)) throw FitError("fit_slope: eps0 values must be positive");
    if (!(err > 0.0) || !std::isfinite(err)) throw FitError("fit_slope: error values must be positive");
    xs.push_back(std::log(e));
    ys.push_back(std::log(err));
    sx += xs.back();
    sy += ys.back();
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit_slope: eps0 values must not all coincide");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  f.points = static_cast<int>(points.size());
  return f;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

/// JSON number, or null when not finite.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Field statistics shared by all drivers

struct FieldStats {
  double h_norm = 0.0;
  double b_norm = 0.0;
  double curl_residual = 0.0;
  double weak_divergence = 0.0;
  double multiplier_norm = std::numeric_limits<double>::quiet_NaN();  // penalty only
};

inline FieldStats field_stats(const FieldSolution& f) {
  FieldStats s;
  s.h_norm = l2_norm(f, Quantity::h);
  s.b_norm = l2_norm(f, Quantity::b);
  s.curl_residual = l2_norm(f, Quantity::curl_residual);
  s.weak_divergence = weak_divergence_residual(f);
  if (f.formulation == Formulation::penalty)
    s.multiplier_norm = element_l2_norm(*f.model, reconstruct_multiplier(f, f.epsilon));
  return s;
}

inline detail::json stats_json(const FieldStats& s) {
  detail::json j;
  j["h_norm"] = detail::num(s.h_norm);
  j["b_norm"] = detail::num(s.b_norm);
  j["curl_residual_norm"] = detail::num(s.curl_residual);
  j["weak_divergence_residual"] = detail::num(s.weak_divergence);
  if (std::isfinite(s.multiplier_norm)) j["multiplier_norm"] = s.multiplier_norm;
  return j;
}

inline detail::json trace_json(const SolveTrace& t) {
  detail::json j;
  j["newton_iterations"] = t.iterations();
  j["initial_residual"] = detail::num(t.rows.empty() ? 0.0 : t.rows.front().residual);
  j["final_residual"] = detail::num(t.final_residual());
  j["final_energy"] = detail::num(t.rows.empty() ? 0.0 : t.rows.back().energy);
  return j;
}

inline detail::json mesh_json(const Mesh2D& m) {
  detail::json j;
  j["vertices"] = m.num_vertices();
  j["edges"] = m.num_edges();
  j["triangles"] = m.num_triangles();
  return j;
}

/// Solve one formulation on a prepared model.
inline Solved solve_formulation(std::shared_ptr<const Model> model, Formulation f, const RunConfig& c,
                                std::optional<double> eps0 = std::nullopt) {
  switch (f) {
    case Formulation::penalty:
      if (!eps0) throw ConfigError("formulation penalty requires epsilon0");
      return solve_penalty(std::move(model), *eps0, c.length_scale, c.solver);
    case Formulation::scalar_potential: return solve_scalar_potential(std::move(model), c.solver);
    case Formulation::limit: return solve_limit_field(std::move(model), c.solver);
    case Formulation::vector_potential: return solve_vector_potential(std::move(model), c.solver);
  }
  throw ConfigError("unknown formulation");
}

// ---------------------------------------------------------------------------
// solve

struct SolveOutcome {
  Solved solved;
  FieldStats stats;
  double wall_time = 0.0;
};

inline SolveOutcome run_solve(const RunConfig& c, std::optional<Formulation> formulation,
                              std::optional<double> eps0, const std::filesystem::path& out_dir) {
  const std::optional<Formulation> f = formulation ? formulation : c.formulation;
  if (!f) throw ConfigError("no formulation given (config key \"formulation\" or --formulation)");
  if (*f == Formulation::penalty && !eps0) {
    if (c.epsilon0.empty()) throw ConfigError("formulation penalty requires epsilon0");
    eps0 = *std::min_element(c.epsilon0.begin(), c.epsilon0.end());
  }
  if (eps0 && !(*eps0 > 0.0)) throw ConfigError("epsilon0 must be positive");

  const auto t0 = detail::Clock::now();
  auto model = build_model(c);
  SolveOutcome out;
  out.solved = solve_formulation(model, *f, c, eps0);
  out.stats = field_stats(out.solved.field);
  out.wall_time = detail::seconds_since(t0);

  if (!out_dir.empty()) {
    detail::ensure_dir(out_dir);
    const std::string name = to_string(*f);
    write_vtk(out.solved.field, out_dir / ("fields_" + name + ".vtk"));
    write_trace_csv(out.solved.trace, out_dir / ("trace_" + name + ".csv"));
    detail::json j;
    j["command"] = "solve";
    j["formulation"] = name;
    if (*f == Formulation::penalty) {
      j["epsilon0"] = *eps0;
      j["epsilon"] = out.solved.field.epsilon;
    }
    j["mesh"] = mesh_json(model->mesh());
    j["norms"] = stats_json(out.stats);
    j["solver"] = trace_json(out.solved.trace);
    j["wall_time_s"] = out.wall_time;
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
  }
  return out;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  double epsilon0 = 0.0;
  double epsilon = 0.0;
  bool converged = false;
  std::string message;
  double h_error = std::numeric_limits<double>::quiet_NaN();
  double b_error = std::numeric_limits<double>::quiet_NaN();
  FieldStats stats;
  int newton_iterations = 0;
  int cg_iterations = 0;
  bool cg_converged = false;
  double wall_time = 0.0;
  SolveTrace trace;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // descending eps0
  Solved reference;            // limit solution
  FieldStats reference_stats;
  std::optional<SlopeFit> h_slope, b_slope, curl_slope;           // fit window
  std::optional<SlopeFit> h_slope_all, b_slope_all, curl_slope_all;  // all converged rows
  int fit_points = 0;
  bool failed = false;
  double wall_time = 0.0;
};

/// Iteration cap of the observational CG solve on the final penalty Jacobian.
inline constexpr int sweep_cg_cap = 5000;

inline void validate_sweep(const RunConfig& c) {
  if (c.epsilon0.size() < 3) throw ConfigError("sweep needs at least 3 epsilon0 values");
  const auto [lo, hi] = std::minmax_element(c.epsilon0.begin(), c.epsilon0.end());
  if (*hi < 100.0 * *lo) throw ConfigError("sweep epsilon0 values must span at least two decades");
  std::vector<double> sorted = c.epsilon0;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("sweep epsilon0 values must be distinct");
  if (c.fit_points > static_cast<int>(c.epsilon0.size()))
    throw ConfigError("fit_points exceeds the number of epsilon0 values");
}

namespace detail {

inline std::optional<SlopeFit> try_fit(const std::vector<std::pair<double, double>>& pts) {
  try {
    return fit_slope(pts);
  } catch (const FitError&) {
    return std::nullopt;
  }
}

inline std::string sweep_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "epsilon0,epsilon,h_error,b_error,curl_residual,multiplier_norm,h_norm,b_norm,"
        "weak_divergence,newton_iters,cg_iters,cg_converged,status\n";
  for (const auto& row : r.rows) {
    os << csv_number(row.epsilon0) << ',' << csv_number(row.epsilon) << ',' << csv_number(row.h_error)
       << ',' << csv_number(row.b_error) << ',' << csv_number(row.stats.curl_residual) << ','
       << csv_number(row.stats.multiplier_norm) << ',' << csv_number(row.stats.h_norm) << ','
       << csv_number(row.stats.b_norm) << ',' << csv_number(row.stats.weak_divergence) << ','
       << row.newton_iterations << ',' << row.cg_iterations << ',' << (row.cg_converged ? 1 : 0) << ','
       << (row.converged ? "ok" : "failed") << '\n';
  }
  return os.str();
}

inline std::string sci(double v, int digits = 3) {
  if (!std::isfinite(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*e", digits - 1, v);
  return buf;
}

inline std::string sweep_table(const SweepReport& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %-11s %-11s %-11s %-7s %-9s %-8s\n", "eps0", "h-error", "b-error",
                "curl-res", "newton", "cg", "time[s]");
  os << buf;
  for (const auto& row : r.rows) {
    const std::string cg = std::to_string(row.cg_iterations) + (row.cg_converged ? "" : "+");
    std::snprintf(buf, sizeof(buf), "%-10s %-11s %-11s %-11s %-7d %-9s %-8.2f%s\n",
                  sci(row.epsilon0, 1).c_str(), sci(row.h_error).c_str(), sci(row.b_error).c_str(),
                  sci(row.stats.curl_residual).c_str(), row.newton_iterations, cg.c_str(), row.wall_time,
                  row.converged ? "" : "  FAILED");
    os << buf;
  }
  auto line = [&](const char* name, const std::optional<SlopeFit>& w, const std::optional<SlopeFit>& all) {
    os << name << ": ";
    if (w) {
      std::snprintf(buf, sizeof(buf), "slope %.4f (R^2 %.6f, last %d rows)", w->slope, w->r2, w->points);
      os << buf;
    } else {
      os << "n/a";
    }
    if (all) {
      std::snprintf(buf, sizeof(buf), "; all rows %.4f (R^2 %.6f)", all->slope, all->r2);
      os << buf;
    }
    os << '\n';
  };
  os << '\n';
  line("h-error ", r.h_slope, r.h_slope_all);
  line("b-error ", r.b_slope, r.b_slope_all);
  line("curl-res", r.curl_slope, r.curl_slope_all);
  if (r.failed) os << "\nreport flagged: at least one row failed\n";
  return os.str();
}

inline json fit_json(const std::optional<SlopeFit>& f) {
  if (!f) return nullptr;
  json j;
  j["slope"] = f->slope;
  j["intercept"] = f->intercept;
  j["r2"] = f->r2;
  j["points"] = f->points;
  return j;
}

}  // namespace detail

inline SweepReport run_sweep(const RunConfig& c, const std::filesystem::path& out_dir) {
  validate_sweep(c);
  const auto t0 = detail::Clock::now();
  auto model = build_model(c);
  SweepReport report;
  report.reference = solve_limit_field(model, c.solver);
  report.reference_stats = field_stats(report.reference.field);

  std::vector<double> eps0 = c.epsilon0;
  std::sort(eps0.begin(), eps0.end(), std::greater<>());
  std::optional<Vector> previous;
  for (double e0 : eps0) {
    SweepRow row;
    row.epsilon0 = e0;
    row.epsilon = physical_epsilon(e0, c.length_scale);
    const auto r0 = detail::Clock::now();
    try {
      const Vector* init = c.warm_start && previous ? &*previous : nullptr;
      Solved s = solve_penalty(model, e0, c.length_scale, c.solver, init);
      row.converged = true;
      row.trace = s.trace;
      row.newton_iterations = s.trace.iterations();
      row.h_error = l2_error(s.field, report.reference.field, Quantity::h);
      row.b_error = l2_error(s.field, report.reference.field, Quantity::b);
      row.stats = field_stats(s.field);
      const Assembly sys = assemble_penalty(*model, s.field.coefficients, row.epsilon);
      try {
        const CgResult cg = cg_solve(sys.jacobian, curl_load(*model), 1e-8, Preconditioner::diagonal,
                                     sweep_cg_cap);
        row.cg_iterations = cg.iterations;
        row.cg_converged = true;
      } catch (const NonConvergenceError&) {
        row.cg_iterations = sweep_cg_cap;
      }
      previous = s.field.coefficients;
    } catch (const SolverError& e) {
      row.message = e.what();
      row.trace = e.trace();
      row.newton_iterations = e.trace().iterations();
      report.failed = true;
    } catch (const OperatorError& e) {
      row.message = e.what();
      report.failed = true;
    }
    row.wall_time = detail::seconds_since(r0);
    report.rows.push_back(std::move(row));
  }

  std::vector<std::pair<double, double>> h, b, curl;
  for (const auto& row : report.rows) {
    if (!row.converged) continue;
    h.emplace_back(row.epsilon0, row.h_error);
    b.emplace_back(row.epsilon0, row.b_error);
    curl.emplace_back(row.epsilon0, row.stats.curl_residual);
  }
  report.h_slope_all = detail::try_fit(h);
  report.b_slope_all = detail::try_fit(b);
  report.curl_slope_all = detail::try_fit(curl);
  const std::size_t window = c.fit_points > 0 ? static_cast<std::size_t>(c.fit_points) : h.size();
  auto tail = [&](const std::vector<std::pair<double, double>>& v) {
    return std::vector<std::pair<double, double>>(v.end() - static_cast<long>(std::min(window, v.size())), v.end());
  };
  report.h_slope = detail::try_fit(tail(h));
  report.b_slope = detail::try_fit(tail(b));
  report.curl_slope = detail::try_fit(tail(curl));
  report.fit_points = static_cast<int>(std::min(window, h.size()));
  if (!report.h_slope) report.failed = true;
  report.wall_time = detail::seconds_since(t0);

  if (!out_dir.empty()) {
    detail::ensure_dir(out_dir);
    write_text(out_dir / "report.csv", detail::sweep_csv(report));
    write_text(out_dir / "report.txt", detail::sweep_table(report));
    write_trace_csv(report.reference.trace, out_dir / "trace_limit.csv");
    write_vtk(report.reference.field, out_dir / "fields_limit.vtk");
    for (const auto& row : report.rows)
      if (!row.trace.rows.empty())
        write_trace_csv(row.trace, out_dir / ("trace_penalty_" + csv_number(row.epsilon0) + ".csv"));

    detail::json j;
    j["command"] = "sweep";
    j["length_scale"] = c.length_scale;
    j["mesh"] = mesh_json(model->mesh());
    j["reference"] = stats_json(report.reference_stats);
    j["reference"]["solver"] = trace_json(report.reference.trace);
    j["slopes"]["fit_points"] = report.fit_points;
    j["slopes"]["h_error"] = detail::fit_json(report.h_slope);
    j["slopes"]["b_error"] = detail::fit_json(report.b_slope);
    j["slopes"]["curl_residual"] = detail::fit_json(report.curl_slope);
    j["slopes_all_rows"]["h_error"] = detail::fit_json(report.h_slope_all);
    j["slopes_all_rows"]["b_error"] = detail::fit_json(report.b_slope_all);
    j["slopes_all_rows"]["curl_residual"] = detail::fit_json(report.curl_slope_all);
    j["rows"] = detail::json::array();
    for (const auto& row : report.rows) {
      detail::json rj;
      rj["epsilon0"] = row.epsilon0;
      rj["epsilon"] = row.epsilon;
      rj["status"] = row.converged ? "ok" : "failed";
      if (!row.message.empty()) rj["message"] = row.message;
      rj["h_error"] = detail::num(row.h_error);
      rj["b_error"] = detail::num(row.b_error);
      rj["norms"] = stats_json(row.stats);
      rj["newton_iterations"] = row.newton_iterations;
      rj["cg_iterations"] = row.cg_iterations;
      rj["cg_converged"] = row.cg_converged;
      rj["wall_time_s"] = row.wall_time;
      j["rows"].push_back(rj);
    }
    j["failed"] = report.failed;
    j["wall_time_s"] = report.wall_time;
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
  }
  return report;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
  Formulation a;
  Formulation b;  // reference of the relative difference
  double h_diff = 0.0;
  double b_diff = 0.0;
};

struct CompareReport {
  std::vector<std::pair<Formulation, Solved>> solutions;
  std::vector<FieldStats> stats;
  std::vector<CompareRow> rows;
  double epsilon0 = 0.0;

  const Solved& get(Formulation f) const {
    for (const auto& [g, s] : solutions)
      if (g == f) return s;
    throw ParameterError("compare report has no " + to_string(f) + " solution");
  }

  const CompareRow& pair(Formulation a, Formulation b) const {
    for (const auto& r : rows)
      if (r.a == a && r.b == b) return r;
    throw ParameterError("compare report has no pair " + to_string(a) + "/" + to_string(b));
  }
};

inline CompareReport run_compare(const RunConfig& c, const std::filesystem::path& out_dir) {
  if (c.epsilon0.empty()) throw ConfigError("compare needs epsilon0 for the penalty solve");
  auto model = build_model(c);
  CompareReport report;
  report.epsilon0 = *std::min_element(c.epsilon0.begin(), c.epsilon0.end());
  require_invertible_laws(*model);
  const Formulation order[] = {Formulation::scalar_potential, Formulation::limit,
                               Formulation::vector_potential, Formulation::penalty};
  for (Formulation f : order) {
    report.solutions.emplace_back(f, solve_formulation(model, f, c, report.epsilon0));
    report.stats.push_back(field_stats(report.solutions.back().second.field));
  }
  const std::pair<Formulation, Formulation> pairs[] = {
      {Formulation::penalty, Formulation::limit},
      {Formulation::scalar_potential, Formulation::limit},
      {Formulation::vector_potential, Formulation::limit},
      {Formulation::penalty, Formulation::vector_potential},
      {Formulation::scalar_potential, Formulation::vector_potential},
      {Formulation::penalty, Formulation::scalar_potential},
  };
  for (const auto& [a, b] : pairs) {
    const FieldSolution& fa = report.get(a).field;
    const FieldSolution& fb = report.get(b).field;
    report.rows.push_back({a, b, l2_error(fa, fb, Quantity::h), l2_error(fa, fb, Quantity::b)});
  }

  if (!out_dir.empty()) {
    detail::ensure_dir(out_dir);
    std::ostringstream os;
    os << "formulation_a,formulation_b,h_diff,b_diff\n";
    for (const auto& r : report.rows)
      os << to_string(r.a) << ',' << to_string(r.b) << ',' << csv_number(r.h_diff) << ','
         << csv_number(r.b_diff) << '\n';
    write_text(out_dir / "report.csv", os.str());
    detail::json j;
    j["command"] = "compare";
    j["epsilon0"] = report.epsilon0;
    j["mesh"] = mesh_json(model->mesh());
    for (std::size_t i = 0; i < report.solutions.size(); ++i) {
      const auto& [f, s] = report.solutions[i];
      const std::string name = to_string(f);
      write_vtk(s.field, out_dir / ("fields_" + name + ".vtk"));
      write_trace_csv(s.trace, out_dir / ("trace_" + name + ".csv"));
      j["formulations"][name] = stats_json(report.stats[i]);
      j["formulations"][name]["solver"] = trace_json(s.trace);
    }
    j["pairs"] = detail::json::array();
    for (const auto& r : report.rows) {
      detail::json rj;
      rj["a"] = to_string(r.a);
      rj["b"] = to_string(r.b);
      rj["h_diff"] = r.h_diff;
      rj["b_diff"] = r.b_diff;
      j["pairs"].push_back(rj);
    }
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
  }
  return report;
}

}  // namespace maglab
