// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/material.hpp"
#include "maglab/mesh.hpp"
#include "maglab/postprocess.hpp"

namespace maglab {

inline constexpr std::string_view bh_header = "h_A_per_m,b_T";

/// Optional slope bounds a loaded table must respect, H/m.
struct BHBounds {
  double gamma_min = 0.0;
  double lipschitz_max = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parse B-H samples from CSV text; `path` is used for diagnostics only.
inline BHTable parse_bh(const std::vector<std::string>& lines, const std::string& path,
                        const BHBounds& bounds = {}) {
  std::size_t n = lines.size();
  while (n > 0 && detail::trim(lines[n - 1]).empty()) --n;
  if (n == 0 || detail::trim(lines[0]) != bh_header)
    throw ParseError(path, 1, "expected header '" + std::string(bh_header) + "'");

  std::vector<Diagnostic> diags;
  auto fail = [&](int line, std::string msg) {
    diags.push_back({path, line, std::move(msg), Severity::error});
  };
  std::vector<double> h, b;
  for (std::size_t i = 1; i < n; ++i) {
    const int ln = static_cast<int>(i + 1);
    const std::string_view row = detail::trim(lines[i]);
    const auto comma = row.find(',');
    double hv = 0, bv = 0;
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos ||
        !detail::parse_number(detail::trim(row.substr(0, comma)), hv) ||
        !detail::parse_number(detail::trim(row.substr(comma + 1)), bv)) {
      fail(ln, "row must hold two numbers 'h,b'");
      continue;
    }
    if (!std::isfinite(hv) || !std::isfinite(bv)) {
      fail(ln, "non-finite sample");
      continue;
    }
    if (!h.empty()) {
      if (!(hv > h.back())) {
        fail(ln, "h must be strictly increasing (row has h = " + detail::format_double(hv) +
                     " after " + detail::format_double(h.back()) + ")");
        continue;
      }
      if (!(bv > b.back())) {
        fail(ln, "b must be strictly increasing (row has b = " + detail::format_double(bv) +
                     " after " + detail::format_double(b.back()) + ")");
        continue;
      }
      const double slope = (bv - b.back()) / (hv - h.back());
      if (slope < bounds.gamma_min) {
        fail(ln, "segment slope " + detail::format_double(slope) + " H/m below the lower bound");
        continue;
      }
      if (slope > bounds.lipschitz_max) {
        fail(ln, "segment slope " + detail::format_double(slope) + " H/m above the upper bound");
        continue;
      }
    } else if (hv != 0.0 || bv != 0.0) {
      fail(ln, "first sample must be (0, 0)");
      continue;
    }
    h.push_back(hv);
    b.push_back(bv);
  }
  if (diags.empty() && h.size() < 2)
    fail(static_cast<int>(n), "at least two samples are required");
  if (!diags.empty()) throw ParseError(std::move(diags));
  return BHTable(std::move(h), std::move(b));
}

inline BHTable load_bh(const std::filesystem::path& path, const BHBounds& bounds = {}) {
  return parse_bh(detail::read_lines(path), path.string(), bounds);
}

inline void save_bh(const BHTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write B-H file " + path.string());
  out << bh_header << '\n';
  for (std::size_t i = 0; i < table.size(); ++i)
    out << detail::format_double(table.h()[i]) << ',' << detail::format_double(table.b()[i]) << '\n';
}

// ---------------------------------------------------------------------------
// VTK legacy ASCII

/// Cell data sampled at element centroids.
struct CellFields {
  std::vector<Vec2> h, b;
  std::vector<double> curl_residual;
};

inline CellFields cell_fields(const FieldSolution& sol) {
  const Model& model = *sol.model;
  const int nt = model.mesh().num_triangles();
  CellFields out;
  out.h.reserve(nt);
  out.b.reserve(nt);
  out.curl_residual.reserve(nt);
  const Barycentric centroid{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  for (int t = 0; t < nt; ++t) {
    const FieldSample s = eval_field(sol, t, centroid);
    out.h.push_back(s.h);
    out.b.push_back(s.b);
    out.curl_residual.push_back(s.curl_h - model.current(t));
  }
  return out;
}

inline void write_vtk(const FieldSolution& sol, const std::filesystem::path& path) {
  detail::require_valid(sol);
  const Mesh2D& mesh = sol.model->mesh();
  const CellFields f = cell_fields(sol);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write VTK file " + path.string());
  const auto num = [](double v) { return detail::format_double(v); };
  out << "# vtk DataFile Version 3.0\n";
  out << "maglab " << to_string(sol.formulation) << " field\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices) out << num(v.x()) << ' ' << num(v.y()) << " 0\n";
  const int nt = mesh.num_triangles();
  out << "CELLS " << nt << ' ' << 4 * nt << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (int t = 0; t < nt; ++t) out << "5\n";
  out << "CELL_DATA " << nt << '\n';
  out << "VECTORS h double\n";
  for (const auto& v : f.h) out << num(v.x()) << ' ' << num(v.y()) << " 0\n";
  out << "VECTORS b double\n";
  for (const auto& v : f.b) out << num(v.x()) << ' ' << num(v.y()) << " 0\n";
  out << "SCALARS curl_h_minus_j double 1\nLOOKUP_TABLE default\n";
  for (double v : f.curl_residual) out << num(v) << '\n';
  out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int tag : mesh.tags) out << tag << '\n';
  if (!out) throw Error("error while writing VTK file " + path.string());
}

/// Structural summary of a legacy VTK unstructured grid written by write_vtk.
struct VtkSummary {
  int points = 0;
  int cells = 0;
  std::vector<std::string> cell_arrays;
};

inline VtkSummary read_vtk_summary(const std::filesystem::path& path) {
  const std::string p = path.string();
  const auto lines = detail::read_lines(path);
  if (lines.size() < 4 || lines[0].rfind("# vtk DataFile", 0) != 0)
    throw ParseError(p, 1, "not a legacy VTK file");
  if (lines[2] != "ASCII") throw ParseError(p, 3, "expected ASCII");
  if (lines[3] != "DATASET UNSTRUCTURED_GRID") throw ParseError(p, 4, "expected DATASET UNSTRUCTURED_GRID");
  VtkSummary s;
  bool in_cell_data = false;
  for (std::size_t i = 4; i < lines.size(); ++i) {
    const auto tok = detail::split_ws(lines[i]);
    if (tok.empty()) continue;
    const int ln = static_cast<int>(i + 1);
    if (tok[0] == "POINTS" && tok.size() == 3) {
      if (!detail::parse_number(tok[1], s.points)) throw ParseError(p, ln, "bad POINTS count");
      i += s.points;
    } else if (tok[0] == "CELLS" && tok.size() == 3) {
      if (!detail::parse_number(tok[1], s.cells)) throw ParseError(p, ln, "bad CELLS count");
      i += s.cells;
    } else if (tok[0] == "CELL_TYPES" && tok.size() == 2) {
      i += s.cells;
    } else if (tok[0] == "CELL_DATA" && tok.size() == 2) {
      int n = 0;
      if (!detail::parse_number(tok[1], n) || n != s.cells)
        throw ParseError(p, ln, "CELL_DATA count does not match CELLS");
      in_cell_data = true;
    } else if (in_cell_data && (tok[0] == "VECTORS" || tok[0] == "SCALARS") && tok.size() >= 3) {
      s.cell_arrays.emplace_back(tok[1]);
      if (tok[0] == "SCALARS") ++i;  // LOOKUP_TABLE line
      i += s.cells;
    } else {
      throw ParseError(p, ln, "unexpected line '" + lines[i] + "'");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV helpers

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::format_double(v);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("error while writing " + path.string());
}

}  // namespace maglab
