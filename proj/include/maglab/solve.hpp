// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "maglab/assembly.hpp"
#include "maglab/errors.hpp"
#include "maglab/mesh.hpp"
#include "maglab/types.hpp"

namespace maglab {

struct NewtonConfig {
  double tolerance = 1e-10;      // relative to the initial residual
  double abs_tolerance = 1e-14;  // absolute floor
  int max_iterations = 50;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double min_step = 0x1p-30;

  void validate() const {
    if (!(tolerance > 0.0)) throw ParameterError("newton: tolerance must be positive");
    if (!(abs_tolerance >= 0.0)) throw ParameterError("newton: absolute tolerance must be >= 0");
    if (max_iterations < 0) throw ParameterError("newton: max_iterations must be >= 0");
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ParameterError("newton: need 0 < c1 < 1");
    if (!(backtrack > 0.0 && backtrack < 1.0))
      throw ParameterError("newton: need 0 < backtracking factor < 1");
    if (!(min_step > 0.0 && min_step <= 1.0)) throw ParameterError("newton: need 0 < min_step <= 1");
  }

  friend bool operator==(const NewtonConfig&, const NewtonConfig&) = default;
};

/// Row k describes iterate x_k; step and linear_iters describe the update
/// that produced it (zero for the initial row).
struct TraceRow {
  int iter = 0;
  double residual = 0.0;
  double energy = 0.0;
  double step = 0.0;
  int linear_iters = 0;
  // Not exported: dimensionless optimality measure of x_k (when the problem
  // defines one) and Newton decrement sqrt(-<r_k, d_k>) of the step taken
  // from x_k.
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  double decrement = std::numeric_limits<double>::quiet_NaN();
};

struct SolveTrace {
  std::vector<TraceRow> rows;

  int iterations() const { return rows.empty() ? 0 : static_cast<int>(rows.size()) - 1; }
  double final_residual() const { return rows.empty() ? 0.0 : rows.back().residual; }
};

inline void write_trace_csv(const SolveTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file " + path.string());
  out << "iter,residual,energy,step,linear_iters\n";
  for (const auto& r : trace.rows) {
    out << r.iter << ',' << detail::format_double(r.residual) << ','
        << detail::format_double(r.energy) << ',' << detail::format_double(r.step) << ','
        << r.linear_iters << '\n';
  }
}

class SolverError : public Error {
 public:
  SolverError(const std::string& what, SolveTrace trace) : Error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

class NonConvergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

class StallError : public SolverError {
 public:
  using SolverError::SolverError;
};

// ---------------------------------------------------------------------------
// Linear solvers

enum class Preconditioner { none, diagonal };

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for SPD operators.
inline CgResult cg_solve(const SparseMatrix& A, const Vector& b, double tol,
                         Preconditioner pc = Preconditioner::diagonal, int max_iterations = -1) {
  const Eigen::Index n = b.size();
  if (A.rows() != n || A.cols() != n) throw OperatorError("cg_solve: dimension mismatch");
  if (max_iterations < 0) max_iterations = static_cast<int>(10 * n);

  Vector inv_diag = Vector::Ones(n);
  if (pc == Preconditioner::diagonal) {
    const Vector d = A.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw OperatorError("cg_solve: non-positive diagonal entry");
      inv_diag[i] = 1.0 / d[i];
    }
  }

  CgResult out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;

  Vector r = b;
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector Ap = A * p;
    const double curvature = p.dot(Ap);
    if (!(curvature > 0.0))
      throw OperatorError("cg_solve: non-positive curvature, operator is not SPD");
    const double alpha = rz / curvature;
    out.x += alpha * p;
    r -= alpha * Ap;
    out.iterations = it;
    out.relative_residual = r.norm() / bnorm;
    if (out.relative_residual <= tol) return out;
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw NonConvergenceError("cg_solve: no convergence after " + std::to_string(max_iterations) +
                                " iterations (relative residual " +
                                std::to_string(out.relative_residual) + ")",
                            SolveTrace{});
}

/// Sparse LU with residual-driven iterative refinement; works for the
/// symmetric indefinite saddle-point systems of the limit solver.
inline Vector direct_solve(const SparseMatrix& A, const Vector& b, double rel_tol = 1e-10) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw OperatorError("direct_solve: dimension mismatch");
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw RankError("direct_solve: singular factorization (" + lu.lastErrorMessage() + ")");
  Vector x = lu.solve(b);
  const double bnorm = b.norm();
  double rnorm = (b - A * x).norm();
  for (int pass = 0; pass < 3 && rnorm > 1e-15 * bnorm; ++pass) {
    const Vector dx = lu.solve(b - A * x);
    const Vector trial = x + dx;
    const double trial_norm = (b - A * trial).norm();
    if (!(trial_norm < rnorm)) break;
    x = trial;
    rnorm = trial_norm;
  }
  if (!x.allFinite() || rnorm > rel_tol * bnorm)
    throw RankError("direct_solve: residual check failed (relative residual " +
                    std::to_string(bnorm > 0 ? rnorm / bnorm : rnorm) + ")");
  return x;
}

/// Sparse LDL^T for SPD systems, reusing the symbolic analysis between calls
/// with the same sparsity pattern.
class SpdSolver {
 public:
  Vector solve(const SparseMatrix& A, const Vector& b) {
    if (!analyzed_ || A.nonZeros() != nnz_ || A.rows() != rows_) {
      ldlt_.analyzePattern(A);
      analyzed_ = true;
      nnz_ = A.nonZeros();
      rows_ = A.rows();
    }
    ldlt_.factorize(A);
    if (ldlt_.info() != Eigen::Success) throw OperatorError("SPD factorization failed");
    Vector x = ldlt_.solve(b);
    // One refinement pass keeps the step accurate on badly scaled Jacobians.
    x += ldlt_.solve(b - A * x);
    if (!x.allFinite()) throw OperatorError("SPD solve produced non-finite values");
    return x;
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  Eigen::Index nnz_ = -1;
  Eigen::Index rows_ = -1;
};

// ---------------------------------------------------------------------------
// Newton with Armijo backtracking

/// Convex energy with gradient and SPD Hessian. `stationarity`, when set,
/// is an additional dimensionless optimality measure that must also drop
/// below the tolerance (used where the Euclidean residual norm mixes badly
/// scaled components).
struct NewtonProblem {
  std::function<double(const Vector&)> energy;
  std::function<Assembly(const Vector&)> assemble;
  std::function<double(const Vector&)> stationarity;
};

struct NewtonResult {
  Vector x;
  SolveTrace trace;
  int iterations() const { return trace.iterations(); }
};

inline NewtonResult newton(const NewtonProblem& problem, Vector x, const NewtonConfig& cfg) {
  cfg.validate();
  NewtonResult out;
  SpdSolver linear;

  Assembly sys = problem.assemble(x);
  double energy = problem.energy(x);
  const double r0 = sys.residual.norm();
  auto measure = [&](const Vector& state) {
    return problem.stationarity ? problem.stationarity(state) : std::numeric_limits<double>::quiet_NaN();
  };
  out.trace.rows.push_back({0, r0, energy, 0.0, 0, measure(x)});
  const double target = std::max(cfg.tolerance * r0, cfg.abs_tolerance);

  auto converged = [&](const TraceRow& row) {
    if (row.residual <= cfg.abs_tolerance) return true;
    if (row.residual > target) return false;
    return !problem.stationarity || row.stationarity <= cfg.tolerance;
  };

  int k = 0;
  while (!converged(out.trace.rows.back())) {
    if (k == cfg.max_iterations) {
      out.x = x;
      throw NonConvergenceError("newton: no convergence after " + std::to_string(k) +
                                    " iterations (residual " +
                                    std::to_string(out.trace.rows.back().residual) + ")",
                                out.trace);
    }
    const Vector d = linear.solve(sys.jacobian, -sys.residual);
    const double slope = sys.residual.dot(d);
    out.trace.rows.back().decrement = std::sqrt(std::max(0.0, -slope));
    if (!(slope < 0.0)) {
      // The direction no longer resolves a descent: the residual is at the
      // round-off level of the assembly.
      if (problem.stationarity && out.trace.rows.back().stationarity <= cfg.tolerance) break;
      throw StallError("newton: Newton direction is not a descent direction", out.trace);
    }

    double t = 1.0;
    double trial_energy = problem.energy(x + d);
    // Predicted decrease below the resolution of the energy: take the full
    // step, the iteration is in its local quadratic regime.
    const bool resolved = -slope > 64.0 * std::numeric_limits<double>::epsilon() * std::abs(energy);
    if (resolved) {
      while (!(trial_energy <= energy + cfg.armijo_c1 * t * slope)) {
        t *= cfg.backtrack;
        if (t < cfg.min_step)
          throw StallError("newton: line search stalled below the minimum step", out.trace);
        trial_energy = problem.energy(x + t * d);
      }
    }
    x += t * d;
    energy = trial_energy;
    ++k;
    sys = problem.assemble(x);
    out.trace.rows.push_back({k, sys.residual.norm(), energy, t, 1, measure(x)});
  }
  out.x = std::move(x);
  return out;
}

}  // namespace maglab
