// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <numbers>

namespace maglab {

/// In-plane vector (h in A/m, b in T, positions in m).
using Vec2 = Eigen::Vector2d;
/// Symmetric 2x2 tensors (differential permeability / reluctivity).
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Vacuum permeability, H/m.
inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;

}  // namespace maglab
