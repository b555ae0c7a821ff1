#pragma once

#include "splatseg/model/gaussian.hpp"

#include <Eigen/Core>

#include <array>

namespace splatseg {

inline constexpr double kShC0 = 0.28209479177387814;

/// Real SH basis values at a unit direction, in the coefficient order used by
/// 3D-GS scenes (degree-major, Condon-Shortley signs).
std::array<double, kMaxShCoefficients> sh_basis(const Eigen::Vector3d& dir);

/// View-dependent color: sum_k basis_k(dir) * sh_k + 0.5, clamped to [0, 1].
/// `view_dir` points from the camera toward the Gaussian.
Eigen::Vector3d eval_sh(const Gaussian& g, const Eigen::Vector3d& view_dir);

/// Rotates the degree >= 1 coefficients so that the rotated color field satisfies
/// f'(d) = f(R^T d). Degree 0 is rotation invariant and left untouched.
void rotate_sh(ShCoefficients& sh, int degree, const Eigen::Matrix3d& rotation);

} // namespace splatseg
