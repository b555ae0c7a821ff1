#include "splatseg/model/spherical_harmonics.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <vector>

namespace splatseg {
namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                         -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                         0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                         -0.5900435899266435};

// Fibonacci sphere; 32 directions over-determine every band up to degree 3.
const std::vector<Eigen::Vector3d>& rotation_samples() {
    static const std::vector<Eigen::Vector3d> samples = [] {
        constexpr int n = 32;
        std::vector<Eigen::Vector3d> dirs;
        dirs.reserve(n);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double y = 1.0 - (2.0 * i + 1.0) / n;
            const double r = std::sqrt(1.0 - y * y);
            const double phi = golden * i;
            dirs.emplace_back(r * std::cos(phi), y, r * std::sin(phi));
        }
        return dirs;
    }();
    return samples;
}

} // namespace

std::array<double, kMaxShCoefficients> sh_basis(const Eigen::Vector3d& dir) {
    const double x = dir.x();
    const double y = dir.y();
    const double z = dir.z();
    const double xx = x * x;
    const double yy = y * y;
    const double zz = z * z;
    return {
        kShC0,
        -kShC1 * y,
        kShC1 * z,
        -kShC1 * x,
        kShC2[0] * x * y,
        kShC2[1] * y * z,
        kShC2[2] * (2.0 * zz - xx - yy),
        kShC2[3] * x * z,
        kShC2[4] * (xx - yy),
        kShC3[0] * y * (3.0 * xx - yy),
        kShC3[1] * x * y * z,
        kShC3[2] * y * (4.0 * zz - xx - yy),
        kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        kShC3[4] * x * (4.0 * zz - xx - yy),
        kShC3[5] * z * (xx - yy),
        kShC3[6] * x * (xx - 3.0 * yy),
    };
}

Eigen::Vector3d eval_sh(const Gaussian& g, const Eigen::Vector3d& view_dir) {
    const auto basis = sh_basis(view_dir);
    const int count = sh_coefficient_count(g.sh_degree);
    Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);
    for (int k = 0; k < count; ++k) {
        rgb += basis[static_cast<std::size_t>(k)] * g.sh[static_cast<std::size_t>(k)];
    }
    return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

void rotate_sh(ShCoefficients& sh, int degree, const Eigen::Matrix3d& rotation) {
    const auto& dirs = rotation_samples();
    const auto m = static_cast<Eigen::Index>(dirs.size());
    const Eigen::Matrix3d inverse = rotation.transpose();
    for (int band = 1; band <= degree; ++band) {
        const int first = band * band;
        const int width = 2 * band + 1;
        Eigen::MatrixXd at_dirs(m, width);
        Eigen::MatrixXd at_rotated(m, width);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto plain = sh_basis(dirs[static_cast<std::size_t>(i)]);
            const auto rotated = sh_basis(inverse * dirs[static_cast<std::size_t>(i)]);
            for (int k = 0; k < width; ++k) {
                at_dirs(i, k) = plain[static_cast<std::size_t>(first + k)];
                at_rotated(i, k) = rotated[static_cast<std::size_t>(first + k)];
            }
        }
        // Rotations preserve each band, so the least-squares fit is exact.
        const Eigen::MatrixXd band_rotation = at_dirs.colPivHouseholderQr().solve(at_rotated);
        Eigen::MatrixXd coeffs(width, 3);
        for (int k = 0; k < width; ++k) {
            coeffs.row(k) = sh[static_cast<std::size_t>(first + k)].transpose();
        }
        const Eigen::MatrixXd rotated_coeffs = band_rotation * coeffs;
        for (int k = 0; k < width; ++k) {
            sh[static_cast<std::size_t>(first + k)] = rotated_coeffs.row(k).transpose();
        }
    }
}

} // namespace splatseg
