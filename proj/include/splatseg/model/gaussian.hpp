#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace splatseg {

/// Highest supported spherical-harmonic degree.
constexpr int kMaxShDegree = 3;
constexpr int kMaxShCoefficients = (kMaxShDegree + 1) * (kMaxShDegree + 1);

constexpr int sh_coefficient_count(int degree) { return (degree + 1) * (degree + 1); }

/// Coefficient k holds the (r, g, b) weights of real SH basis function k.
using ShCoefficients = std::array<Eigen::Vector3d, kMaxShCoefficients>;

ShCoefficients zero_sh();

/// Run-local provenance of a Gaussian produced by decomposition. Not serialized.
struct Lineage {
    std::optional<std::size_t> parent;
    int generation = 0;

    bool operator==(const Lineage&) const = default;
};

/// One anisotropic 3D Gaussian. Scale holds per-axis standard deviations in scene
/// units, rotation maps local axes to world axes.
struct Gaussian {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d scale = Eigen::Vector3d::Ones();
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    double opacity = 1.0;
    int sh_degree = 0;
    ShCoefficients sh = zero_sh();
    Lineage lineage;

    Eigen::Matrix3d rotation_matrix() const;

    /// R * diag(scale^2) * R^T.
    Eigen::Matrix3d covariance() const;

    /// World-space unit vector of local axis `axis` (0, 1 or 2).
    Eigen::Vector3d axis_direction(int axis) const;

    /// Throws DataError when an invariant does not hold: unit quaternion (1e-6),
    /// positive finite scales, opacity in [0, 1], finite fields, SH degree in [0, 3].
    void validate() const;

    bool operator==(const Gaussian& other) const;
};

/// Builds a Gaussian with a normalized rotation and a constant base color
/// (RGB in [0, 1], encoded in the degree-0 coefficient).
Gaussian make_gaussian(const Eigen::Vector3d& position, const Eigen::Vector3d& scale,
                       const Eigen::Quaterniond& rotation, double opacity,
                       const Eigen::Vector3d& rgb = Eigen::Vector3d::Constant(0.5));

/// Degree-0 coefficient that renders to `rgb` (before clamping).
Eigen::Vector3d rgb_to_sh_dc(const Eigen::Vector3d& rgb);

struct Aabb {
    Eigen::Vector3d min = Eigen::Vector3d::Zero();
    Eigen::Vector3d max = Eigen::Vector3d::Zero();

    bool contains(const Eigen::Vector3d& p) const;
};

/// Ordered set of Gaussians. Indices are stable for one pipeline run; growth is
/// append-only.
class GaussianCloud {
public:
    GaussianCloud() = default;
    explicit GaussianCloud(std::vector<Gaussian> gaussians, std::string source = {});

    std::size_t size() const noexcept { return gaussians_.size(); }
    bool empty() const noexcept { return gaussians_.empty(); }

    const Gaussian& operator[](std::size_t i) const { return gaussians_[i]; }
    Gaussian& operator[](std::size_t i) { return gaussians_[i]; }

    auto begin() const noexcept { return gaussians_.begin(); }
    auto end() const noexcept { return gaussians_.end(); }

    const std::vector<Gaussian>& gaussians() const noexcept { return gaussians_; }

    /// Appends and returns the new index.
    std::size_t append(Gaussian g);

    const std::string& source() const noexcept { return source_; }
    void set_source(std::string source) { source_ = std::move(source); }

    /// Smallest box containing every center. Throws ParameterError on an empty cloud.
    Aabb bounds() const;

    /// Highest SH degree among the Gaussians.
    int sh_degree() const noexcept;

    /// Copy holding only the listed Gaussians, in the listed order.
    GaussianCloud subset(const std::vector<std::size_t>& indices) const;

    void validate() const;

private:
    std::vector<Gaussian> gaussians_;
    std::string source_;
};

} // namespace splatseg
