#include "splatseg/model/gaussian.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/model/spherical_harmonics.hpp"

#include <cmath>

namespace splatseg {

ShCoefficients zero_sh() {
    ShCoefficients sh;
    sh.fill(Eigen::Vector3d::Zero());
    return sh;
}

Eigen::Matrix3d Gaussian::rotation_matrix() const {
    return rotation.normalized().toRotationMatrix();
}

Eigen::Matrix3d Gaussian::covariance() const {
    const Eigen::Matrix3d r = rotation_matrix();
    const Eigen::Matrix3d m = r * scale.asDiagonal();
    Eigen::Matrix3d cov = m * m.transpose();
    // exact symmetry
    cov = 0.5 * (cov + cov.transpose()).eval();
    return cov;
}

Eigen::Vector3d Gaussian::axis_direction(int axis) const {
    return rotation_matrix().col(axis);
}

void Gaussian::validate() const {
    if (!position.allFinite()) {
        throw DataError("gaussian: non-finite position");
    }
    if (!scale.allFinite() || (scale.array() <= 0.0).any()) {
        throw DataError("gaussian: scale components must be positive and finite");
    }
    if (!rotation.coeffs().allFinite() || std::abs(rotation.norm() - 1.0) > 1e-6) {
        throw DataError("gaussian: rotation quaternion is not normalized");
    }
    if (!std::isfinite(opacity) || opacity < 0.0 || opacity > 1.0) {
        throw DataError("gaussian: opacity outside [0, 1]");
    }
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw DataError("gaussian: SH degree outside [0, 3]");
    }
    for (const auto& c : sh) {
        if (!c.allFinite()) {
            throw DataError("gaussian: non-finite SH coefficient");
        }
    }
}

bool Gaussian::operator==(const Gaussian& other) const {
    return position == other.position && scale == other.scale &&
           rotation.coeffs() == other.rotation.coeffs() && opacity == other.opacity &&
           sh_degree == other.sh_degree && sh == other.sh && lineage == other.lineage;
}

Eigen::Vector3d rgb_to_sh_dc(const Eigen::Vector3d& rgb) {
    return (rgb.array() - 0.5) / kShC0;
}

Gaussian make_gaussian(const Eigen::Vector3d& position, const Eigen::Vector3d& scale,
                       const Eigen::Quaterniond& rotation, double opacity, const Eigen::Vector3d& rgb) {
    Gaussian g;
    g.position = position;
    g.scale = scale;
    g.rotation = rotation.normalized();
    g.opacity = opacity;
    g.sh_degree = 0;
    g.sh[0] = rgb_to_sh_dc(rgb);
    g.validate();
    return g;
}

bool Aabb::contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

GaussianCloud::GaussianCloud(std::vector<Gaussian> gaussians, std::string source)
    : gaussians_(std::move(gaussians)), source_(std::move(source)) {}

std::size_t GaussianCloud::append(Gaussian g) {
    gaussians_.push_back(std::move(g));
    return gaussians_.size() - 1;
}

Aabb GaussianCloud::bounds() const {
    if (gaussians_.empty()) {
        throw ParameterError("bounds of an empty cloud");
    }
    Aabb box{gaussians_.front().position, gaussians_.front().position};
    for (const auto& g : gaussians_) {
        box.min = box.min.cwiseMin(g.position);
        box.max = box.max.cwiseMax(g.position);
    }
    return box;
}

int GaussianCloud::sh_degree() const noexcept {
    int degree = 0;
    for (const auto& g : gaussians_) {
        degree = std::max(degree, g.sh_degree);
    }
    return degree;
}

GaussianCloud GaussianCloud::subset(const std::vector<std::size_t>& indices) const {
    std::vector<Gaussian> out;
    out.reserve(indices.size());
    for (const auto i : indices) {
        if (i >= gaussians_.size()) {
            throw ParameterError("subset index " + std::to_string(i) + " out of range");
        }
        out.push_back(gaussians_[i]);
    }
    return GaussianCloud(std::move(out), source_);
}

void GaussianCloud::validate() const {
    for (std::size_t i = 0; i < gaussians_.size(); ++i) {
        try {
            gaussians_[i].validate();
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + " (element " + std::to_string(i) + ")");
        }
    }
}

} // namespace splatseg
