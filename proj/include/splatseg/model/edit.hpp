#pragma once

#include "splatseg/model/gaussian.hpp"

#include <span>
#include <string>
#include <vector>

namespace splatseg {

enum class EditKind { remove, translate, rotate };

/// Rigid edit applied to a segmented subset.
struct EditTransform {
    EditKind kind = EditKind::remove;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::Vector3d pivot = Eigen::Vector3d::Zero();

    static EditTransform remove();
    static EditTransform translate(const Eigen::Vector3d& offset);
    /// The quaternion is normalized; throws ParameterError if it is zero.
    static EditTransform rotate(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& pivot);
};

struct EditOptions {
    /// Rotate degree >= 1 SH coefficients with the geometry. When off, they are
    /// left as-is and a warning is recorded.
    bool rotate_sh = false;
};

struct EditOutcome {
    GaussianCloud cloud;
    std::vector<std::string> warnings;
};

/// Gaussians outside `subset` are copied bit-for-bit. `remove` deletes the subset
/// and keeps the complement in order. Throws ParameterError naming any
/// out-of-range index.
EditOutcome apply_edit(const GaussianCloud& cloud, std::span<const std::size_t> subset,
                       const EditTransform& transform, const EditOptions& options = {});

} // namespace splatseg
