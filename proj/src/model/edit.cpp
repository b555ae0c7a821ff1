#include "splatseg/model/edit.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/model/spherical_harmonics.hpp"

#include <vector>

namespace splatseg {

EditTransform EditTransform::remove() { return EditTransform{}; }

EditTransform EditTransform::translate(const Eigen::Vector3d& offset) {
    EditTransform t;
    t.kind = EditKind::translate;
    t.translation = offset;
    return t;
}

EditTransform EditTransform::rotate(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& pivot) {
    if (rotation.norm() == 0.0 || !rotation.coeffs().allFinite()) {
        throw ParameterError("edit: rotation quaternion must be non-zero and finite");
    }
    EditTransform t;
    t.kind = EditKind::rotate;
    t.rotation = rotation.normalized();
    t.pivot = pivot;
    return t;
}

EditOutcome apply_edit(const GaussianCloud& cloud, std::span<const std::size_t> subset,
                       const EditTransform& transform, const EditOptions& options) {
    std::vector<char> selected(cloud.size(), 0);
    for (const auto i : subset) {
        if (i >= cloud.size()) {
            throw ParameterError("edit: index " + std::to_string(i) + " out of range (cloud has " +
                                 std::to_string(cloud.size()) + " gaussians)");
        }
        selected[i] = 1;
    }

    EditOutcome outcome;
    std::vector<Gaussian> out;
    out.reserve(cloud.size());

    switch (transform.kind) {
    case EditKind::remove:
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (selected[i] == 0) {
                out.push_back(cloud[i]);
            }
        }
        break;
    case EditKind::translate:
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            out.push_back(cloud[i]);
            if (selected[i] != 0) {
                out.back().position += transform.translation;
            }
        }
        break;
    case EditKind::rotate: {
        const Eigen::Quaterniond q = transform.rotation.normalized();
        const Eigen::Matrix3d r = q.toRotationMatrix();
        const bool identity = q.vec().isZero(0.0);
        bool skipped_sh = false;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            out.push_back(cloud[i]);
            if (selected[i] == 0 || identity) {
                continue;
            }
            Gaussian& g = out.back();
            g.position = r * (g.position - transform.pivot) + transform.pivot;
            g.rotation = (q * g.rotation).normalized();
            if (g.sh_degree > 0) {
                if (options.rotate_sh) {
                    rotate_sh(g.sh, g.sh_degree, r);
                } else {
                    skipped_sh = true;
                }
            }
        }
        if (skipped_sh) {
            outcome.warnings.emplace_back(
                "rotate: view-dependent SH coefficients (degree >= 1) were not rotated");
        }
        break;
    }
    }
    outcome.cloud = GaussianCloud(std::move(out), cloud.source());
    return outcome;
}

} // namespace splatseg
