#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/image.hpp"
#include "splatseg/model/gaussian.hpp"
#include "splatseg/seg/label_matrix.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace splatseg {

/// Split ratios are clamped to [kLambdaMin, 1 - kLambdaMin].
inline constexpr double kLambdaMin = 0.02;
/// Sampling step (pixels) along a long axis when searching for the mask boundary.
inline constexpr double kBoundaryStep = 0.5;

/// Records the label at the projected center of every active Gaussian whose
/// center has positive depth and lands inside the image. Gaussians outside the
/// frustum get no observation for this view. `active`, when non-empty, is
/// parallel to the cloud. Throws ParameterError when the mask size differs
/// from the camera's.
void assign_view_labels(const GaussianCloud& cloud, const Camera& cam, const LabelImage& mask, LabelMatrix& labels,
                        std::span<const std::uint8_t> active = {}, unsigned threads = 1);

enum class Endpoint { a, b };

struct BoundaryGaussian {
    std::size_t index = 0;
    /// Label at the center pixel; endpoints are tested against this label.
    std::uint16_t label = 0;
    /// Endpoint (of ProjectedGaussian::long_axis_endpoints) that lies in the mask.
    /// Meaningless for both-out entries.
    Endpoint inside = Endpoint::a;
    ProjectedGaussian projection;
};

struct BoundaryOptions {
    /// Projected covariance without the rendering low-pass floor.
    bool low_pass = false;
    unsigned threads = 1;
};

/// Active Gaussians whose center pixel carries a nonzero label and exactly one of
/// whose 3-sigma long-axis endpoints does not carry that label (off-image counts
/// as outside). Sorted by index.
std::vector<BoundaryGaussian> find_boundary_gaussians(const GaussianCloud& cloud, const Camera& cam,
                                                      const LabelImage& mask,
                                                      std::span<const std::uint8_t> active = {},
                                                      const BoundaryOptions& options = {});

/// Active Gaussians whose center pixel carries a nonzero label while both
/// long-axis endpoints are outside it. Sorted by index.
std::vector<BoundaryGaussian> find_both_out_gaussians(const GaussianCloud& cloud, const Camera& cam,
                                                      const LabelImage& mask,
                                                      std::span<const std::uint8_t> active = {},
                                                      const BoundaryOptions& options = {});

/// Fraction of the segment a -> b before the first exit from `inside`. Samples
/// every `step` pixels starting at `a` (and always at `b`); the exit point is
/// the midpoint between the last inside and the first outside sample. Returns
/// 1 when no sample is outside and 0 when `a` itself is outside.
template <class Inside>
    requires std::predicate<Inside&, const Eigen::Vector2d&>
double exit_fraction(const Eigen::Vector2d& a, const Eigen::Vector2d& b, Inside&& inside,
                     double step = kBoundaryStep) {
    const double length = (b - a).norm();
    if (!inside(a)) {
        return 0.0;
    }
    if (length == 0.0) {
        return 1.0;
    }
    const auto samples = static_cast<long>(std::ceil(length / step));
    double last_in = 0.0;
    for (long k = 1; k <= samples; ++k) {
        const double t = k == samples ? 1.0 : static_cast<double>(k) * step / length;
        if (!inside(a + t * (b - a))) {
            return 0.5 * (last_in + t);
        }
        last_in = t;
    }
    return 1.0;
}

/// lambda = |O* - A*| / |B* - A*| where O* is the first exit from the mask region
/// of `label` walking from A* (inside) toward B* (outside); clamped to
/// [kLambdaMin, 1 - kLambdaMin].
template <class Inside>
    requires std::predicate<Inside&, const Eigen::Vector2d&>
double compute_lambda2d(const Eigen::Vector2d& a_in, const Eigen::Vector2d& b_out, Inside&& inside,
                        double step = kBoundaryStep) {
    const double t = exit_fraction(a_in, b_out, inside, step);
    return std::clamp(t, kLambdaMin, 1.0 - kLambdaMin);
}

double compute_lambda2d(const Eigen::Vector2d& a_in, const Eigen::Vector2d& b_out, const LabelImage& mask,
                        std::uint16_t label = 1, double step = kBoundaryStep);

struct DecomposedPair {
    Gaussian kept;
    Gaussian discarded;
};

/// Splits `g` along local axis `axis` at ratio `lambda` measured from the end
/// `e` points to. With full axis length s = 6 * scale[axis], the kept child has
/// length lambda * s centered at mu + (1 - lambda) s / 2 * e; the discarded child
/// covers the rest, centered at mu - lambda s / 2 * e. Other fields are copied;
/// both children get generation + 1 and no parent (the caller sets it).
///
/// Returns nullopt when lambda is outside [kLambdaMin, 1 - kLambdaMin]. Throws
/// ParameterError when e is not a unit vector along the chosen axis.
std::optional<DecomposedPair> decompose(const Gaussian& g, int axis, double lambda, const Eigen::Vector3d& e);

struct DecompositionRecord {
    std::size_t parent = 0;
    std::size_t kept = 0;
    std::size_t discarded = 0;
    int view = 0;
    double lambda = 0.0;
    Eigen::Vector3d axis_dir = Eigen::Vector3d::UnitX();
    int generation = 0;

    bool operator==(const DecompositionRecord&) const = default;
};

} // namespace splatseg
