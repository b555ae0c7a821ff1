#include "splatseg/seg/decomposition.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/common/parallel.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace splatseg {
namespace {

void check_mask(const Camera& cam, const LabelImage& mask) {
    if (mask.width() != cam.width || mask.height() != cam.height) {
        throw ParameterError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                             " but camera " + std::to_string(cam.id) + " is " + std::to_string(cam.width) + "x" +
                             std::to_string(cam.height));
    }
}

void check_active(std::span<const std::uint8_t> active, std::size_t n) {
    if (!active.empty() && active.size() != n) {
        throw ParameterError("active flags must be parallel to the cloud");
    }
}

bool is_active(std::span<const std::uint8_t> active, std::size_t i) {
    return active.empty() || active[i] != 0;
}

enum class Crossing { none, one_out, both_out };

struct Classified {
    Crossing crossing = Crossing::none;
    BoundaryGaussian entry;
};

Classified classify(const GaussianCloud& cloud, std::size_t i, const Camera& cam, const LabelImage& mask,
                    const BoundaryOptions& options) {
    Classified out;
    const Gaussian& g = cloud[i];
    const CenterProjection center = project_center(cam, g.position);
    if (!center.in_front()) {
        return out;
    }
    const std::uint16_t label = label_at(mask, center.pixel.x(), center.pixel.y());
    if (label == 0) {
        return out;
    }
    CovarianceOptions cov;
    cov.low_pass = options.low_pass;
    const ProjectedGaussian p = project_gaussian(cam, g, cov);
    const auto& ends = p.long_axis_endpoints;
    const bool a_in = label_at(mask, ends.a.x(), ends.a.y()) == label;
    const bool b_in = label_at(mask, ends.b.x(), ends.b.y()) == label;
    if (a_in && b_in) {
        return out;
    }
    out.entry.index = i;
    out.entry.label = label;
    out.entry.projection = p;
    if (a_in != b_in) {
        out.crossing = Crossing::one_out;
        out.entry.inside = a_in ? Endpoint::a : Endpoint::b;
    } else {
        out.crossing = Crossing::both_out;
    }
    return out;
}

std::vector<BoundaryGaussian> collect(const GaussianCloud& cloud, const Camera& cam, const LabelImage& mask,
                                      std::span<const std::uint8_t> active, const BoundaryOptions& options,
                                      Crossing wanted) {
    check_mask(cam, mask);
    check_active(active, cloud.size());
    std::vector<Classified> found(cloud.size());
    parallel_for(cloud.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (is_active(active, i)) {
                found[i] = classify(cloud, i, cam, mask, options);
            }
        }
    });
    std::vector<BoundaryGaussian> out;
    for (auto& f : found) {
        if (f.crossing == wanted) {
            out.push_back(std::move(f.entry));
        }
    }
    return out;
}

} // namespace

void assign_view_labels(const GaussianCloud& cloud, const Camera& cam, const LabelImage& mask, LabelMatrix& labels,
                        std::span<const std::uint8_t> active, unsigned threads) {
    check_mask(cam, mask);
    check_active(active, cloud.size());
    labels.resize(cloud.size());
    constexpr int kNone = -1;
    std::vector<int> seen(cloud.size(), kNone);
    parallel_for(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (!is_active(active, i)) {
                continue;
            }
            const CenterProjection c = project_center(cam, cloud[i].position);
            if (!(c.depth > 0.0)) {
                continue;
            }
            const int px = pixel_index(c.pixel.x());
            const int py = pixel_index(c.pixel.y());
            if (mask.contains(px, py)) {
                seen[i] = mask(px, py);
            }
        }
    });
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (seen[i] != kNone) {
            labels.observe(i, cam.id, static_cast<std::uint16_t>(seen[i]));
        }
    }
}

std::vector<BoundaryGaussian> find_boundary_gaussians(const GaussianCloud& cloud, const Camera& cam,
                                                      const LabelImage& mask, std::span<const std::uint8_t> active,
                                                      const BoundaryOptions& options) {
    return collect(cloud, cam, mask, active, options, Crossing::one_out);
}

std::vector<BoundaryGaussian> find_both_out_gaussians(const GaussianCloud& cloud, const Camera& cam,
                                                      const LabelImage& mask, std::span<const std::uint8_t> active,
                                                      const BoundaryOptions& options) {
    return collect(cloud, cam, mask, active, options, Crossing::both_out);
}

double compute_lambda2d(const Eigen::Vector2d& a_in, const Eigen::Vector2d& b_out, const LabelImage& mask,
                        std::uint16_t label, double step) {
    return compute_lambda2d(
        a_in, b_out, [&](const Eigen::Vector2d& p) { return label_at(mask, p.x(), p.y()) == label; }, step);
}

std::optional<DecomposedPair> decompose(const Gaussian& g, int axis, double lambda, const Eigen::Vector3d& e) {
    if (axis < 0 || axis > 2) {
        throw ParameterError("decompose: axis must be 0, 1 or 2");
    }
    if (!(std::abs(e.norm() - 1.0) <= 1e-6) || !(std::abs(std::abs(e.dot(g.axis_direction(axis))) - 1.0) <= 1e-6)) {
        throw ParameterError("decompose: direction is not a unit vector along axis " + std::to_string(axis));
    }
    if (!(lambda >= kLambdaMin && lambda <= 1.0 - kLambdaMin)) {
        return std::nullopt;
    }
    const double half = 3.0 * g.scale[axis];
    DecomposedPair out{g, g};
    out.kept.scale[axis] = lambda * g.scale[axis];
    out.kept.position = g.position + half * (1.0 - lambda) * e;
    out.discarded.scale[axis] = (1.0 - lambda) * g.scale[axis];
    out.discarded.position = g.position - half * lambda * e;
    for (Gaussian* child : {&out.kept, &out.discarded}) {
        child->lineage.parent.reset();
        child->lineage.generation = g.lineage.generation + 1;
    }
    return out;
}

} // namespace splatseg
