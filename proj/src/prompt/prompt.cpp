#include "splatseg/prompt/prompt.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace splatseg {
namespace {

std::string describe_points(const std::vector<std::size_t>& points, double epsilon) {
    std::ostringstream msg;
    msg << "no anchor within epsilon=" << epsilon << " px for prompt point(s)";
    for (const auto p : points) {
        msg << ' ' << p;
    }
    return msg.str();
}

} // namespace

NoAnchorError::NoAnchorError(std::vector<std::size_t> points, double epsilon)
    : PipelineError(describe_points(points, epsilon)), points_(std::move(points)) {}

PromptSet lift_prompts(const GaussianCloud& cloud, const Camera& cam0, std::span<const PromptPoint> points,
                       double epsilon, const FloatImage* depth0, double tolerance) {
    if (!(epsilon > 0.0)) {
        throw ParameterError("lift_prompts: epsilon must be positive");
    }
    PromptSet out;
    out.view0 = cam0.id;
    out.epsilon = epsilon;
    out.points.assign(points.begin(), points.end());

    bool any_foreground = false;
    for (const auto& p : points) {
        if (!(p.pixel.x() >= 0.0 && p.pixel.y() >= 0.0 && p.pixel.x() <= cam0.width - 1 &&
              p.pixel.y() <= cam0.height - 1)) {
            throw ParameterError("lift_prompts: point (" + std::to_string(p.pixel.x()) + ", " +
                                 std::to_string(p.pixel.y()) + ") is outside the image");
        }
        any_foreground = any_foreground || p.polarity == Polarity::foreground;
    }
    if (!any_foreground) {
        throw ParameterError("at least one foreground point is required");
    }
    if (depth0 != nullptr && (depth0->width() != cam0.width || depth0->height() != cam0.height)) {
        throw ParameterError("lift_prompts: depth map does not match the camera");
    }

    std::vector<CenterProjection> projected(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        projected[i] = project_center(cam0, cloud[i].position);
    }

    std::vector<std::size_t> missing;
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].polarity != Polarity::foreground) {
            continue;
        }
        constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
        std::size_t best = none;
        std::size_t best_visible = none;
        double best_depth = std::numeric_limits<double>::infinity();
        double best_visible_depth = best_depth;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const auto& c = projected[i];
            if (!(c.depth > 0.0)) {
                continue;
            }
            const double l1 = std::abs(c.pixel.x() - points[k].pixel.x()) + std::abs(c.pixel.y() - points[k].pixel.y());
            if (!(l1 < epsilon)) {
                continue;
            }
            // Strict comparisons keep the lowest index among equal depths.
            if (c.depth < best_depth) {
                best_depth = c.depth;
                best = i;
            }
            if (depth0 != nullptr && c.depth < best_visible_depth) {
                const int px = pixel_index(c.pixel.x());
                const int py = pixel_index(c.pixel.y());
                const double surface = depth0->contains(px, py) ? (*depth0)(px, py) : 0.0;
                if (surface <= 0.0 || c.depth <= surface * (1.0 + tolerance)) {
                    best_visible_depth = c.depth;
                    best_visible = i;
                }
            }
        }
        if (best_visible != none) {
            best = best_visible;
            best_depth = best_visible_depth;
        }
        if (best == none) {
            missing.push_back(k);
            continue;
        }
        out.anchors.push_back({cloud[best].position, best, k, best_depth});
    }
    if (!missing.empty()) {
        throw NoAnchorError(std::move(missing), epsilon);
    }
    return out;
}

std::vector<ViewPrompts> project_prompts(const PromptSet& prompts, std::span<const Camera> cams,
                                         std::span<const FloatImage> depth_maps, const ProjectionOptions& options) {
    if (!depth_maps.empty() && depth_maps.size() != cams.size()) {
        throw ParameterError("project_prompts: depth maps must be parallel to cameras");
    }
    std::vector<ViewPrompts> out;
    out.reserve(cams.size());
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const Camera& cam = cams[v];
        ViewPrompts view;
        view.view_id = cam.id;
        std::size_t behind = 0, outside = 0, occluded = 0;
        for (std::size_t a = 0; a < prompts.anchors.size(); ++a) {
            const CenterProjection c = project_center(cam, prompts.anchors[a].position);
            if (!c.in_front()) {
                ++behind;
                continue;
            }
            const int px = pixel_index(c.pixel.x());
            const int py = pixel_index(c.pixel.y());
            if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) {
                ++outside;
                continue;
            }
            if (options.occlusion_test && !depth_maps.empty()) {
                const FloatImage& depth = depth_maps[v];
                if (depth.contains(px, py)) {
                    const double rendered = depth(px, py);
                    if (rendered > 0.0 && c.depth > rendered * (1.0 + options.occlusion_tolerance)) {
                        ++occluded;
                        continue;
                    }
                }
            }
            view.points.push_back({c.pixel, Polarity::foreground});
            view.anchors.push_back(a);
        }
        view.usable = !view.points.empty();
        if (!view.usable) {
            std::ostringstream reason;
            reason << "no surviving prompts (behind=" << behind << ", outside=" << outside
                   << ", occluded=" << occluded << ")";
            view.reason = reason.str();
        }
        if (cam.id == prompts.view0) {
            for (const auto& p : prompts.points) {
                if (p.polarity == Polarity::background) {
                    view.points.push_back(p);
                    view.anchors.push_back(std::numeric_limits<std::size_t>::max());
                }
            }
        }
        out.push_back(std::move(view));
    }
    return out;
}

} // namespace splatseg
