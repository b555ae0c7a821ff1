#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/errors.hpp"
#include "splatseg/common/image.hpp"
#include "splatseg/model/gaussian.hpp"

#include <span>
#include <string>
#include <vector>

namespace splatseg {

/// Default Manhattan radius (pixels) for matching a click to a Gaussian center.
inline constexpr double kDefaultEpsilon = 2.0;
/// A projected prompt is occluded when its depth exceeds the rendered depth by this fraction.
inline constexpr double kOcclusionTolerance = 0.05;

enum class Polarity { background = 0, foreground = 1 };

struct PromptPoint {
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    Polarity polarity = Polarity::foreground;
};

/// A foreground click resolved to the center of one Gaussian.
struct Anchor {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    std::size_t gaussian = 0;
    /// Index into PromptSet::points.
    std::size_t point = 0;
    double depth = 0.0;
};

struct PromptSet {
    int view0 = 0;
    std::vector<PromptPoint> points;
    std::vector<Anchor> anchors;
    double epsilon = kDefaultEpsilon;
};

/// Raised when some foreground clicks have no Gaussian center within epsilon.
class NoAnchorError : public PipelineError {
public:
    NoAnchorError(std::vector<std::size_t> points, double epsilon);
    const std::vector<std::size_t>& points() const noexcept { return points_; }

private:
    std::vector<std::size_t> points_;
};

/// For every foreground click, picks among Gaussian centers with positive depth and
/// L1 pixel distance < epsilon the one with the smallest depth (ties: lowest
/// index). Background clicks are kept in `points` but not lifted.
///
/// With `depth0` (the rendered depth of cam0), candidates hidden behind the
/// rendered surface by more than `tolerance` are only used when no visible
/// candidate lies within epsilon.
///
/// Throws ParameterError for clicks outside the image or when there is no
/// foreground click, NoAnchorError when a click has no candidate.
PromptSet lift_prompts(const GaussianCloud& cloud, const Camera& cam0, std::span<const PromptPoint> points,
                       double epsilon = kDefaultEpsilon, const FloatImage* depth0 = nullptr,
                       double tolerance = kOcclusionTolerance);

/// Prompts for one view after projection.
struct ViewPrompts {
    int view_id = 0;
    std::vector<PromptPoint> points;
    /// Anchor index (into PromptSet::anchors) per foreground point; background
    /// points carry SIZE_MAX.
    std::vector<std::size_t> anchors;
    bool usable = false;
    std::string reason;
};

struct ProjectionOptions {
    bool occlusion_test = true;
    double occlusion_tolerance = kOcclusionTolerance;
};

/// Projects every anchor into every camera. Anchors behind the camera, off-image,
/// or (with depth maps) hidden behind rendered geometry are dropped per view; a
/// view left without foreground prompts is flagged unusable. Background clicks
/// are forwarded to view0 only. `depth_maps`, when non-empty, is parallel to `cams`.
std::vector<ViewPrompts> project_prompts(const PromptSet& prompts, std::span<const Camera> cams,
                                         std::span<const FloatImage> depth_maps = {},
                                         const ProjectionOptions& options = {});

} // namespace splatseg
