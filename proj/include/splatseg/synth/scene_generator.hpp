#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/image.hpp"
#include "splatseg/model/gaussian.hpp"
#include "splatseg/seg/pipeline.hpp"
#include "splatseg/synth/presets.hpp"

#include <cstdint>
#include <vector>

namespace splatseg {

struct SynthScene {
    SceneConfig config;
    std::uint64_t seed = 0;
    GaussianCloud cloud;
    /// Object label per Gaussian.
    std::vector<int> gt_labels;
    /// Sorted by id; ids are 0..n-1.
    std::vector<Camera> cameras;
    /// render_id_map of the ground-truth labels, parallel to `cameras`.
    std::vector<LabelImage> gt_masks;

    std::vector<std::size_t> members(int label) const;
};

/// Deterministic in (config, seed). Box faces and spheres are sampled with thin
/// surface-tangent Gaussians whose 3-sigma footprint stays on the face (and out
/// of cutouts); contact bands add Gaussians that reach below the object's base.
/// Throws ParameterError for an invalid config and DataError when an object is
/// not visible in any ground-truth mask.
SynthScene gen_scene(const SceneConfig& config, std::uint64_t seed);

/// Ground-truth masks for the given cloud labels (render_id_map per camera).
std::vector<LabelImage> render_gt_masks(const GaussianCloud& cloud, const std::vector<int>& labels,
                                        const std::vector<Camera>& cameras);

/// Up to `clicks` foreground clicks in camera `view` on the target object, each
/// at the projected center of a visible target Gaussian. The first is the one
/// deepest inside the target's mask, the rest are spread out by farthest-point
/// selection. Throws PipelineError when the target is not visible in that view.
PromptInput auto_prompt(const SynthScene& scene, std::size_t view = 0, int clicks = 3);

} // namespace splatseg
