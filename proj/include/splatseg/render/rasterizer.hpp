#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/image.hpp"
#include "splatseg/model/gaussian.hpp"

#include <optional>
#include <span>
#include <vector>

namespace splatseg {

/// Per-Gaussian screen weights below this are skipped.
inline constexpr double kMinAlpha = 1.0 / 255.0;
/// Per-Gaussian screen weights are clamped to this.
inline constexpr double kMaxAlpha = 0.99;
/// Per-pixel traversal stops once transmittance drops below this.
inline constexpr double kMinTransmittance = 1e-4;
/// Accumulated alpha at or above this counts as covered for masks and ID maps.
inline constexpr double kMaskThreshold = 0.5;

struct RenderOptions {
    Rgb background = {0.0f, 0.0f, 0.0f};
    bool low_pass = true;
    int tile_size = 16;
    /// Worker threads for tiles; 0 = one per hardware thread.
    unsigned threads = 1;
};

struct RenderOutput {
    RgbImage rgb;
    /// Alpha-weighted expected depth, 0 where nothing contributes.
    FloatImage depth;
    FloatImage alpha;
    /// Present only for label renders (render_id_map).
    std::optional<LabelImage> id_map;
};

/// Front-to-back alpha blending of every Gaussian, sorted globally by center depth.
RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const RenderOptions& options = {});

/// Same as render() restricted to `indices` (order irrelevant; duplicates ignored).
RenderOutput render_subset(const GaussianCloud& cloud, std::span<const std::size_t> indices, const Camera& cam,
                           const RenderOptions& options = {});

/// Binary {0, 1} mask: accumulated alpha of the subset >= 0.5. An empty subset
/// yields an all-zero mask.
LabelImage render_object_mask(const GaussianCloud& cloud, std::span<const std::size_t> subset, const Camera& cam,
                              const RenderOptions& options = {});

/// Per pixel, the label with the largest total blended weight; 0 where the
/// accumulated alpha is below 0.5. Throws ParameterError on a length mismatch.
LabelImage render_id_map(const GaussianCloud& cloud, std::span<const int> labels, const Camera& cam,
                         const RenderOptions& options = {});

/// Full render plus the label map in one pass.
RenderOutput render_with_labels(const GaussianCloud& cloud, std::span<const std::size_t> indices,
                                std::span<const int> labels, const Camera& cam, const RenderOptions& options = {});

/// Indices of Gaussians that are `true` in `mask`.
std::vector<std::size_t> indices_where(std::span<const std::uint8_t> mask);

} // namespace splatseg
