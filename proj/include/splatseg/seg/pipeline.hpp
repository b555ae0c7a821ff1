#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/model/gaussian.hpp"
#include "splatseg/prompt/mask_provider.hpp"
#include "splatseg/prompt/prompt.hpp"
#include "splatseg/seg/decomposition.hpp"
#include "splatseg/seg/label_matrix.hpp"
#include "splatseg/seg/voting.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splatseg {

enum class GdMode {
    on,
    off,
    /// Ablation: boundary Gaussians are removed instead of split.
    remove,
};

std::string_view to_string(GdMode mode);
/// Accepts "on", "off" and "delete". Throws ParameterError otherwise.
GdMode parse_gd_mode(std::string_view text);

struct SegmentParams {
    double tau = kDefaultTau;
    double epsilon = kDefaultEpsilon;
    GdMode gd = GdMode::on;
    int generation_cap = 2;
    /// Boundary Gaussians whose projected long axis is shorter than this (pixels) are not split.
    double min_axis_px = 1.0;
    /// Deactivate the out-of-mask child instead of keeping it as background.
    bool discard_cut = false;
    /// Confidence divides by the number of processed views instead of N_i.
    bool global_n = false;
    /// Percentage of the camera list (evenly spaced) used for segmentation.
    double views_percent = 100.0;
    bool occlusion_test = true;
    /// Multi-object mode: multi-label masks and mode voting.
    bool multi = false;
    unsigned threads = 1;

    /// Throws ParameterError on out-of-range values.
    void validate() const;
};

/// Mutable state of one segmentation run. The cloud only grows; Gaussians
/// replaced by their children are flagged inactive.
struct SegmentationState {
    GaussianCloud cloud;
    LabelMatrix labels;
    std::vector<std::uint8_t> active;
    /// Out-of-mask children of a split: part of the scene but never of an object.
    std::vector<std::uint8_t> pinned;
    std::vector<DecompositionRecord> decompositions;
    /// Ids of the views processed so far, in order.
    std::vector<int> views;

    explicit SegmentationState(GaussianCloud base, int num_objects = 1);

    std::size_t active_count() const;
};

struct PassStats {
    int view = 0;
    /// One endpoint outside.
    std::size_t boundary = 0;
    /// Both endpoints outside, center inside.
    std::size_t both_out = 0;
    std::size_t splits = 0;
    std::size_t deleted = 0;
    /// Boundary Gaussians left intact (generation cap, short axis, no exit found).
    std::size_t skipped = 0;
};

/// Boundary handling for one view according to params.gd, then label assignment
/// over the active Gaussians. Both children inherit their parent's observations.
/// The discarded child is pinned to background: it stays in the scene, is
/// observed like any other Gaussian, but always votes 0 and is never split again.
PassStats run_view_pass(SegmentationState& state, const Camera& cam, const LabelImage& mask,
                        const SegmentParams& params);

struct SegmentationResult {
    std::vector<int> object_ids;
    std::vector<double> confidence;
    std::vector<std::uint8_t> active;
    std::vector<DecompositionRecord> decompositions;
    SegmentParams params;
    int num_objects = 1;
    std::vector<int> views;
    std::string provider;

    /// Active Gaussians with object id `object`.
    std::vector<std::size_t> members(int object = 1) const;
};

/// Votes over the state's label matrix with params.tau (binary) or mode voting (multi).
SegmentationResult vote(const SegmentationState& state, const SegmentParams& params);

enum class SegmentPhase { lifting, masking, labeling, voting };
std::string_view to_string(SegmentPhase phase);

/// Called with the phase and, while labeling, views done / total.
using ProgressFn = std::function<void(SegmentPhase, std::size_t done, std::size_t total)>;

struct PromptInput {
    int view0 = 0;
    std::vector<PromptPoint> points;
};

struct SegmentRun {
    SegmentationState state;
    SegmentationResult result;
    std::vector<PassStats> passes;
    std::optional<PromptSet> prompts;
    std::map<int, std::string> unusable_views;
};

/// Evenly spaced subset of `cams` (already sorted by id): max(2, round(p/100 * n))
/// cameras, always including the first. Throws ParameterError unless 0 < p <= 100.
std::vector<Camera> select_views(std::span<const Camera> cams, double percent);

/// Per-view passes in ascending camera id over the usable views of `masks`, then voting.
SegmentRun segment_with_masks(const GaussianCloud& cloud, std::span<const Camera> views, const MaskSet& masks,
                              const SegmentParams& params, const ProgressFn& progress = {});

/// End to end: optional prompt lifting and projection, mask requests, per-view
/// passes and voting. Without prompts the provider is asked for every selected
/// view. Throws PipelineError (or a subclass) when the run cannot complete.
SegmentRun segment(const GaussianCloud& cloud, std::span<const Camera> cams, MaskProvider& provider,
                   const std::optional<PromptInput>& prompts, const SegmentParams& params,
                   const ProgressFn& progress = {});

} // namespace splatseg
