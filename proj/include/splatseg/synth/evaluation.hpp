#pragma once

#include "splatseg/prompt/mask_provider.hpp"
#include "splatseg/seg/pipeline.hpp"
#include "splatseg/synth/metrics.hpp"
#include "splatseg/synth/scene_generator.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace splatseg {

struct ViewMetrics {
    int view = 0;
    MaskMetrics metrics;
};

struct RunMetrics {
    int object = 1;
    std::vector<ViewMetrics> per_view;
    /// Mean of every field over the views.
    MaskMetrics mean;
};

/// Renders the active Gaussians of `cloud` labelled `object` in every scene
/// camera, thresholds alpha at 0.5 and scores against gt_masks == object.
/// `cloud` is the (possibly decomposed) cloud the result refers to. Throws
/// ParameterError for an unknown object or a result of the wrong length.
/// `result_object` is the id the result uses for the object when it differs
/// (binary runs mark the target with 1); 0 means the same as `object`.
RunMetrics evaluate_run(const SynthScene& scene, const GaussianCloud& cloud, const SegmentationResult& result,
                        int object, int band = kDefaultBand, unsigned threads = 1, int result_object = 0);

/// Result that marks exactly the generator's Gaussians of each label.
SegmentationResult ground_truth_result(const SynthScene& scene);

/// One row per view: view,iou,acc,boundary_iou,boundary_ap,boundary_f1,band,ap_single_point.
std::string metrics_csv(const RunMetrics& metrics);
nlohmann::json metrics_to_json(const MaskMetrics& metrics);
nlohmann::json metrics_json(const RunMetrics& metrics);

struct PresetRunOptions {
    SegmentParams params;
    /// Lift automatic clicks in view 0; otherwise masks are requested directly.
    bool use_prompts = true;
    /// Explicit prompts; take precedence over the automatic ones.
    std::optional<PromptInput> prompts;
    int band = kDefaultBand;
};

struct PresetOutcome {
    SegmentRun run;
    RunMetrics metrics;
};

/// Ground-truth masks of every camera; binary ones mark the target label only.
std::shared_ptr<OracleProvider> make_oracle_provider(const SynthScene& scene, bool binary);

/// Segments the scene's target with ground-truth masks (OracleProvider) and
/// evaluates on every camera.
PresetOutcome run_on_scene(const SynthScene& scene, const PresetRunOptions& options);

} // namespace splatseg
