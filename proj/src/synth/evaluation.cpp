#include "splatseg/synth/evaluation.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/render/rasterizer.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace splatseg {

RunMetrics evaluate_run(const SynthScene& scene, const GaussianCloud& cloud, const SegmentationResult& result,
                        int object, int band, unsigned threads, int result_object) {
    if (std::find(scene.gt_labels.begin(), scene.gt_labels.end(), object) == scene.gt_labels.end()) {
        throw ParameterError("evaluate_run: unknown object id " + std::to_string(object));
    }
    if (result.object_ids.size() != cloud.size()) {
        throw ParameterError("evaluate_run: result covers " + std::to_string(result.object_ids.size()) +
                             " gaussians, cloud has " + std::to_string(cloud.size()));
    }
    const std::vector<std::size_t> members = result.members(result_object == 0 ? object : result_object);
    RenderOptions options;
    options.threads = threads;

    RunMetrics out;
    out.object = object;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const Camera& cam = scene.cameras[v];
        FloatImage alpha(cam.width, cam.height, 0.0f);
        if (!members.empty()) {
            alpha = render_subset(cloud, members, cam, options).alpha;
        }
        LabelImage pred(cam.width, cam.height, 0);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            pred.pixels()[i] = alpha.pixels()[i] >= kMaskThreshold ? 1 : 0;
        }
        const LabelImage gt = select_label(scene.gt_masks[v], static_cast<std::uint16_t>(object));
        out.per_view.push_back({cam.id, mask_metrics(pred, gt, band, &alpha)});
    }

    MaskMetrics& mean = out.mean;
    mean.band_width = band;
    const double n = static_cast<double>(std::max<std::size_t>(out.per_view.size(), 1));
    for (const auto& v : out.per_view) {
        mean.iou += v.metrics.iou / n;
        mean.acc += v.metrics.acc / n;
        mean.boundary_iou += v.metrics.boundary_iou / n;
        mean.boundary_ap += v.metrics.boundary_ap / n;
        mean.boundary_f1 += v.metrics.boundary_f1 / n;
    }
    return out;
}

SegmentationResult ground_truth_result(const SynthScene& scene) {
    SegmentationResult r;
    r.object_ids = scene.gt_labels;
    r.confidence.assign(scene.gt_labels.size(), 1.0);
    r.active.assign(scene.gt_labels.size(), 1);
    r.provider = "ground-truth";
    return r;
}

std::string metrics_csv(const RunMetrics& metrics) {
    std::ostringstream out;
    out << std::setprecision(10);
    out << "view,iou,acc,boundary_iou,boundary_ap,boundary_f1,band,ap_single_point\n";
    for (const auto& v : metrics.per_view) {
        const MaskMetrics& m = v.metrics;
        out << v.view << ',' << m.iou << ',' << m.acc << ',' << m.boundary_iou << ',' << m.boundary_ap << ','
            << m.boundary_f1 << ',' << m.band_width << ',' << (m.ap_single_point ? 1 : 0) << '\n';
    }
    return out.str();
}

nlohmann::json metrics_to_json(const MaskMetrics& m) {
    return {{"iou", m.iou},
            {"acc", m.acc},
            {"boundary_iou", m.boundary_iou},
            {"boundary_ap", m.boundary_ap},
            {"boundary_f1", m.boundary_f1},
            {"band_width", m.band_width},
            {"ap_single_point", m.ap_single_point}};
}

nlohmann::json metrics_json(const RunMetrics& metrics) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : metrics.per_view) {
        nlohmann::json row = metrics_to_json(v.metrics);
        row["view"] = v.view;
        views.push_back(row);
    }
    return {{"object", metrics.object}, {"mean", metrics_to_json(metrics.mean)}, {"views", views}};
}

std::shared_ptr<OracleProvider> make_oracle_provider(const SynthScene& scene, bool binary) {
    std::map<int, LabelImage> masks;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        masks.emplace(scene.cameras[v].id, scene.gt_masks[v]);
    }
    std::optional<std::uint16_t> target;
    if (binary) {
        target = static_cast<std::uint16_t>(scene.config.target_label);
    }
    return std::make_shared<OracleProvider>(std::move(masks), target);
}

PresetOutcome run_on_scene(const SynthScene& scene, const PresetRunOptions& options) {
    const auto provider = make_oracle_provider(scene, !options.params.multi);
    std::optional<PromptInput> prompts = options.prompts;
    if (!prompts && options.use_prompts) {
        prompts = auto_prompt(scene, 0);
    }
    SegmentRun run = segment(scene.cloud, scene.cameras, *provider, prompts, options.params);
    const int target = scene.config.target_label;
    RunMetrics metrics = evaluate_run(scene, run.state.cloud, run.result, target, options.band,
                                      options.params.threads, options.params.multi ? target : 1);
    return {std::move(run), std::move(metrics)};
}

} // namespace splatseg
