#include "splatseg/seg/pipeline.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace splatseg {
namespace {

std::vector<Camera> sorted_by_id(std::span<const Camera> cams) {
    std::vector<Camera> out(cams.begin(), cams.end());
    std::sort(out.begin(), out.end(), [](const Camera& a, const Camera& b) { return a.id < b.id; });
    return out;
}

struct Splitter {
    SegmentationState& state;
    const Camera& cam;
    const SegmentParams& params;

    // Splits Gaussian i at `lambda` measured from the end `e` points to and
    // returns the kept child's index.
    std::optional<std::size_t> split(std::size_t i, int axis, double lambda, const Eigen::Vector3d& e) {
        const Gaussian parent = state.cloud[i];
        auto pair = decompose(parent, axis, std::clamp(lambda, kLambdaMin, 1.0 - kLambdaMin), e);
        if (!pair) {
            return std::nullopt;
        }
        pair->kept.lineage.parent = i;
        pair->discarded.lineage.parent = i;
        const std::size_t kept = state.cloud.append(std::move(pair->kept));
        state.labels.append_child(i);
        state.active.push_back(1);
        state.pinned.push_back(0);
        const std::size_t discarded = state.cloud.append(std::move(pair->discarded));
        state.labels.append_child(i);
        state.active.push_back(params.discard_cut ? 0 : 1);
        state.pinned.push_back(1);
        state.active[i] = 0;
        state.decompositions.push_back({i, kept, discarded, cam.id, std::clamp(lambda, kLambdaMin, 1.0 - kLambdaMin),
                                        e, parent.lineage.generation + 1});
        return kept;
    }
};

} // namespace

std::string_view to_string(GdMode mode) {
    switch (mode) {
    case GdMode::on:
        return "on";
    case GdMode::off:
        return "off";
    case GdMode::remove:
        return "delete";
    }
    return "on";
}

GdMode parse_gd_mode(std::string_view text) {
    if (text == "on") {
        return GdMode::on;
    }
    if (text == "off") {
        return GdMode::off;
    }
    if (text == "delete") {
        return GdMode::remove;
    }
    throw ParameterError("gd mode must be one of on, off, delete; got '" + std::string(text) + "'");
}

std::string_view to_string(SegmentPhase phase) {
    switch (phase) {
    case SegmentPhase::lifting:
        return "lifting";
    case SegmentPhase::masking:
        return "masking";
    case SegmentPhase::labeling:
        return "labeling";
    case SegmentPhase::voting:
        return "voting";
    }
    return "labeling";
}

void SegmentParams::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ParameterError("tau must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ParameterError("epsilon must be positive");
    }
    if (generation_cap < 0) {
        throw ParameterError("generation cap must be non-negative");
    }
    if (!(min_axis_px >= 0.0)) {
        throw ParameterError("minimum axis length must be non-negative");
    }
    if (!(views_percent > 0.0 && views_percent <= 100.0)) {
        throw ParameterError("views percent must lie in (0, 100]");
    }
}

SegmentationState::SegmentationState(GaussianCloud base, int num_objects)
    : cloud(std::move(base)), labels(cloud.size(), num_objects), active(cloud.size(), 1), pinned(cloud.size(), 0) {}

std::size_t SegmentationState::active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), std::uint8_t{1}));
}

PassStats run_view_pass(SegmentationState& state, const Camera& cam, const LabelImage& mask,
                        const SegmentParams& params) {
    PassStats stats;
    stats.view = cam.id;
    if (params.gd != GdMode::off) {
        BoundaryOptions options;
        options.threads = params.threads;
        std::vector<std::uint8_t> candidates(state.active.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            candidates[i] = state.active[i] != 0 && state.pinned[i] == 0 ? 1 : 0;
        }
        auto one_out = find_boundary_gaussians(state.cloud, cam, mask, candidates, options);
        auto both_out = find_both_out_gaussians(state.cloud, cam, mask, candidates, options);
        stats.boundary = one_out.size();
        stats.both_out = both_out.size();

        std::vector<std::pair<BoundaryGaussian, bool>> entries;
        entries.reserve(one_out.size() + both_out.size());
        for (auto& b : one_out) {
            entries.emplace_back(std::move(b), false);
        }
        for (auto& b : both_out) {
            entries.emplace_back(std::move(b), true);
        }
        std::sort(entries.begin(), entries.end(),
                  [](const auto& x, const auto& y) { return x.first.index < y.first.index; });

        if (params.gd == GdMode::remove) {
            for (const auto& [b, both] : entries) {
                state.active[b.index] = 0;
                ++stats.deleted;
            }
        } else {
            Splitter splitter{state, cam, params};
            for (const auto& [b, both] : entries) {
                const std::size_t before = state.decompositions.size();
                const Gaussian& g = state.cloud[b.index];
                const int generation = g.lineage.generation;
                const ProjectedGaussian& p = b.projection;
                const double axis_px = 6.0 * std::sqrt(std::max(major_axis(p.cov2d).major, 0.0));
                if (generation >= params.generation_cap || axis_px < params.min_axis_px) {
                    ++stats.skipped;
                    continue;
                }
                // The split runs along the principal 3D axis; its image under the
                // local affine map is the segment searched for the mask boundary.
                const Eigen::Matrix<double, 2, 3> m = linearized_projection(cam, g.position);
                const Eigen::Vector3d e_a = p.long_axis_dir3d;
                const Eigen::Vector2d offset = m * (e_a * p.long_axis_halflen3d);
                const Eigen::Vector2d end_a = p.center2d + offset;
                const Eigen::Vector2d end_b = p.center2d - offset;
                const auto inside = [&](const Eigen::Vector2d& q) { return label_at(mask, q.x(), q.y()) == b.label; };
                const int axis = p.long_axis_index;

                if (!both) {
                    const bool a_in = b.inside == Endpoint::a;
                    const Eigen::Vector2d& from = a_in ? end_a : end_b;
                    const Eigen::Vector2d& to = a_in ? end_b : end_a;
                    const double t = exit_fraction(from, to, inside);
                    if (t > 0.0 && t < 1.0) {
                        splitter.split(b.index, axis, t, a_in ? e_a : Eigen::Vector3d(-e_a));
                    }
                } else {
                    // Parameter s runs from end_a (0) to end_b (1); the center is at 0.5.
                    const double s1 = 0.5 - 0.5 * exit_fraction(p.center2d, end_a, inside);
                    const double s2 = 0.5 + 0.5 * exit_fraction(p.center2d, end_b, inside);
                    const bool cut_a = s1 > 0.0;
                    const bool cut_b = s2 < 1.0;
                    if (cut_a && cut_b) {
                        if (generation + 2 <= params.generation_cap) {
                            if (const auto kept = splitter.split(b.index, axis, s2, e_a)) {
                                splitter.split(*kept, axis, (s2 - s1) / s2, -e_a);
                            }
                        }
                    } else if (cut_b) {
                        splitter.split(b.index, axis, s2, e_a);
                    } else if (cut_a) {
                        splitter.split(b.index, axis, 1.0 - s1, -e_a);
                    }
                }
                const std::size_t made = state.decompositions.size() - before;
                if (made == 0) {
                    ++stats.skipped;
                }
                stats.splits += made;
            }
        }
    }
    assign_view_labels(state.cloud, cam, mask, state.labels, state.active, params.threads);
    state.views.push_back(cam.id);
    return stats;
}

std::vector<std::size_t> SegmentationResult::members(int object) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < object_ids.size(); ++i) {
        if (object_ids[i] == object && (active.empty() || active[i] != 0)) {
            out.push_back(i);
        }
    }
    return out;
}

SegmentationResult vote(const SegmentationState& state, const SegmentParams& params) {
    SegmentationResult result;
    Votes votes;
    if (params.multi) {
        votes = vote_multiobject(state.labels, state.active);
    } else {
        BinaryVoteOptions options;
        if (params.global_n) {
            options.global_views = std::max<std::size_t>(state.views.size(), 1);
        }
        votes = vote_binary(state.labels, params.tau, state.active, options);
    }
    for (std::size_t i = 0; i < state.pinned.size(); ++i) {
        if (state.pinned[i] != 0) {
            votes.object_ids[i] = 0;
            votes.confidence[i] = 0.0;
        }
    }
    result.object_ids = std::move(votes.object_ids);
    result.confidence = std::move(votes.confidence);
    result.active = state.active;
    result.decompositions = state.decompositions;
    result.params = params;
    result.num_objects = state.labels.num_objects();
    result.views = state.views;
    return result;
}

std::vector<Camera> select_views(std::span<const Camera> cams, double percent) {
    if (!(percent > 0.0 && percent <= 100.0)) {
        throw ParameterError("views percent must lie in (0, 100]");
    }
    const std::size_t n = cams.size();
    if (n <= 2) {
        return {cams.begin(), cams.end()};
    }
    const auto wanted = static_cast<std::size_t>(std::llround(percent / 100.0 * static_cast<double>(n)));
    const std::size_t count = std::clamp<std::size_t>(wanted, 2, n);
    std::vector<Camera> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        out.push_back(cams[k * n / count]);
    }
    return out;
}

SegmentRun segment_with_masks(const GaussianCloud& cloud, std::span<const Camera> views, const MaskSet& masks,
                              const SegmentParams& params, const ProgressFn& progress) {
    params.validate();
    if (masks.usable_count() < 2) {
        throw PipelineError("at least 2 usable views are required, got " + std::to_string(masks.usable_count()));
    }
    int num_objects = 1;
    if (params.multi) {
        std::uint16_t highest = 0;
        for (const auto& [id, mask] : masks.masks) {
            for (const auto v : mask.pixels()) {
                highest = std::max(highest, v);
            }
        }
        if (highest < 2) {
            throw PipelineError("multi-object mode needs masks with at least 2 object labels");
        }
        num_objects = highest;
    }
    const auto ordered = sorted_by_id(views);
    SegmentRun run{SegmentationState(cloud, num_objects), {}, {}, std::nullopt, masks.unusable};
    std::size_t total = 0;
    for (const auto& cam : ordered) {
        total += masks.usable(cam.id) ? 1 : 0;
    }
    std::size_t done = 0;
    for (const auto& cam : ordered) {
        const auto it = masks.masks.find(cam.id);
        if (it == masks.masks.end()) {
            continue;
        }
        if (params.multi) {
            run.passes.push_back(run_view_pass(run.state, cam, it->second, params));
        } else {
            LabelImage binary = it->second;
            for (auto& v : binary.pixels()) {
                v = v != 0 ? 1 : 0;
            }
            run.passes.push_back(run_view_pass(run.state, cam, binary, params));
        }
        ++done;
        if (progress) {
            progress(SegmentPhase::labeling, done, total);
        }
    }
    if (progress) {
        progress(SegmentPhase::voting, total, total);
    }
    run.result = vote(run.state, params);
    run.result.provider = masks.provider;
    return run;
}

SegmentRun segment(const GaussianCloud& cloud, std::span<const Camera> cams, MaskProvider& provider,
                   const std::optional<PromptInput>& prompts, const SegmentParams& params,
                   const ProgressFn& progress) {
    params.validate();
    if (cloud.empty()) {
        throw PipelineError("the scene has no gaussians");
    }
    const auto all = sorted_by_id(cams);
    if (all.size() < 2) {
        throw PipelineError("at least 2 cameras are required");
    }
    const auto views = select_views(all, params.views_percent);

    std::optional<PromptSet> lifted;
    std::vector<ViewPrompts> view_prompts;
    std::vector<RgbImage> images;
    if (prompts) {
        if (progress) {
            progress(SegmentPhase::lifting, 0, views.size());
        }
        const auto cam0 = std::find_if(all.begin(), all.end(), [&](const Camera& c) { return c.id == prompts->view0; });
        if (cam0 == all.end()) {
            throw ParameterError("prompt view " + std::to_string(prompts->view0) + " is not a camera");
        }
        std::optional<FloatImage> depth0;
        if (params.occlusion_test) {
            RenderOptions options;
            options.threads = params.threads;
            depth0 = render(cloud, *cam0, options).depth;
        }
        lifted = lift_prompts(cloud, *cam0, prompts->points, params.epsilon, depth0 ? &*depth0 : nullptr);
        std::vector<FloatImage> depth;
        if (params.occlusion_test || provider.needs_images()) {
            RenderOptions options;
            options.threads = params.threads;
            for (const auto& cam : views) {
                RenderOutput out = render(cloud, cam, options);
                if (params.occlusion_test) {
                    depth.push_back(std::move(out.depth));
                }
                if (provider.needs_images()) {
                    images.push_back(std::move(out.rgb));
                }
            }
        }
        ProjectionOptions projection;
        projection.occlusion_test = params.occlusion_test;
        view_prompts = project_prompts(*lifted, views, depth, projection);
    } else if (provider.needs_images()) {
        RenderOptions options;
        options.threads = params.threads;
        for (const auto& cam : views) {
            images.push_back(render(cloud, cam, options).rgb);
        }
    }

    if (progress) {
        progress(SegmentPhase::masking, 0, views.size());
    }
    const MaskSet masks = get_masks(provider, views, images, view_prompts);
    SegmentRun run = segment_with_masks(cloud, views, masks, params, progress);
    run.prompts = std::move(lifted);
    return run;
}

} // namespace splatseg
