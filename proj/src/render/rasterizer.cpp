#include "splatseg/render/rasterizer.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/common/parallel.hpp"
#include "splatseg/model/spherical_harmonics.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace splatseg {
namespace {

struct Splat {
    Eigen::Vector2d center;
    // Inverse of the screen covariance (a b; b c).
    double conic_a = 0.0;
    double conic_b = 0.0;
    double conic_c = 0.0;
    double opacity = 0.0;
    double depth = 0.0;
    Eigen::Vector3f color;
    int label = 0;
    // Pixel rectangle that can receive alpha >= kMinAlpha.
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
};

// Radius multiplier (in standard deviations) beyond which opacity * G < kMinAlpha.
double cutoff_sigmas(double opacity) {
    const double limit = 2.0 * std::log(255.0 * opacity);
    return std::max(3.0, std::sqrt(std::max(limit, 0.0)));
}

std::vector<Splat> prepare(const GaussianCloud& cloud, std::span<const std::size_t> indices,
                           std::span<const int> labels, const Camera& cam, const RenderOptions& options) {
    std::vector<std::size_t> order(indices.begin(), indices.end());
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());

    const Eigen::Vector3d eye = cam.position();
    CovarianceOptions cov_options;
    cov_options.low_pass = options.low_pass;

    struct Keyed {
        double depth;
        std::size_t index;
        Splat splat;
    };
    std::vector<Keyed> visible;
    visible.reserve(order.size());
    for (const std::size_t i : order) {
        if (i >= cloud.size()) {
            throw ParameterError("render: index " + std::to_string(i) + " out of range");
        }
        const Gaussian& g = cloud[i];
        if (g.opacity * 255.0 < 1.0) {
            continue;
        }
        const CenterProjection center = project_center(cam, g.position);
        if (!center.in_front()) {
            continue;
        }
        const Eigen::Matrix2d cov = project_covariance(cam, g, cov_options);
        const double det = cov.determinant();
        if (!(det > 0.0) || !std::isfinite(det)) {
            continue;
        }
        Splat s;
        s.center = center.pixel;
        s.conic_a = cov(1, 1) / det;
        s.conic_b = -cov(0, 1) / det;
        s.conic_c = cov(0, 0) / det;
        s.opacity = g.opacity;
        s.depth = center.depth;
        s.color = eval_sh(g, (g.position - eye).normalized()).cast<float>();
        s.label = labels.empty() ? 0 : labels[i];
        const double k = cutoff_sigmas(g.opacity);
        const double rx = k * std::sqrt(cov(0, 0));
        const double ry = k * std::sqrt(cov(1, 1));
        const double fx0 = std::ceil(s.center.x() - rx);
        const double fx1 = std::floor(s.center.x() + rx);
        const double fy0 = std::ceil(s.center.y() - ry);
        const double fy1 = std::floor(s.center.y() + ry);
        if (fx1 < 0.0 || fy1 < 0.0 || fx0 > cam.width - 1 || fy0 > cam.height - 1) {
            continue;
        }
        s.x0 = static_cast<int>(std::max(fx0, 0.0));
        s.y0 = static_cast<int>(std::max(fy0, 0.0));
        s.x1 = static_cast<int>(std::min(fx1, static_cast<double>(cam.width - 1)));
        s.y1 = static_cast<int>(std::min(fy1, static_cast<double>(cam.height - 1)));
        visible.push_back({center.depth, i, s});
    }
    std::sort(visible.begin(), visible.end(), [](const Keyed& a, const Keyed& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    std::vector<Splat> splats;
    splats.reserve(visible.size());
    for (auto& k : visible) {
        splats.push_back(k.splat);
    }
    return splats;
}

RenderOutput rasterize(const std::vector<Splat>& splats, const Camera& cam, const RenderOptions& options,
                       bool with_labels) {
    const int width = cam.width;
    const int height = cam.height;
    const int tile = std::max(1, options.tile_size);
    const int tiles_x = (width + tile - 1) / tile;
    const int tiles_y = (height + tile - 1) / tile;

    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * static_cast<std::size_t>(tiles_y));
    for (std::size_t s = 0; s < splats.size(); ++s) {
        const Splat& sp = splats[s];
        for (int ty = sp.y0 / tile; ty <= sp.y1 / tile; ++ty) {
            for (int tx = sp.x0 / tile; tx <= sp.x1 / tile; ++tx) {
                bins[static_cast<std::size_t>(ty * tiles_x + tx)].push_back(static_cast<std::uint32_t>(s));
            }
        }
    }

    RenderOutput out;
    out.rgb = RgbImage(width, height, options.background);
    out.depth = FloatImage(width, height, 0.0f);
    out.alpha = FloatImage(width, height, 0.0f);
    if (with_labels) {
        out.id_map = LabelImage(width, height, 0);
    }

    parallel_for(bins.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<int, double>> label_weights;
        for (std::size_t t = begin; t < end; ++t) {
            const int tx = static_cast<int>(t) % tiles_x;
            const int ty = static_cast<int>(t) / tiles_x;
            const auto& bin = bins[t];
            const int px_end = std::min(width, (tx + 1) * tile);
            const int py_end = std::min(height, (ty + 1) * tile);
            for (int py = ty * tile; py < py_end; ++py) {
                for (int px = tx * tile; px < px_end; ++px) {
                    double transmittance = 1.0;
                    double r = 0.0, g = 0.0, b = 0.0, depth = 0.0;
                    label_weights.clear();
                    for (const std::uint32_t s : bin) {
                        const Splat& sp = splats[s];
                        const double dx = px - sp.center.x();
                        const double dy = py - sp.center.y();
                        const double power =
                            -0.5 * (sp.conic_a * dx * dx + sp.conic_c * dy * dy) - sp.conic_b * dx * dy;
                        const double alpha = std::min(kMaxAlpha, sp.opacity * std::exp(power));
                        if (alpha < kMinAlpha) {
                            continue;
                        }
                        const double weight = alpha * transmittance;
                        r += weight * sp.color.x();
                        g += weight * sp.color.y();
                        b += weight * sp.color.z();
                        depth += weight * sp.depth;
                        if (with_labels) {
                            auto it = std::find_if(label_weights.begin(), label_weights.end(),
                                                   [&](const auto& lw) { return lw.first == sp.label; });
                            if (it == label_weights.end()) {
                                label_weights.emplace_back(sp.label, weight);
                            } else {
                                it->second += weight;
                            }
                        }
                        transmittance *= 1.0 - alpha;
                        if (transmittance < kMinTransmittance) {
                            break;
                        }
                    }
                    const double accumulated = 1.0 - transmittance;
                    const auto& bg = options.background;
                    out.rgb(px, py) = {static_cast<float>(r + transmittance * bg[0]),
                                       static_cast<float>(g + transmittance * bg[1]),
                                       static_cast<float>(b + transmittance * bg[2])};
                    out.alpha(px, py) = static_cast<float>(accumulated);
                    out.depth(px, py) = accumulated > 0.0 ? static_cast<float>(depth / accumulated) : 0.0f;
                    if (with_labels && accumulated >= kMaskThreshold) {
                        int best_label = 0;
                        double best_weight = -1.0;
                        for (const auto& [label, w] : label_weights) {
                            if (w > best_weight || (w == best_weight && label < best_label)) {
                                best_label = label;
                                best_weight = w;
                            }
                        }
                        (*out.id_map)(px, py) = static_cast<std::uint16_t>(best_label);
                    }
                }
            }
        }
    });
    return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

} // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const RenderOptions& options) {
    const auto idx = all_indices(cloud.size());
    return render_subset(cloud, idx, cam, options);
}

RenderOutput render_subset(const GaussianCloud& cloud, std::span<const std::size_t> indices, const Camera& cam,
                           const RenderOptions& options) {
    const auto splats = prepare(cloud, indices, {}, cam, options);
    return rasterize(splats, cam, options, false);
}

LabelImage render_object_mask(const GaussianCloud& cloud, std::span<const std::size_t> subset, const Camera& cam,
                              const RenderOptions& options) {
    LabelImage mask(cam.width, cam.height, 0);
    if (subset.empty()) {
        return mask;
    }
    const RenderOutput out = render_subset(cloud, subset, cam, options);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask.pixels()[i] = out.alpha.pixels()[i] >= kMaskThreshold ? 1 : 0;
    }
    return mask;
}

RenderOutput render_with_labels(const GaussianCloud& cloud, std::span<const std::size_t> indices,
                                std::span<const int> labels, const Camera& cam, const RenderOptions& options) {
    if (labels.size() != cloud.size()) {
        throw ParameterError("render_id_map: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(cloud.size()) + " gaussians");
    }
    for (const int label : labels) {
        if (label < 0 || label > 0xFFFF) {
            throw ParameterError("render_id_map: label " + std::to_string(label) + " outside [0, 65535]");
        }
    }
    const auto splats = prepare(cloud, indices, labels, cam, options);
    return rasterize(splats, cam, options, true);
}

LabelImage render_id_map(const GaussianCloud& cloud, std::span<const int> labels, const Camera& cam,
                         const RenderOptions& options) {
    const auto idx = all_indices(cloud.size());
    return *render_with_labels(cloud, idx, labels, cam, options).id_map;
}

std::vector<std::size_t> indices_where(std::span<const std::uint8_t> mask) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0) {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace splatseg
