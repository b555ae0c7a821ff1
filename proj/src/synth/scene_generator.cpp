#include "splatseg/synth/scene_generator.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/render/rasterizer.hpp"
#include "splatseg/synth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace splatseg {
namespace {

using Eigen::Vector2d;
using Eigen::Vector3d;

constexpr double kMinSigma = 1e-4;

struct Rect {
    double u0, u1, v0, v1;

    double area() const { return (u1 - u0) * (v1 - v0); }
    bool contains(double u, double v) const { return u > u0 && u < u1 && v > v0 && v < v1; }
};

// Footprint removed from a face: an axis-aligned rectangle or a disk.
struct Cutout {
    bool disk = false;
    Rect rect{0, 0, 0, 0};
    Vector2d center = Vector2d::Zero();
    double radius = 0.0;

    bool contains(double u, double v) const {
        return disk ? (Vector2d(u, v) - center).norm() < radius : rect.contains(u, v);
    }
    double overlap_area(const Rect& r) const {
        if (disk) {
            return std::numbers::pi * radius * radius;
        }
        const double du = std::max(0.0, std::min(rect.u1, r.u1) - std::max(rect.u0, r.u0));
        const double dv = std::max(0.0, std::min(rect.v1, r.v1) - std::max(rect.v0, r.v0));
        return du * dv;
    }
    // Largest factor for which the scaled 3-sigma box stays outside.
    double fit(double a, double b, double ext_u, double ext_v) const {
        if (disk) {
            const double gap = (Vector2d(a, b) - center).norm() - radius;
            return gap / std::max(ext_u, ext_v);
        }
        const double gap_u = std::max(rect.u0 - a, a - rect.u1);
        const double gap_v = std::max(rect.v0 - b, b - rect.v1);
        return std::max(gap_u / ext_u, gap_v / ext_v);
    }
};

struct Face {
    std::string name;
    Vector3d center;
    Vector3d normal;
    Vector3d u;
    Vector3d v;
    Rect region;
    std::vector<Cutout> cutouts;
    bool side = false;
};

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    Vector3d unit_vector() {
        std::normal_distribution<double> n(0.0, 1.0);
        Vector3d v;
        do {
            v = Vector3d(n(rng_), n(rng_), n(rng_));
        } while (v.norm() < 1e-9);
        return v.normalized();
    }

private:
    std::mt19937_64 rng_;
};

std::vector<Face> box_faces(const ObjectConfig& o) {
    const Vector3d h = 0.5 * o.size;
    const Vector3d c = o.center;
    std::vector<Face> faces = {
        {"+x", c + Vector3d(h.x(), 0, 0), Vector3d::UnitX(), Vector3d::UnitY(), Vector3d::UnitZ(),
         {-h.y(), h.y(), -h.z(), h.z()}, {}, true},
        {"-x", c - Vector3d(h.x(), 0, 0), -Vector3d::UnitX(), -Vector3d::UnitY(), Vector3d::UnitZ(),
         {-h.y(), h.y(), -h.z(), h.z()}, {}, true},
        {"+y", c + Vector3d(0, h.y(), 0), Vector3d::UnitY(), -Vector3d::UnitX(), Vector3d::UnitZ(),
         {-h.x(), h.x(), -h.z(), h.z()}, {}, true},
        {"-y", c - Vector3d(0, h.y(), 0), -Vector3d::UnitY(), Vector3d::UnitX(), Vector3d::UnitZ(),
         {-h.x(), h.x(), -h.z(), h.z()}, {}, true},
        {"+z", c + Vector3d(0, 0, h.z()), Vector3d::UnitZ(), Vector3d::UnitX(), Vector3d::UnitY(),
         {-h.x(), h.x(), -h.y(), h.y()}, {}, false},
        {"-z", c - Vector3d(0, 0, h.z()), -Vector3d::UnitZ(), Vector3d::UnitY(), Vector3d::UnitX(),
         {-h.y(), h.y(), -h.x(), h.x()}, {}, false},
    };
    std::vector<Face> out;
    for (auto& f : faces) {
        if (std::find(o.omit_faces.begin(), o.omit_faces.end(), f.name) == o.omit_faces.end()) {
            out.push_back(std::move(f));
        }
    }
    return out;
}

// Splits `total` proportionally to `weights` (largest remainder, ties to the lower index).
std::vector<int> apportion(int total, const std::vector<double>& weights) {
    std::vector<int> out(weights.size(), 0);
    double sum = 0.0;
    for (const double w : weights) {
        sum += w;
    }
    if (weights.empty() || !(sum > 0.0)) {
        return out;
    }
    std::vector<std::pair<double, std::size_t>> rest;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = total * weights[i] / sum;
        out[i] = static_cast<int>(std::floor(exact));
        assigned += out[i];
        rest.emplace_back(exact - out[i], i);
    }
    std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < total - assigned; ++k) {
        ++out[rest[static_cast<std::size_t>(k) % rest.size()].second];
    }
    return out;
}

Vector3d jitter_color(Sampler& s, const ObjectConfig& o) {
    Vector3d c = o.color;
    for (int k = 0; k < 3; ++k) {
        c[k] = std::clamp(c[k] + s.uniform(-o.color_jitter, o.color_jitter), 0.0, 1.0);
    }
    return c;
}

Gaussian tangent_gaussian(Sampler& s, const ObjectConfig& o, const Vector3d& position, const Vector3d& t1,
                          const Vector3d& t2, const Vector3d& normal, const Vector2d& sigma) {
    Eigen::Matrix3d r;
    r.col(0) = t1;
    r.col(1) = t2;
    r.col(2) = normal;
    const Eigen::Quaterniond q(r);
    const Vector3d scale(std::max(sigma.x(), kMinSigma), std::max(sigma.y(), kMinSigma), o.thickness);
    const double opacity = s.uniform(o.opacity_min, o.opacity_max);
    return make_gaussian(position, scale, q, opacity, jitter_color(s, o));
}

// Largest factor f <= 1 such that the f-scaled 3-sigma box around (a, b) stays in
// the region and out of every cutout.
double fit_factor(const Face& face, const Rect& region, double a, double b, double ext_u, double ext_v) {
    double f = 1.0;
    f = std::min(f, (a - region.u0) / ext_u);
    f = std::min(f, (region.u1 - a) / ext_u);
    f = std::min(f, (b - region.v0) / ext_v);
    f = std::min(f, (region.v1 - b) / ext_v);
    for (const auto& cut : face.cutouts) {
        f = std::min(f, cut.fit(a, b, ext_u, ext_v));
    }
    return std::max(f, 0.0);
}

void sample_face(Sampler& s, const ObjectConfig& o, const Face& face, const Rect& region, int count, int label,
                 GaussianCloud& cloud, std::vector<int>& labels) {
    if (count <= 0) {
        return;
    }
    double free_area = region.area();
    for (const auto& cut : face.cutouts) {
        free_area -= cut.overlap_area(region);
    }
    const double spacing = std::sqrt(std::max(free_area, 1e-12) / count);
    for (int k = 0; k < count; ++k) {
        double a = 0.0, b = 0.0;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            a = s.uniform(region.u0, region.u1);
            b = s.uniform(region.v0, region.v1);
            const bool blocked = std::any_of(face.cutouts.begin(), face.cutouts.end(),
                                             [&](const Cutout& cut) { return cut.contains(a, b); });
            if (!blocked) {
                break;
            }
        }
        const double ratio = s.uniform(1.0, std::max(o.aspect, 1.0));
        const double theta = s.uniform(0.0, std::numbers::pi);
        const double s1 = o.coverage * spacing * std::sqrt(ratio);
        const double s2 = o.coverage * spacing / std::sqrt(ratio);
        const double c = std::cos(theta), sn = std::sin(theta);
        const double ext_u = 3.0 * std::sqrt(s1 * s1 * c * c + s2 * s2 * sn * sn);
        const double ext_v = 3.0 * std::sqrt(s1 * s1 * sn * sn + s2 * s2 * c * c);
        const double f = fit_factor(face, region, a, b, ext_u, ext_v);
        const Vector3d t1 = c * face.u + sn * face.v;
        const Vector3d t2 = -sn * face.u + c * face.v;
        const Vector3d position = face.center + a * face.u + b * face.v;
        cloud.append(tangent_gaussian(s, o, position, t1, t2, face.normal, Vector2d(f * s1, f * s2)));
        labels.push_back(label);
    }
}

// Vertically elongated Gaussians on a side face whose lower 3-sigma end reaches
// below the base of the box.
void sample_band(Sampler& s, const ObjectConfig& o, const Face& face, int count, int label, GaussianCloud& cloud,
                 std::vector<int>& labels) {
    if (count <= 0) {
        return;
    }
    const Rect& r = face.region;
    const double band = std::min(o.contact_band, r.v1 - r.v0);
    const double spacing = std::sqrt((r.u1 - r.u0) * band / count);
    for (int k = 0; k < count; ++k) {
        const double a = s.uniform(r.u0, r.u1);
        const double height = s.uniform(0.1 * band, band);
        const double sigma_u = o.coverage * spacing;
        const double room = std::min(a - r.u0, r.u1 - a);
        const double sigma_h = std::min(sigma_u, room / 3.0);
        const Vector3d position = face.center + a * face.u + (r.v0 + height) * face.v;
        // Columns (v, -u, n) keep the frame right-handed.
        cloud.append(tangent_gaussian(s, o, position, face.v, -face.u, face.normal,
                                      Vector2d(o.contact_sigma, sigma_h)));
        labels.push_back(label);
    }
}

void sample_box(Sampler& s, const SceneConfig& config, const ObjectConfig& o, GaussianCloud& cloud,
                std::vector<int>& labels) {
    std::vector<Face> faces = box_faces(o);
    for (auto& f : faces) {
        if (f.name != "+z") {
            continue;
        }
        for (const int cut_label : o.cutouts) {
            const auto it = std::find_if(config.objects.begin(), config.objects.end(),
                                         [&](const ObjectConfig& other) { return other.label == cut_label; });
            if (it == config.objects.end()) {
                throw ParameterError("scene config: cutout label " + std::to_string(cut_label) + " is not an object");
            }
            Cutout cut;
            if (it->shape == Shape::sphere) {
                cut.disk = true;
                cut.center = (it->center - o.center).head<2>();
                cut.radius = it->size.x();
            } else {
                const Vector3d lo = it->center - 0.5 * it->size - o.center;
                const Vector3d hi = it->center + 0.5 * it->size - o.center;
                cut.rect = {lo.x(), hi.x(), lo.y(), hi.y()};
            }
            f.cutouts.push_back(cut);
        }
    }

    const bool banded = o.contact_band > 0.0 && o.contact_fraction > 0.0;
    std::vector<double> band_weights;
    for (const auto& f : faces) {
        band_weights.push_back(banded && f.side ? f.region.u1 - f.region.u0 : 0.0);
    }
    const bool any_band = std::any_of(band_weights.begin(), band_weights.end(), [](double w) { return w > 0.0; });
    const int band_total = any_band ? static_cast<int>(std::lround(o.contact_fraction * o.count)) : 0;
    const auto band_counts = apportion(band_total, band_weights);

    std::vector<Rect> regions;
    std::vector<double> area_weights;
    for (const auto& f : faces) {
        Rect r = f.region;
        if (banded && f.side) {
            r.v0 = std::min(r.v1, r.v0 + o.contact_band);
        }
        regions.push_back(r);
        double area = r.area();
        for (const auto& cut : f.cutouts) {
            area -= cut.overlap_area(r);
        }
        area_weights.push_back(std::max(area, 0.0));
    }
    const auto counts = apportion(o.count - band_total, area_weights);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        sample_face(s, o, faces[i], regions[i], counts[i], o.label, cloud, labels);
        sample_band(s, o, faces[i], band_counts[i], o.label, cloud, labels);
    }
}

void sample_sphere(Sampler& s, const ObjectConfig& o, GaussianCloud& cloud, std::vector<int>& labels) {
    const double radius = o.size.x();
    const double spacing = std::sqrt(4.0 * std::numbers::pi * radius * radius / o.count);
    for (int k = 0; k < o.count; ++k) {
        const Vector3d n = s.unit_vector();
        Vector3d u = n.cross(Vector3d::UnitZ());
        if (u.norm() < 1e-6) {
            u = n.cross(Vector3d::UnitX());
        }
        u.normalize();
        const Vector3d v = n.cross(u);
        const double ratio = s.uniform(1.0, std::max(o.aspect, 1.0));
        const double theta = s.uniform(0.0, std::numbers::pi);
        const double s1 = o.coverage * spacing * std::sqrt(ratio);
        const double s2 = o.coverage * spacing / std::sqrt(ratio);
        const double c = std::cos(theta), sn = std::sin(theta);
        const Vector3d t1 = c * u + sn * v;
        const Vector3d t2 = -sn * u + c * v;
        cloud.append(tangent_gaussian(s, o, o.center + radius * n, t1, t2, n, Vector2d(s1, s2)));
        labels.push_back(o.label);
    }
}

} // namespace

std::vector<std::size_t> SynthScene::members(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < gt_labels.size(); ++i) {
        if (gt_labels[i] == label) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<LabelImage> render_gt_masks(const GaussianCloud& cloud, const std::vector<int>& labels,
                                        const std::vector<Camera>& cameras) {
    std::vector<LabelImage> masks;
    masks.reserve(cameras.size());
    for (const auto& cam : cameras) {
        masks.push_back(render_id_map(cloud, labels, cam));
    }
    return masks;
}

SynthScene gen_scene(const SceneConfig& config, std::uint64_t seed) {
    config.validate();
    SynthScene scene;
    scene.config = config;
    scene.seed = seed;
    Sampler sampler(seed);

    GaussianCloud cloud;
    for (const auto& o : config.objects) {
        if (o.shape == Shape::box) {
            sample_box(sampler, config, o, cloud, scene.gt_labels);
        } else {
            sample_sphere(sampler, o, cloud, scene.gt_labels);
        }
    }
    cloud.set_source("synthetic:" + config.name + ":" + std::to_string(seed));
    scene.cloud = std::move(cloud);

    const RingConfig& ring = config.ring;
    for (int k = 0; k < ring.count; ++k) {
        const double az = 2.0 * std::numbers::pi * k / ring.count + ring.azimuth_offset_deg * std::numbers::pi / 180.0;
        double el = ring.elevation_deg;
        if (ring.elevation_jitter_deg > 0.0) {
            el += sampler.uniform(-ring.elevation_jitter_deg, ring.elevation_jitter_deg);
        }
        el *= std::numbers::pi / 180.0;
        const Vector3d eye =
            ring.target + ring.radius * Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        scene.cameras.push_back(
            Camera::look_at(k, ring.width, ring.height, ring.focal, eye, ring.target, Vector3d::UnitZ()));
    }
    scene.gt_masks = render_gt_masks(scene.cloud, scene.gt_labels, scene.cameras);

    for (const auto& o : config.objects) {
        const bool seen = std::any_of(scene.gt_masks.begin(), scene.gt_masks.end(), [&](const LabelImage& m) {
            return std::find(m.pixels().begin(), m.pixels().end(), o.label) != m.pixels().end();
        });
        if (!seen) {
            throw DataError("synthetic scene '" + config.name + "': object " + std::to_string(o.label) +
                            " is not visible in any view");
        }
    }
    return scene;
}

PromptInput auto_prompt(const SynthScene& scene, std::size_t view, int clicks) {
    if (view >= scene.cameras.size()) {
        throw ParameterError("auto_prompt: view " + std::to_string(view) + " out of range");
    }
    if (clicks < 1) {
        throw ParameterError("auto_prompt: at least one click is required");
    }
    const Camera& cam = scene.cameras[view];
    const int target = scene.config.target_label;
    const LabelImage target_mask = select_label(scene.gt_masks[view], static_cast<std::uint16_t>(target));

    Image<std::uint8_t> outside(cam.width, cam.height, 0);
    for (std::size_t i = 0; i < outside.size(); ++i) {
        outside.pixels()[i] = target_mask.pixels()[i] == 0 ? 1 : 0;
    }
    const Image<int> depth_in = chebyshev_distance(outside);

    struct Candidate {
        Vector2d pixel;
        int depth_in;
    };
    std::vector<Candidate> candidates;
    const RenderOutput rendered = render(scene.cloud, cam);
    for (const std::size_t i : scene.members(target)) {
        const CenterProjection c = project_center(cam, scene.cloud[i].position);
        if (!c.in_front()) {
            continue;
        }
        const int px = pixel_index(c.pixel.x());
        const int py = pixel_index(c.pixel.y());
        if (!target_mask.contains(px, py) || target_mask(px, py) == 0) {
            continue;
        }
        const double surface = rendered.depth(px, py);
        if (surface > 0.0 && c.depth > surface * 1.02) {
            continue;
        }
        candidates.push_back({c.pixel, depth_in(px, py)});
    }
    if (candidates.empty()) {
        throw PipelineError("auto_prompt: target " + std::to_string(target) + " is not visible in view " +
                            std::to_string(cam.id));
    }
    // Stable order: deepest inside the mask first, then by member order.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.depth_in > b.depth_in; });
    const int floor_depth = std::max(1, candidates.front().depth_in / 3);

    PromptInput prompt;
    prompt.view0 = cam.id;
    prompt.points.push_back({candidates.front().pixel, Polarity::foreground});
    // Farthest-point selection among points well inside the mask.
    while (static_cast<int>(prompt.points.size()) < clicks) {
        double best_gap = 0.0;
        const Candidate* best = nullptr;
        for (const auto& c : candidates) {
            if (c.depth_in < floor_depth) {
                break;
            }
            double gap = std::numeric_limits<double>::infinity();
            for (const auto& p : prompt.points) {
                gap = std::min(gap, (p.pixel - c.pixel).norm());
            }
            if (gap > best_gap) {
                best_gap = gap;
                best = &c;
            }
        }
        if (best == nullptr || best_gap < 4.0) {
            break;
        }
        prompt.points.push_back({best->pixel, Polarity::foreground});
    }
    return prompt;
}

} // namespace splatseg
