#include "splatseg/common/errors.hpp"
#include "splatseg/render/rasterizer.hpp"
#include "splatseg/seg/decomposition.hpp"
#include "splatseg/seg/label_matrix.hpp"
#include "splatseg/seg/pipeline.hpp"
#include "splatseg/seg/result_io.hpp"
#include "splatseg/seg/voting.hpp"
#include "splatseg/synth/evaluation.hpp"
#include "splatseg/synth/scene_generator.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>
#include <set>

namespace splatseg {
namespace {

Camera image_camera(int size = 100, double focal = 100.0) {
    Camera cam;
    cam.width = size;
    cam.height = size;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = size / 2.0;
    cam.cy = size / 2.0;
    return cam;
}

/// Gaussian at pixel (u, v), depth 2, whose projected long axis runs along image
/// x with a 3-sigma half length of `half_px` pixels.
Gaussian horizontal_gaussian(const Camera& cam, double u, double v, double half_px = 6.0) {
    const double z = 2.0;
    const double sx = half_px / 3.0 * z / cam.fx;
    return make_gaussian({(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z}, {sx, 5e-4, 5e-4},
                         Eigen::Quaterniond::Identity(), 0.9);
}

/// Label 1 where pixel x <= limit.
LabelImage half_plane(int size, int limit, std::uint16_t label = 1) {
    LabelImage mask(size, size, 0);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x <= std::min(limit, size - 1); ++x) {
            mask(x, y) = label;
        }
    }
    return mask;
}

/// Two touching boxes with fewer Gaussians and views than the preset, for speed.
const SynthScene& small_two_boxes() {
    static const SynthScene scene = [] {
        SceneConfig config = load_preset("two_boxes_touching");
        config.ring.count = 12;
        for (auto& o : config.objects) {
            o.count = 800;
        }
        return gen_scene(config, 3);
    }();
    return scene;
}

TEST(LabelMatrix, RejectsDuplicateViewAndOutOfRangeLabel) {
    LabelMatrix m(2, 1);
    m.observe(0, 3, 1);
    EXPECT_THROW(m.observe(0, 3, 0), ParameterError);
    EXPECT_THROW(m.observe(1, 3, 2), ParameterError);
    EXPECT_TRUE(m.observed(0, 3));
    EXPECT_FALSE(m.observed(1, 3));
    EXPECT_THROW(m.set_num_objects(0), ParameterError);
}

TEST(LabelMatrix, ChildCopiesParentRowAndResizeNeverShrinks) {
    LabelMatrix m(1, 2);
    m.observe(0, 0, 2);
    m.observe(0, 1, 1);
    const std::size_t child = m.append_child(0);
    EXPECT_EQ(child, 1u);
    EXPECT_TRUE(std::ranges::equal(m.row(child), m.row(0)));
    m.resize(5);
    EXPECT_EQ(m.size(), 5u);
    EXPECT_EQ(m.observed_views(4), 0u);
    m.resize(2);
    EXPECT_EQ(m.size(), 5u);
}

TEST(AssignViewLabels, CenterInsideAndOutsideImage) {
    const Camera cam = image_camera();
    const GaussianCloud cloud({horizontal_gaussian(cam, 10, 10), horizontal_gaussian(cam, 150, 10)});
    LabelMatrix labels(cloud.size());
    assign_view_labels(cloud, cam, LabelImage(100, 100, 1), labels);
    ASSERT_EQ(labels.observed_views(0), 1u);
    EXPECT_EQ(labels.row(0)[0], (Observation{0, 1}));
    EXPECT_EQ(labels.observed_views(1), 0u);
}

TEST(AssignViewLabels, BehindCameraAndInactiveGetNothing) {
    const Camera cam = image_camera();
    GaussianCloud cloud({horizontal_gaussian(cam, 10, 10), horizontal_gaussian(cam, 20, 20)});
    cloud[0].position.z() = -2.0;
    LabelMatrix labels(cloud.size());
    const std::vector<std::uint8_t> active{1, 0};
    assign_view_labels(cloud, cam, LabelImage(100, 100, 1), labels, active);
    EXPECT_EQ(labels.observed_views(0), 0u);
    EXPECT_EQ(labels.observed_views(1), 0u);
    EXPECT_THROW(assign_view_labels(cloud, cam, LabelImage(10, 10, 1), labels), ParameterError);
}

TEST(AssignViewLabels, MatchesBruteForceOracle) {
    std::mt19937_64 rng(51);
    for (int scene = 0; scene < 20; ++scene) {
        const GaussianCloud cloud = testing::random_cloud(rng, 200, 2.0);
        const int labels_c = scene % 2 == 0 ? 1 : 3;
        std::vector<Camera> cams;
        LabelMatrix got(cloud.size(), labels_c);
        LabelMatrix want(cloud.size(), labels_c);
        for (int v = 0; v < 4; ++v) {
            const Camera cam = testing::random_camera(rng, v, 48, 40, 3.0, 40.0);
            const LabelImage mask = testing::random_mask(rng, 48, 40, labels_c);
            assign_view_labels(cloud, cam, mask, got, {}, v % 2 == 0 ? 1u : 3u);
            testing::assign_oracle(cloud, cam, mask, want);
        }
        EXPECT_EQ(got, want) << "scene " << scene;
    }
}

TEST(Boundary, HalfPlaneExampleTagsInsideEndpoint) {
    const Camera cam = image_camera();
    const GaussianCloud cloud({horizontal_gaussian(cam, 10, 10)});
    const auto found = find_boundary_gaussians(cloud, cam, half_plane(100, 12));
    ASSERT_EQ(found.size(), 1u);
    const auto& b = found[0];
    EXPECT_EQ(b.index, 0u);
    EXPECT_EQ(b.label, 1);
    EXPECT_EQ(b.inside, Endpoint::a);
    EXPECT_LT((b.projection.long_axis_endpoints.a - Eigen::Vector2d(4, 10)).norm(), 1e-3);
    EXPECT_LT((b.projection.long_axis_endpoints.b - Eigen::Vector2d(16, 10)).norm(), 1e-3);
}

TEST(Boundary, BothInsideAndBothOutsideAreNotBoundary) {
    const Camera cam = image_camera();
    const GaussianCloud cloud({horizontal_gaussian(cam, 10, 10)});
    EXPECT_TRUE(find_boundary_gaussians(cloud, cam, half_plane(100, 20)).empty());
    LabelImage strip(100, 100, 0);
    for (int y = 0; y < 100; ++y) {
        for (int x = 8; x <= 12; ++x) {
            strip(x, y) = 1;
        }
    }
    EXPECT_TRUE(find_boundary_gaussians(cloud, cam, strip).empty());
    const auto both = find_both_out_gaussians(cloud, cam, strip);
    ASSERT_EQ(both.size(), 1u);
    EXPECT_EQ(both[0].index, 0u);
    EXPECT_TRUE(find_both_out_gaussians(cloud, cam, half_plane(100, 12)).empty());
}

TEST(Boundary, EndpointOffImageCountsAsOutside) {
    const Camera cam = image_camera();
    const GaussianCloud cloud({horizontal_gaussian(cam, 2, 10)});
    const auto found = find_boundary_gaussians(cloud, cam, LabelImage(100, 100, 1));
    ASSERT_EQ(found.size(), 1u);
    EXPECT_EQ(found[0].inside, Endpoint::b);
}

TEST(Boundary, MultiLabelUsesCenterLabel) {
    const Camera cam = image_camera();
    const GaussianCloud cloud({horizontal_gaussian(cam, 10, 10)});
    LabelImage mask(100, 100, 1);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x <= 12; ++x) {
            mask(x, y) = 2;
        }
    }
    const auto found = find_boundary_gaussians(cloud, cam, mask);
    ASSERT_EQ(found.size(), 1u);
    EXPECT_EQ(found[0].label, 2);
}

TEST(Boundary, MatchesBruteForceEndpointTest) {
    std::mt19937_64 rng(52);
    for (int scene = 0; scene < 10; ++scene) {
        const GaussianCloud cloud = testing::random_cloud(rng, 300, 1.5, 0.01, 0.15);
        const Camera cam = testing::random_camera(rng, scene, 64, 64, 4.0, 60.0);
        LabelImage mask(64, 64, 0);
        std::uniform_int_distribution<int> cut(16, 48);
        const int cx = cut(rng), cy = cut(rng);
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                mask(x, y) = (x < cx) ? 1 : (y < cy ? 2 : 0);
            }
        }
        std::set<std::size_t> one_out, both_out;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Eigen::Vector3d pc = testing::homogeneous_camera_point(cam, cloud[i].position);
            if (!(pc.z() > kNearPlane)) {
                continue;
            }
            const Eigen::Vector2d c = testing::homogeneous_pixel(cam, cloud[i].position);
            const std::uint16_t label = label_at(mask, c.x(), c.y());
            if (label == 0) {
                continue;
            }
            const Eigen::Matrix2d cov = testing::ewa_covariance(cam, cloud[i], 0.0);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
            const Eigen::Vector2d half = 3.0 * std::sqrt(eig.eigenvalues()(1)) * eig.eigenvectors().col(1);
            const bool in_a = label_at(mask, (c + half).x(), (c + half).y()) == label;
            const bool in_b = label_at(mask, (c - half).x(), (c - half).y()) == label;
            if (in_a != in_b) {
                one_out.insert(i);
            } else if (!in_a) {
                both_out.insert(i);
            }
        }
        std::set<std::size_t> got_one, got_both;
        for (const auto& b : find_boundary_gaussians(cloud, cam, mask)) {
            got_one.insert(b.index);
        }
        for (const auto& b : find_both_out_gaussians(cloud, cam, mask)) {
            got_both.insert(b.index);
        }
        EXPECT_EQ(got_one, one_out) << "scene " << scene;
        EXPECT_EQ(got_both, both_out) << "scene " << scene;
    }
}

TEST(Lambda, HalfPlaneExample) {
    const double lambda = compute_lambda2d({4, 10}, {16, 10}, half_plane(40, 12));
    EXPECT_NEAR(lambda, 2.0 / 3.0, 0.5 / 12.0);
}

TEST(Lambda, SymmetricSplit) {
    LabelImage mask(20, 20, 0);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x <= 5; ++x) {
            mask(x, y) = 1;
        }
    }
    EXPECT_NEAR(compute_lambda2d({0, 0}, {10, 0}, mask), 0.5, 0.05);
}

TEST(Lambda, ObliqueHalfPlanesMatchExactIntersection) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    int tested = 0;
    while (tested < 1000) {
        const Eigen::Vector2d a(u(rng), u(rng));
        const Eigen::Vector2d b(u(rng), u(rng));
        const double phi = angle(rng);
        const Eigen::Vector2d n(std::cos(phi), std::sin(phi));
        const double c = n.dot(a) + 0.5 * n.dot(b - a) * (1.0 + 0.8 * (u(rng) / 20.0));
        const double denom = n.dot(b - a);
        if ((b - a).norm() < 4.0 || std::abs(denom) < 1e-6 || !(n.dot(a) <= c) || n.dot(b) <= c) {
            continue;
        }
        const double exact = (c - n.dot(a)) / denom;
        if (exact < kLambdaMin || exact > 1.0 - kLambdaMin) {
            continue;
        }
        const double lambda = compute_lambda2d(a, b, [&](const Eigen::Vector2d& q) { return n.dot(q) <= c; });
        EXPECT_LE(std::abs(lambda - exact), kBoundaryStep / (b - a).norm() + 1e-12);
        ++tested;
    }
}

TEST(Lambda, FirstExitWinsOnNonConvexMask) {
    // inside on [0, 3], outside on (3, 6), inside again on [6, 10]
    const auto inside = [](const Eigen::Vector2d& q) { return q.x() <= 3.0 || q.x() >= 6.0; };
    const double lambda = compute_lambda2d({0, 0}, {12, 0}, inside);
    EXPECT_NEAR(lambda, 3.25 / 12.0, 1e-12);
}

TEST(Lambda, ClampedAtBothEnds) {
    const auto always = [](const Eigen::Vector2d&) { return true; };
    EXPECT_EQ(compute_lambda2d({0, 0}, {10, 0}, always), 1.0 - kLambdaMin);
    const auto first_only = [](const Eigen::Vector2d& q) { return q.x() < 0.1; };
    EXPECT_EQ(compute_lambda2d({0, 0}, {100, 0}, first_only), kLambdaMin);
}

TEST(Decompose, WorkedExample) {
    Gaussian g = make_gaussian({0, 0, 0}, {2.0, 0.3, 0.2}, Eigen::Quaterniond::Identity(), 0.8, {0.1, 0.2, 0.3});
    g.lineage.generation = 1;
    const auto pair = decompose(g, 0, 2.0 / 3.0, {-1, 0, 0});
    ASSERT_TRUE(pair.has_value());
    EXPECT_NEAR(6.0 * pair->kept.scale.x(), 8.0, 1e-12);
    EXPECT_LT((pair->kept.position - Eigen::Vector3d(-2, 0, 0)).norm(), 1e-12);
    EXPECT_NEAR(6.0 * pair->discarded.scale.x(), 4.0, 1e-12);
    EXPECT_LT((pair->discarded.position - Eigen::Vector3d(4, 0, 0)).norm(), 1e-12);
    for (const Gaussian* child : {&pair->kept, &pair->discarded}) {
        EXPECT_EQ(child->scale.y(), g.scale.y());
        EXPECT_EQ(child->scale.z(), g.scale.z());
        EXPECT_EQ(child->rotation.coeffs(), g.rotation.coeffs());
        EXPECT_EQ(child->opacity, g.opacity);
        EXPECT_EQ(child->sh, g.sh);
        EXPECT_EQ(child->lineage.generation, 2);
        EXPECT_FALSE(child->lineage.parent.has_value());
    }
}

TEST(Decompose, NearOneKeepsAlmostEverything) {
    const Gaussian g = make_gaussian({1, 2, 3}, {0.5, 0.1, 0.1}, Eigen::Quaterniond::Identity(), 0.8);
    const auto pair = decompose(g, 0, 1.0 - kLambdaMin, {1, 0, 0});
    ASSERT_TRUE(pair.has_value());
    EXPECT_NEAR(pair->kept.scale.x(), 0.98 * 0.5, 1e-12);
    EXPECT_NEAR(pair->discarded.scale.x(), 0.02 * 0.5, 1e-12);
    // The sliver sits at the out-endpoint (1 - 3 * 0.5 along x).
    EXPECT_NEAR(pair->discarded.position.x() - 3.0 * pair->discarded.scale.x(), 1.0 - 1.5, 1e-12);
}

TEST(Decompose, RejectsOutOfRangeLambdaAndBadDirection) {
    const Gaussian g = make_gaussian({0, 0, 0}, {0.5, 0.1, 0.1}, Eigen::Quaterniond::Identity(), 0.8);
    EXPECT_FALSE(decompose(g, 0, 0.01, {1, 0, 0}).has_value());
    EXPECT_FALSE(decompose(g, 0, 0.99, {1, 0, 0}).has_value());
    EXPECT_THROW(decompose(g, 0, 0.5, {0, 1, 0}), ParameterError);
    EXPECT_THROW(decompose(g, 0, 0.5, {2, 0, 0}), ParameterError);
    EXPECT_THROW(decompose(g, 3, 0.5, {1, 0, 0}), ParameterError);
}

TEST(Decompose, RandomGeometryIsExact) {
    std::mt19937_64 rng(54);
    std::uniform_real_distribution<double> lam(kLambdaMin, 1.0 - kLambdaMin);
    std::uniform_int_distribution<int> axis_pick(0, 2);
    std::bernoulli_distribution sign(0.5);
    for (int n = 0; n < 1000; ++n) {
        const Gaussian g = testing::random_gaussian(rng);
        const int axis = axis_pick(rng);
        const double lambda = lam(rng);
        const Eigen::Vector3d e = (sign(rng) ? 1.0 : -1.0) * g.axis_direction(axis);
        const auto pair = decompose(g, axis, lambda, e);
        ASSERT_TRUE(pair.has_value());
        const double full = 6.0 * g.scale[axis];
        EXPECT_NEAR(6.0 * pair->kept.scale[axis], lambda * full, 1e-9);
        const Eigen::Vector3d in_end = g.position + 0.5 * full * e;
        const Eigen::Vector3d cut = in_end - lambda * full * e;
        EXPECT_LT((pair->kept.position - 0.5 * (in_end + cut)).norm(), 1e-9);
        EXPECT_LT((pair->kept.position + 3.0 * pair->kept.scale[axis] * e - in_end).norm(), 1e-9);
        EXPECT_NEAR(6.0 * pair->discarded.scale[axis], (1.0 - lambda) * full, 1e-9);
    }
}

TEST(Decompose, ChildrenRenderCloseToParent) {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> lam(0.1, 0.9);
    Camera cam = image_camera(64, 60.0);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        Gaussian g = testing::random_gaussian(rng, 0.3, 0.05, 0.3);
        g.position.z() += 3.0;
        int axis = 0;
        g.scale.maxCoeff(&axis);
        const auto pair = decompose(g, axis, lam(rng), g.axis_direction(axis));
        ASSERT_TRUE(pair.has_value());
        const RenderOutput parent = render(GaussianCloud({g}), cam);
        const RenderOutput children = render(GaussianCloud({pair->kept, pair->discarded}), cam);
        double peak = 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < parent.alpha.size(); ++i) {
            peak = std::max(peak, static_cast<double>(parent.alpha.pixels()[i]));
            sum += std::abs(parent.alpha.pixels()[i] - children.alpha.pixels()[i]);
        }
        const double mean = sum / static_cast<double>(parent.alpha.size());
        worst = std::max(worst, mean / peak);
    }
    EXPECT_LT(worst, 0.15);
}

TEST(ViewPass, OffOnlyGrowsLabels) {
    const Camera cam = image_camera();
    SegmentationState state(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    SegmentParams params;
    params.gd = GdMode::off;
    const auto stats = run_view_pass(state, cam, half_plane(100, 12), params);
    EXPECT_EQ(state.cloud.size(), 1u);
    EXPECT_EQ(stats.splits, 0u);
    EXPECT_EQ(state.labels.observed_views(0), 1u);
    EXPECT_EQ(state.views, std::vector<int>{0});
}

TEST(ViewPass, SingleBoundaryGaussianSplits) {
    const Camera cam = image_camera();
    SegmentationState state(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    const auto stats = run_view_pass(state, cam, half_plane(100, 12), SegmentParams{});
    EXPECT_EQ(stats.boundary, 1u);
    EXPECT_EQ(stats.splits, 1u);
    ASSERT_EQ(state.cloud.size(), 3u);
    EXPECT_EQ(state.active, (std::vector<std::uint8_t>{0, 1, 1}));
    EXPECT_EQ(state.pinned, (std::vector<std::uint8_t>{0, 0, 1}));
    ASSERT_EQ(state.decompositions.size(), 1u);
    const auto& rec = state.decompositions[0];
    EXPECT_EQ(rec.parent, 0u);
    EXPECT_EQ(rec.kept, 1u);
    EXPECT_EQ(rec.discarded, 2u);
    EXPECT_EQ(rec.generation, 1);
    EXPECT_NEAR(rec.lambda, 2.0 / 3.0, 0.5 / 12.0);
    EXPECT_EQ(state.cloud[1].lineage.parent, std::optional<std::size_t>{0});
    EXPECT_EQ(state.labels.observed_views(0), 0u);
    EXPECT_EQ(state.labels.row(1)[0].label, 1);
    EXPECT_EQ(state.labels.row(2)[0].label, 0);
}

TEST(ViewPass, DiscardCutDeactivatesOutsideChild) {
    const Camera cam = image_camera();
    SegmentationState state(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    SegmentParams params;
    params.discard_cut = true;
    run_view_pass(state, cam, half_plane(100, 12), params);
    EXPECT_EQ(state.active, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(ViewPass, DeleteDeactivatesBoundaryGaussian) {
    const Camera cam = image_camera();
    SegmentationState state(GaussianCloud({horizontal_gaussian(cam, 10, 10), horizontal_gaussian(cam, 10, 40, 1.0)}));
    SegmentParams params;
    params.gd = GdMode::remove;
    const auto stats = run_view_pass(state, cam, half_plane(100, 12), params);
    EXPECT_EQ(stats.deleted, 1u);
    EXPECT_EQ(state.cloud.size(), 2u);
    EXPECT_EQ(state.active, (std::vector<std::uint8_t>{0, 1}));
}

TEST(ViewPass, GenerationCapAndShortAxisSkipSplits) {
    const Camera cam = image_camera();
    SegmentParams params;
    params.generation_cap = 0;
    SegmentationState capped(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    EXPECT_EQ(run_view_pass(capped, cam, half_plane(100, 12), params).skipped, 1u);
    EXPECT_EQ(capped.cloud.size(), 1u);

    params = SegmentParams{};
    params.min_axis_px = 20.0;
    SegmentationState short_axis(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    EXPECT_EQ(run_view_pass(short_axis, cam, half_plane(100, 12), params).skipped, 1u);
}

TEST(ViewPass, BothOutSplitsOncePerSide) {
    const Camera cam = image_camera();
    LabelImage strip(100, 100, 0);
    for (int y = 0; y < 100; ++y) {
        for (int x = 8; x <= 12; ++x) {
            strip(x, y) = 1;
        }
    }
    SegmentationState state(GaussianCloud({horizontal_gaussian(cam, 10, 10)}));
    const auto stats = run_view_pass(state, cam, strip, SegmentParams{});
    EXPECT_EQ(stats.both_out, 1u);
    EXPECT_EQ(stats.splits, 2u);
    ASSERT_EQ(state.decompositions.size(), 2u);
    const std::size_t kept = state.decompositions[1].kept;
    EXPECT_EQ(state.cloud[kept].lineage.generation, 2);
    EXPECT_EQ(state.active_count(), 3u);
    const double kept_px = 6.0 * state.cloud[kept].scale.x() * cam.fx / 2.0;
    EXPECT_NEAR(kept_px, 5.0, 1.0);
}

struct ModeRun {
    SegmentRun run;
    std::size_t records = 0;
    std::size_t deleted = 0;
};

ModeRun run_mode(const SynthScene& scene, GdMode gd) {
    SegmentParams params;
    params.gd = gd;
    const auto provider = make_oracle_provider(scene, true);
    ModeRun out{segment(scene.cloud, scene.cameras, *provider, std::nullopt, params), 0, 0};
    for (const auto& p : out.run.passes) {
        out.records += p.splits;
        out.deleted += p.deleted;
    }
    return out;
}

TEST(Segment, CountingOracleAcrossModes) {
    const SynthScene& scene = small_two_boxes();
    const ModeRun on = run_mode(scene, GdMode::on);
    const ModeRun off = run_mode(scene, GdMode::off);
    const ModeRun del = run_mode(scene, GdMode::remove);
    EXPECT_GT(on.records, 0u);
    EXPECT_GT(del.deleted, 0u);
    EXPECT_EQ(off.run.state.active_count(), scene.cloud.size());
    EXPECT_EQ(on.run.state.active_count(), off.run.state.active_count() + on.records);
    EXPECT_EQ(on.records, on.run.state.decompositions.size());
    EXPECT_EQ(del.run.state.active_count(), off.run.state.active_count() - del.deleted);
}

TEST(Segment, ChildrenInheritParentObservations) {
    const ModeRun on = run_mode(small_two_boxes(), GdMode::on);
    const auto& state = on.run.state;
    ASSERT_FALSE(state.decompositions.empty());
    for (const auto& rec : state.decompositions) {
        const auto parent = state.labels.row(rec.parent);
        for (const std::size_t child : {rec.kept, rec.discarded}) {
            const auto row = state.labels.row(child);
            ASSERT_GE(row.size(), parent.size());
            EXPECT_TRUE(std::equal(parent.begin(), parent.end(), row.begin()));
            for (const auto& o : parent) {
                EXPECT_NE(o.view, rec.view);
            }
        }
        // The kept child keeps the parent's in-endpoint.
        const Gaussian& p = state.cloud[rec.parent];
        const Gaussian& k = state.cloud[rec.kept];
        int axis = 0;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(std::abs(rec.axis_dir.dot(p.axis_direction(a))) - 1.0) < 1e-9) {
                axis = a;
            }
        }
        const Eigen::Vector3d parent_end = p.position + 3.0 * p.scale[axis] * rec.axis_dir;
        const Eigen::Vector3d kept_end = k.position + 3.0 * k.scale[axis] * rec.axis_dir;
        EXPECT_LT((parent_end - kept_end).norm(), 1e-6);
        EXPECT_NEAR(k.scale[axis], rec.lambda * p.scale[axis], 1e-12);
    }
}

TEST(Segment, VoteIsConsistentWithThreshold) {
    const ModeRun on = run_mode(small_two_boxes(), GdMode::on);
    const auto& r = on.run.result;
    ASSERT_EQ(r.object_ids.size(), on.run.state.cloud.size());
    for (std::size_t i = 0; i < r.object_ids.size(); ++i) {
        EXPECT_EQ(r.object_ids[i] == 1, r.confidence[i] > r.params.tau) << i;
    }
}

TEST(Segment, DeterministicResults) {
    const SynthScene& scene = small_two_boxes();
    const ModeRun a = run_mode(scene, GdMode::on);
    const ModeRun b = run_mode(scene, GdMode::on);
    EXPECT_EQ(format_result(a.run.result), format_result(b.run.result));
    EXPECT_EQ(a.run.state.labels, b.run.state.labels);
}

TEST(Segment, AllZeroMasksGiveEmptyObject) {
    const SynthScene& scene = small_two_boxes();
    std::map<int, LabelImage> masks;
    for (const auto& cam : scene.cameras) {
        masks[cam.id] = LabelImage(cam.width, cam.height, 0);
    }
    OracleProvider provider(masks, std::nullopt);
    const SegmentRun run = segment(scene.cloud, scene.cameras, provider, std::nullopt, SegmentParams{});
    for (const int o : run.result.object_ids) {
        EXPECT_EQ(o, 0);
    }
}

TEST(Segment, SingleVisibleObjectRecoversGeneratorSet) {
    SceneConfig config;
    config.name = "single_box";
    ObjectConfig box;
    box.label = 1;
    box.size = {1.2, 1.0, 0.8};
    box.count = 1500;
    config.objects = {box};
    config.ring.count = 16;
    config.ring.radius = 5.0;
    const SynthScene scene = gen_scene(config, 5);
    SegmentParams params;
    params.gd = GdMode::off;
    const auto provider = make_oracle_provider(scene, true);
    const SegmentRun run = segment(scene.cloud, scene.cameras, *provider, std::nullopt, params);
    std::size_t both = 0, either = 0;
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
        const bool truth = scene.gt_labels[i] == 1;
        const bool got = run.result.object_ids[i] == 1;
        both += truth && got ? 1 : 0;
        either += truth || got ? 1 : 0;
    }
    EXPECT_GT(static_cast<double>(both) / static_cast<double>(either), 0.95);
}

TEST(Segment, MultiObjectModeVotesPerLabel) {
    const SynthScene& scene = small_two_boxes();
    SegmentParams params;
    params.multi = true;
    params.gd = GdMode::off;
    const auto provider = make_oracle_provider(scene, false);
    const SegmentRun run = segment(scene.cloud, scene.cameras, *provider, std::nullopt, params);
    EXPECT_EQ(run.result.num_objects, 2);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
        agree += run.result.object_ids[i] == scene.gt_labels[i] ? 1 : 0;
    }
    EXPECT_GT(static_cast<double>(agree) / static_cast<double>(scene.cloud.size()), 0.9);
}

TEST(Segment, FewerThanTwoUsableViewsAborts) {
    const SynthScene& scene = small_two_boxes();
    std::map<int, LabelImage> masks{{0, scene.gt_masks[0]}};
    OracleProvider provider(masks, std::uint16_t{1});
    EXPECT_THROW(segment(scene.cloud, scene.cameras, provider, std::nullopt, SegmentParams{}), PipelineError);
}

TEST(Segment, PromptedRunReportsProgressInOrder) {
    const SynthScene& scene = small_two_boxes();
    const auto provider = make_oracle_provider(scene, true);
    std::vector<SegmentPhase> phases;
    std::size_t last_done = 0;
    const auto progress = [&](SegmentPhase phase, std::size_t done, std::size_t) {
        if (phases.empty() || phases.back() != phase) {
            phases.push_back(phase);
        }
        if (phase == SegmentPhase::labeling) {
            EXPECT_GE(done, last_done);
            last_done = done;
        }
    };
    const SegmentRun run =
        segment(scene.cloud, scene.cameras, *provider, auto_prompt(scene), SegmentParams{}, progress);
    ASSERT_TRUE(run.prompts.has_value());
    EXPECT_FALSE(run.prompts->anchors.empty());
    EXPECT_TRUE(std::is_sorted(phases.begin(), phases.end()));
    EXPECT_EQ(phases.front(), SegmentPhase::lifting);
    EXPECT_EQ(phases.back(), SegmentPhase::voting);
}

TEST(SelectViews, EvenlySpacedIncludingFirst) {
    std::vector<Camera> cams(24);
    for (int i = 0; i < 24; ++i) {
        cams[static_cast<std::size_t>(i)].id = i;
    }
    EXPECT_EQ(select_views(cams, 100.0).size(), 24u);
    const auto half = select_views(cams, 50.0);
    ASSERT_EQ(half.size(), 12u);
    EXPECT_EQ(half[0].id, 0);
    EXPECT_EQ(half[1].id, 2);
    EXPECT_EQ(select_views(cams, 10.0).size(), 2u);
    EXPECT_EQ(select_views(cams, 1.0).size(), 2u);
    EXPECT_THROW(select_views(cams, 0.0), ParameterError);
    EXPECT_THROW(select_views(cams, 101.0), ParameterError);
}

TEST(VoteBinary, WorkedExamples) {
    LabelMatrix m(2, 1);
    const std::vector<std::uint16_t> a{1, 1, 1, 0};
    const std::vector<std::uint16_t> b{1, 0, 0, 0};
    for (int v = 0; v < 4; ++v) {
        m.observe(0, v, a[static_cast<std::size_t>(v)]);
        m.observe(1, v, b[static_cast<std::size_t>(v)]);
    }
    const Votes votes = vote_binary(m, 0.7);
    EXPECT_DOUBLE_EQ(votes.confidence[0], 0.75);
    EXPECT_EQ(votes.object_ids[0], 1);
    EXPECT_DOUBLE_EQ(votes.confidence[1], 0.25);
    EXPECT_EQ(votes.object_ids[1], 0);
}

TEST(VoteBinary, PreliminaryVoteBindsBelowHalf) {
    LabelMatrix m(2, 1);
    for (int v = 0; v < 4; ++v) {
        m.observe(0, v, v < 2 ? 1 : 0);
        m.observe(1, v, v < 3 ? 1 : 0);
    }
    const Votes votes = vote_binary(m, 0.3);
    EXPECT_EQ(votes.object_ids[0], 0);
    EXPECT_EQ(votes.object_ids[1], 1);
}

TEST(VoteBinary, UnobservedInactiveAndGlobalN) {
    LabelMatrix m(3, 1);
    m.observe(0, 0, 1);
    m.observe(1, 0, 1);
    const std::vector<std::uint8_t> active{1, 0, 1};
    const Votes votes = vote_binary(m, 0.7, active);
    EXPECT_EQ(votes.object_ids, (std::vector<int>{1, 0, 0}));
    EXPECT_EQ(votes.confidence[2], 0.0);
    const Votes global = vote_binary(m, 0.7, {}, {.global_views = 2});
    EXPECT_EQ(global.confidence[0], 0.5);
    EXPECT_EQ(global.object_ids[0], 0);
    EXPECT_THROW(vote_binary(m, 1.0), ParameterError);
    EXPECT_THROW(vote_binary(m, 0.0), ParameterError);
}

TEST(VoteBinary, MatchesBruteForceOracle) {
    std::mt19937_64 rng(56);
    std::uniform_real_distribution<double> tau(0.05, 0.95);
    for (int n = 0; n < 50; ++n) {
        const LabelMatrix m = testing::random_label_matrix(rng, 200, 12, 1, 0.7);
        const double t = tau(rng);
        EXPECT_EQ(vote_binary(m, t).object_ids, testing::vote_binary_oracle(m, t));
    }
}

TEST(VoteMultiobject, WorkedExamplesAndTies) {
    LabelMatrix m(3, 3);
    const std::vector<std::uint16_t> clear{2, 2, 3, 0, 2};
    for (int v = 0; v < 5; ++v) {
        m.observe(0, v, clear[static_cast<std::size_t>(v)]);
    }
    m.observe(1, 0, 1);
    m.observe(1, 1, 2);
    m.observe(2, 0, 0);
    m.observe(2, 1, 3);
    const Votes votes = vote_multiobject(m);
    EXPECT_EQ(votes.object_ids, (std::vector<int>{2, 1, 0}));
    EXPECT_DOUBLE_EQ(votes.confidence[0], 0.6);
    EXPECT_THROW(vote_multiobject(LabelMatrix(1, 1)), ParameterError);
}

TEST(VoteMultiobject, MatchesHistogramOracle) {
    std::mt19937_64 rng(57);
    for (int n = 0; n < 50; ++n) {
        const LabelMatrix m = testing::random_label_matrix(rng, 200, 7, 2 + n % 4, 0.7);
        EXPECT_EQ(vote_multiobject(m).object_ids, testing::vote_multiobject_oracle(m));
    }
}

TEST(ResultIo, JsonRoundTripIsExact) {
    const ModeRun on = run_mode(small_two_boxes(), GdMode::on);
    const std::string text = format_result(on.run.result);
    const SegmentationResult back = result_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(format_result(back), text);
    EXPECT_EQ(back.object_ids, on.run.result.object_ids);
    EXPECT_EQ(back.decompositions, on.run.result.decompositions);
    EXPECT_THROW(result_from_json(nlohmann::json::object()), SchemaError);
}

TEST(Params, ValidateAndParseGdMode) {
    EXPECT_EQ(parse_gd_mode("delete"), GdMode::remove);
    EXPECT_EQ(to_string(GdMode::remove), "delete");
    EXPECT_THROW(parse_gd_mode("maybe"), ParameterError);
    SegmentParams p;
    EXPECT_NO_THROW(p.validate());
    p.views_percent = 0.0;
    EXPECT_THROW(p.validate(), ParameterError);
    p = SegmentParams{};
    p.epsilon = -1.0;
    EXPECT_THROW(p.validate(), ParameterError);
}

} // namespace
} // namespace splatseg
