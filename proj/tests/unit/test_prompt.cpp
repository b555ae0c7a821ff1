#include "splatseg/common/base64.hpp"
#include "splatseg/common/errors.hpp"
#include "splatseg/common/png_io.hpp"
#include "splatseg/prompt/mask_provider.hpp"
#include "splatseg/prompt/prompt.hpp"
#include "splatseg/render/rasterizer.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <numbers>
#include <random>
#include <thread>

namespace splatseg {
namespace {

Camera square_camera(int size = 200, double focal = 100.0) {
    Camera cam;
    cam.width = size;
    cam.height = size;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = size / 2.0;
    cam.cy = size / 2.0;
    return cam;
}

/// Gaussian whose center projects to pixel (u, v) at depth z in `cam` (identity pose).
Gaussian at_pixel(const Camera& cam, double u, double v, double z) {
    return make_gaussian({(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z}, Eigen::Vector3d::Constant(0.01),
                         Eigen::Quaterniond::Identity(), 0.9);
}

std::vector<PromptPoint> click(double x, double y, Polarity polarity = Polarity::foreground) {
    return {PromptPoint{{x, y}, polarity}};
}

/// Anchor selection by exhaustive scan: smallest positive depth among centers
/// strictly within epsilon (L1), lowest index on equal depths.
std::optional<std::size_t> lift_oracle(const GaussianCloud& cloud, const Camera& cam, const Eigen::Vector2d& p,
                                       double epsilon) {
    std::optional<std::size_t> best;
    double best_depth = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d pc = testing::homogeneous_camera_point(cam, cloud[i].position);
        if (!(pc.z() > 0.0)) {
            continue;
        }
        const Eigen::Vector2d px = testing::homogeneous_pixel(cam, cloud[i].position);
        if (!((px - p).lpNorm<1>() < epsilon)) {
            continue;
        }
        if (!best || pc.z() < best_depth) {
            best = i;
            best_depth = pc.z();
        }
    }
    return best;
}

TEST(LiftPrompts, PicksNearestDepthAmongCandidates) {
    const Camera cam = square_camera();
    const GaussianCloud cloud({at_pixel(cam, 100, 100, 2.0), at_pixel(cam, 100.4, 100.3, 1.0),
                               at_pixel(cam, 150, 150, 0.5)});
    const PromptSet set = lift_prompts(cloud, cam, click(100, 100), 1.0);
    ASSERT_EQ(set.anchors.size(), 1u);
    EXPECT_EQ(set.anchors[0].gaussian, 1u);
    EXPECT_NEAR(set.anchors[0].depth, 1.0, 1e-12);
}

TEST(LiftPrompts, SingleGaussianAtClick) {
    const Camera cam = square_camera();
    const GaussianCloud cloud({at_pixel(cam, 20, 30, 3.0)});
    const PromptSet set = lift_prompts(cloud, cam, click(20, 30));
    ASSERT_EQ(set.anchors.size(), 1u);
    EXPECT_EQ(set.anchors[0].gaussian, 0u);
}

TEST(LiftPrompts, EverythingBehindCameraHasNoAnchor) {
    const Camera cam = square_camera();
    GaussianCloud cloud({at_pixel(cam, 100, 100, 2.0)});
    cloud[0].position.z() = -2.0;
    try {
        lift_prompts(cloud, cam, click(100, 100));
        FAIL() << "expected NoAnchorError";
    } catch (const NoAnchorError& e) {
        EXPECT_EQ(e.points(), std::vector<std::size_t>{0});
    }
}

TEST(LiftPrompts, RejectsOutOfImageAndBackgroundOnly) {
    const Camera cam = square_camera();
    const GaussianCloud cloud({at_pixel(cam, 100, 100, 2.0)});
    EXPECT_THROW(lift_prompts(cloud, cam, click(-1, 10)), ParameterError);
    EXPECT_THROW(lift_prompts(cloud, cam, click(10, 200)), ParameterError);
    EXPECT_THROW(lift_prompts(cloud, cam, click(100, 100, Polarity::background)), ParameterError);
    EXPECT_THROW(lift_prompts(cloud, cam, {}), ParameterError);
}

TEST(LiftPrompts, BackgroundClicksAreKeptButNotLifted) {
    const Camera cam = square_camera();
    const GaussianCloud cloud({at_pixel(cam, 100, 100, 2.0)});
    const std::vector<PromptPoint> points{{{5, 5}, Polarity::background}, {{100, 100}, Polarity::foreground}};
    const PromptSet set = lift_prompts(cloud, cam, points);
    EXPECT_EQ(set.points.size(), 2u);
    ASSERT_EQ(set.anchors.size(), 1u);
    EXPECT_EQ(set.anchors[0].point, 1u);
}

TEST(LiftPrompts, MatchesBruteForceScanAndReprojects) {
    std::mt19937_64 rng(41);
    for (int scene = 0; scene < 20; ++scene) {
        const GaussianCloud cloud = testing::random_cloud(rng, 400, 1.0);
        const Camera cam = testing::random_camera(rng, 0, 64, 64, 4.0, 60.0);
        std::uniform_real_distribution<double> px(0.0, 63.0);
        for (int k = 0; k < 10; ++k) {
            const Eigen::Vector2d p(px(rng), px(rng));
            const auto expected = lift_oracle(cloud, cam, p, 2.0);
            const std::vector<PromptPoint> points{{p, Polarity::foreground}};
            if (!expected) {
                EXPECT_THROW(lift_prompts(cloud, cam, points), NoAnchorError);
                continue;
            }
            const PromptSet set = lift_prompts(cloud, cam, points);
            EXPECT_EQ(set.anchors[0].gaussian, *expected);
            const Eigen::Vector2d back = project_center(cam, set.anchors[0].position).pixel;
            EXPECT_LT((back - p).lpNorm<1>(), set.epsilon);
            EXPECT_GT(set.anchors[0].depth, 0.0);
        }
    }
}

TEST(LiftPrompts, AnchorIsIndependentOfCloudOrder) {
    std::mt19937_64 rng(42);
    const GaussianCloud cloud = testing::random_cloud(rng, 300);
    const Camera cam = testing::random_camera(rng);
    const Eigen::Vector2d p = project_center(cam, cloud[17].position).pixel;
    const std::vector<PromptPoint> points{{p, Polarity::foreground}};
    const Eigen::Vector3d reference = lift_prompts(cloud, cam, points).anchors[0].position;
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
        std::shuffle(order.begin(), order.end(), rng);
        const GaussianCloud shuffled = cloud.subset(order);
        const PromptSet set = lift_prompts(shuffled, cam, points);
        EXPECT_EQ(set.anchors[0].position, reference);
        EXPECT_EQ(order[set.anchors[0].gaussian], lift_prompts(cloud, cam, points).anchors[0].gaussian);
    }
}

TEST(LiftPrompts, PrefersCandidatesVisibleInDepthMap) {
    const Camera cam = square_camera();
    const GaussianCloud cloud({at_pixel(cam, 100, 100, 1.0), at_pixel(cam, 101, 100, 2.0)});
    FloatImage depth(cam.width, cam.height, 2.0f);
    depth(100, 100) = 0.5f;
    EXPECT_EQ(lift_prompts(cloud, cam, click(100, 100), 3.0).anchors[0].gaussian, 0u);
    EXPECT_EQ(lift_prompts(cloud, cam, click(100, 100), 3.0, &depth).anchors[0].gaussian, 1u);
    // Nothing visible: the smallest-depth rule applies.
    depth(101, 100) = 0.5f;
    EXPECT_EQ(lift_prompts(cloud, cam, click(100, 100), 3.0, &depth).anchors[0].gaussian, 0u);
    const FloatImage wrong(10, 10, 1.0f);
    EXPECT_THROW(lift_prompts(cloud, cam, click(100, 100), 3.0, &wrong), ParameterError);
}

PromptSet single_anchor(const Eigen::Vector3d& position) {
    PromptSet set;
    set.points = {PromptPoint{{0, 0}, Polarity::foreground}};
    set.anchors = {Anchor{position, 0, 0, 1.0}};
    return set;
}

TEST(ProjectPrompts, OpticalAxisAnchorLandsOnPrincipalPoint) {
    const Camera cam = Camera::look_at(4, 64, 48, 50.0, {3, 2, 1}, {0.2, 0.1, 0.3}, Eigen::Vector3d::UnitZ());
    const std::vector<Camera> cams{cam};
    const auto views = project_prompts(single_anchor({0.2, 0.1, 0.3}), cams);
    ASSERT_EQ(views.size(), 1u);
    EXPECT_TRUE(views[0].usable);
    EXPECT_EQ(views[0].view_id, 4);
    ASSERT_EQ(views[0].points.size(), 1u);
    EXPECT_LT((views[0].points[0].pixel - Eigen::Vector2d(cam.cx, cam.cy)).norm(), 1e-9);
}

TEST(ProjectPrompts, AnchorBehindCameraIsDropped) {
    Camera cam = square_camera(64, 50.0);
    cam.id = 1;
    const std::vector<Camera> cams{cam};
    const auto views = project_prompts(single_anchor({0, 0, -1}), cams);
    EXPECT_FALSE(views[0].usable);
    EXPECT_TRUE(views[0].points.empty());
    EXPECT_FALSE(views[0].reason.empty());
}

TEST(ProjectPrompts, OcclusionToleranceIsFivePercent) {
    const Camera cam = square_camera(64, 50.0);
    const std::vector<Camera> cams{cam};
    const PromptSet set = single_anchor({0, 0, 2.0});
    std::vector<FloatImage> depth{FloatImage(64, 64, 2.0f / 1.04f)};
    EXPECT_TRUE(project_prompts(set, cams, depth)[0].usable);
    depth[0] = FloatImage(64, 64, 2.0f / 1.06f);
    EXPECT_FALSE(project_prompts(set, cams, depth)[0].usable);
    EXPECT_TRUE(project_prompts(set, cams, depth, {.occlusion_test = false})[0].usable);
}

TEST(ProjectPrompts, BackgroundClicksOnlyReachViewZero) {
    std::vector<Camera> cams;
    for (int i = 0; i < 3; ++i) {
        cams.push_back(Camera::look_at(i, 64, 64, 50.0, {3.0 * std::cos(i), 3.0 * std::sin(i), 0.5},
                                       Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ()));
    }
    PromptSet set = single_anchor(Eigen::Vector3d::Zero());
    set.view0 = 1;
    set.points = {PromptPoint{{10, 10}, Polarity::background}, PromptPoint{{32, 32}, Polarity::foreground}};
    set.anchors[0].point = 1;
    const auto views = project_prompts(set, cams);
    for (const auto& v : views) {
        const auto bg = std::count_if(v.points.begin(), v.points.end(),
                                      [](const PromptPoint& p) { return p.polarity == Polarity::background; });
        EXPECT_EQ(bg, v.view_id == 1 ? 1 : 0) << "view " << v.view_id;
        EXPECT_TRUE(v.usable);
    }
}

/// Dense opaque plate in the plane x = 1 spanning |y|, |z| <= 0.6, plus a small
/// target Gaussian at the origin (last index).
GaussianCloud occluder_scene() {
    std::vector<Gaussian> gs;
    for (double y = -0.6; y <= 0.6 + 1e-9; y += 0.04) {
        for (double z = -0.6; z <= 0.6 + 1e-9; z += 0.04) {
            gs.push_back(make_gaussian({1.0, y, z}, {0.005, 0.03, 0.03}, Eigen::Quaterniond::Identity(), 0.99));
        }
    }
    gs.push_back(make_gaussian({0, 0, 0}, Eigen::Vector3d::Constant(0.05), Eigen::Quaterniond::Identity(), 0.95));
    return GaussianCloud(std::move(gs));
}

TEST(ProjectPrompts, OccluderHidesAnchorInExactlyTheBlockedViews) {
    const GaussianCloud cloud = occluder_scene();
    const PromptSet set = single_anchor(Eigen::Vector3d::Zero());
    int checked_blocked = 0;
    int checked_clear = 0;
    for (int k = 0; k < 36; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / 36.0;
        const Eigen::Vector3d eye(4.0 * std::cos(theta), 4.0 * std::sin(theta), 0.0);
        const Camera cam = Camera::look_at(k, 64, 64, 60.0, eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
        // Ray from the eye to the origin crosses x = 1 at |y| = |tan(theta)| when the eye is beyond the plate.
        const bool crosses = eye.x() > 1.0;
        const double hit = std::abs(std::tan(theta));
        const bool blocked = crosses && hit < 0.45;
        const bool clear = !crosses || hit > 0.8;
        if (!blocked && !clear) {
            continue;
        }
        const std::vector<Camera> cams{cam};
        const std::vector<FloatImage> depth{render(cloud, cam).depth};
        const auto views = project_prompts(set, cams, depth);
        EXPECT_EQ(views[0].usable, clear) << "view " << k;
        (blocked ? checked_blocked : checked_clear) += 1;
    }
    EXPECT_GE(checked_blocked, 3);
    EXPECT_GE(checked_clear, 20);
}

TEST(FileProvider, LoadsMasksVerbatimAndChecksSize) {
    const auto dir = std::filesystem::temp_directory_path() / "splatseg_file_provider";
    std::filesystem::create_directories(dir);
    Image<std::uint8_t> mask(8, 6, 0);
    mask(2, 3) = 255;
    mask(5, 1) = 3;
    write_file(dir / "mask_0.png", encode_png(mask));
    write_file(dir / "mask_1.png", encode_png(mask));
    write_file(dir / "mask_2.png", encode_png(Image<std::uint8_t>(4, 4, 0)));

    std::vector<Camera> cams;
    for (int i = 0; i < 4; ++i) {
        Camera cam = square_camera(8);
        cam.height = 6;
        cam.cy = 3;
        cam.id = i;
        cams.push_back(cam);
    }
    FileProvider binary(dir);
    const MaskSet set = get_masks(binary, cams, {}, {});
    EXPECT_EQ(set.usable_count(), 2u);
    EXPECT_TRUE(set.unusable.count(2));
    EXPECT_TRUE(set.unusable.count(3));
    EXPECT_EQ(set.masks.at(0)(2, 3), 1);
    EXPECT_EQ(set.masks.at(0)(5, 1), 1);
    EXPECT_EQ(set.masks.at(0)(0, 0), 0);

    FileProvider labels(dir, false);
    const MaskSet multi = get_masks(labels, cams, {}, {});
    EXPECT_EQ(multi.masks.at(1)(2, 3), 255);
    EXPECT_EQ(multi.masks.at(1)(5, 1), 3);
    for (const auto& [id, m] : multi.masks) {
        EXPECT_EQ(m.width(), cams[static_cast<std::size_t>(id)].width);
    }
    std::filesystem::remove_all(dir);
}

TEST(GetMasks, FewerThanTwoUsableViewsAborts) {
    const std::vector<Camera> cams{square_camera(8)};
    OracleProvider oracle({{0, LabelImage(8, 8, 1)}}, std::nullopt);
    EXPECT_THROW(get_masks(oracle, cams, {}, {}), PipelineError);
}

TEST(GetMasks, UnusablePromptViewsAreNotRequested) {
    std::vector<Camera> cams;
    std::map<int, LabelImage> masks;
    for (int i = 0; i < 3; ++i) {
        Camera cam = square_camera(8);
        cam.id = i;
        cams.push_back(cam);
        masks[i] = LabelImage(8, 8, static_cast<std::uint16_t>(i));
    }
    std::vector<ViewPrompts> prompts(3);
    for (int i = 0; i < 3; ++i) {
        prompts[static_cast<std::size_t>(i)].view_id = i;
        prompts[static_cast<std::size_t>(i)].usable = i != 1;
    }
    OracleProvider oracle(masks, std::nullopt);
    const MaskSet set = get_masks(oracle, cams, {}, prompts);
    EXPECT_FALSE(set.usable(1));
    EXPECT_TRUE(set.unusable.count(1));
    EXPECT_EQ(set.masks.at(2), masks[2]);
}

TEST(OracleProvider, ReducesToBinaryTarget) {
    LabelImage gt(4, 4, 0);
    gt(1, 1) = 2;
    gt(2, 2) = 1;
    Camera cam = square_camera(4);
    OracleProvider binary({{0, gt}}, std::uint16_t{2});
    const LabelImage m = binary.request(MaskRequest{cam, nullptr, {}});
    EXPECT_EQ(m(1, 1), 1);
    EXPECT_EQ(m(2, 2), 0);
    OracleProvider verbatim({{0, gt}}, std::nullopt);
    EXPECT_EQ(verbatim.request(MaskRequest{cam, nullptr, {}}), gt);
    cam.id = 5;
    EXPECT_THROW(verbatim.request(MaskRequest{cam, nullptr, {}}), ProviderError);
}

/// Mask server stand-in answering every POST /mask with an 8 px checkerboard.
class MockMaskServer {
public:
    MockMaskServer() {
        server_.Post("/mask", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            const int w = body.at("width");
            const int h = body.at("height");
            last_points_ = static_cast<int>(body.at("points").size());
            last_image_bytes_ = static_cast<int>(body.at("image").get<std::string>().size());
            ++requests_;
            Image<std::uint8_t> board(w, h, 0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    board(x, y) = ((x / 8 + y / 8) % 2) != 0 ? 255 : 0;
                }
            }
            const nlohmann::json reply{{"mask", base64_encode(encode_png(board))}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockMaskServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int requests() const { return requests_; }
    int last_points() const { return last_points_; }
    int last_image_bytes() const { return last_image_bytes_; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
    std::atomic<int> last_points_{0};
    std::atomic<int> last_image_bytes_{0};
};

TEST(HttpProvider, ReturnsCheckerboardFromMockServer) {
    MockMaskServer server;
    HttpProvider provider(server.url());
    EXPECT_TRUE(provider.reachable());
    EXPECT_EQ(provider.provenance(), server.url());
    std::vector<Camera> cams;
    std::vector<RgbImage> images;
    std::vector<ViewPrompts> prompts;
    for (int i = 0; i < 3; ++i) {
        Camera cam = square_camera(32, 30.0);
        cam.id = i;
        cams.push_back(cam);
        images.emplace_back(32, 32, Rgb{0.2f, 0.4f, 0.6f});
        ViewPrompts vp;
        vp.view_id = i;
        vp.usable = true;
        vp.points = {PromptPoint{{16, 16}, Polarity::foreground}, PromptPoint{{1, 1}, Polarity::background}};
        prompts.push_back(vp);
    }
    const MaskSet set = get_masks(provider, cams, images, prompts);
    EXPECT_EQ(set.provider, server.url());
    ASSERT_EQ(set.usable_count(), 3u);
    EXPECT_EQ(server.requests(), 3);
    EXPECT_EQ(server.last_points(), 2);
    EXPECT_GT(server.last_image_bytes(), 0);
    for (const auto& [id, mask] : set.masks) {
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                EXPECT_EQ(mask(x, y), ((x / 8 + y / 8) % 2) != 0 ? 1 : 0);
            }
        }
    }
}

TEST(HttpProvider, UnreachableServerFailsWithReason) {
    HttpProviderOptions options;
    options.timeout = std::chrono::seconds(2);
    options.retries = 0;
    HttpProvider provider("http://127.0.0.1:1", options);
    std::string reason;
    EXPECT_FALSE(provider.reachable(&reason));
    EXPECT_FALSE(reason.empty());
    const Camera cam = square_camera(8);
    EXPECT_THROW(provider.request(MaskRequest{cam, nullptr, {}}), ProviderError);
}

} // namespace
} // namespace splatseg
