#include "splatseg/model/ply_io.hpp"
#include "splatseg/seg/result_io.hpp"
#include "splatseg/service/service.hpp"
#include "splatseg/synth/evaluation.hpp"
#include "splatseg/synth/metrics.hpp"
#include "splatseg/synth/scene_generator.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <future>
#include <sstream>
#include <thread>

namespace splatseg {
namespace {

using nlohmann::json;
using namespace std::chrono_literals;

const SynthScene& scene() {
    static const SynthScene s = [] {
        SceneConfig config = load_preset("two_boxes_touching");
        for (auto& o : config.objects) {
            o.count = 600;
        }
        config.ring.width = 96;
        config.ring.height = 96;
        config.ring.focal = 140.0;
        return gen_scene(config, 4);
    }();
    return s;
}

/// Oracle masks that are only released once `open()` is called.
class GatedProvider final : public MaskProvider {
public:
    explicit GatedProvider(std::shared_ptr<MaskProvider> inner) : inner_(std::move(inner)), gate_(opened_.get_future()) {}

    LabelImage request(const MaskRequest& req) override {
        gate_.wait();
        return inner_->request(req);
    }
    std::string provenance() const override { return "gated " + inner_->provenance(); }
    unsigned max_in_flight() const override { return 0; }
    void open() { opened_.set_value(); }

private:
    std::shared_ptr<MaskProvider> inner_;
    std::promise<void> opened_;
    std::shared_future<void> gate_;
};

std::unique_ptr<SegmentationService> make_service(unsigned workers = 2) {
    ServiceOptions options;
    options.workers = workers;
    auto service = std::make_unique<SegmentationService>(scene().cloud, scene().cameras, options);
    service->add_provider("oracle", make_oracle_provider(scene(), true));
    return service;
}

SegmentRequest click_request(GdMode gd = GdMode::on) {
    const PromptInput prompt = auto_prompt(scene());
    SegmentRequest req;
    req.view0 = prompt.view0;
    req.points = prompt.points;
    req.params.gd = gd;
    req.provider = "oracle";
    return req;
}

json points_json() {
    json pts = json::array();
    for (const auto& p : auto_prompt(scene()).points) {
        pts.push_back({{"x", p.pixel.x()}, {"y", p.pixel.y()}});
    }
    return pts;
}

class HttpApi : public ::testing::Test {
protected:
    void SetUp() override {
        service_ = make_service();
        server_ = std::make_unique<HttpServer>(*service_);
        port_ = server_->bind("127.0.0.1", 0);
        thread_ = std::thread([this] { server_->listen(); });
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(60, 0);
        for (int i = 0; i < 100 && !client_->Get("/views"); ++i) {
            std::this_thread::sleep_for(10ms);
        }
    }

    void TearDown() override {
        server_->stop();
        thread_.join();
    }

    httplib::Result post(const std::string& path, const json& body) {
        return client_->Post(path, body.dump(), "application/json");
    }

    json wait_done(const std::string& id) {
        for (int i = 0; i < 600; ++i) {
            auto res = client_->Get("/job/" + id);
            const json j = json::parse(res->body);
            if (j.at("phase") == "done" || j.at("phase") == "failed") {
                return j;
            }
            std::this_thread::sleep_for(50ms);
        }
        return json{};
    }

    std::unique_ptr<SegmentationService> service_;
    std::unique_ptr<HttpServer> server_;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

TEST_F(HttpApi, SceneInfoAndViews) {
    auto info = client_->Get("/scene/info");
    ASSERT_TRUE(info);
    EXPECT_EQ(info->status, 200);
    EXPECT_EQ(json::parse(info->body).at("gaussians"), scene().cloud.size());
    auto views = client_->Get("/views");
    ASSERT_TRUE(views);
    EXPECT_EQ(json::parse(views->body).size(), 24u);
}

TEST_F(HttpApi, RenderReturnsPngOfViewSize) {
    auto res = client_->Get("/render?view=3&mode=rgb");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    const std::span bytes(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size());
    const RgbImage img = decode_png_rgb(bytes);
    EXPECT_EQ(img.width(), 96);
    EXPECT_EQ(client_->Get("/render?view=3&mode=depth")->status, 200);
    EXPECT_EQ(client_->Get("/render?view=99")->status, 404);
    EXPECT_EQ(client_->Get("/render?view=x")->status, 400);
    EXPECT_EQ(client_->Get("/render?view=1&mode=sepia")->status, 400);
    EXPECT_EQ(client_->Get("/render")->status, 400);
    EXPECT_EQ(client_->Get("/render?view=1&mode=seg")->status, 400);
}

TEST_F(HttpApi, SegmentRejectsBadRequests) {
    auto empty = post("/segment", {{"view0", 0}, {"points", json::array()}, {"provider", "oracle"}});
    ASSERT_TRUE(empty);
    EXPECT_EQ(empty->status, 400);
    EXPECT_NE(json::parse(empty->body).at("error").get<std::string>().find("at least one foreground point"),
              std::string::npos);
    EXPECT_EQ(client_->Post("/segment", "{not json", "application/json")->status, 400);
    EXPECT_EQ(post("/segment", {{"points", points_json()}, {"tau", 1.5}, {"provider", "oracle"}})->status, 400);
    EXPECT_EQ(post("/segment", {{"points", points_json()}, {"provider", "nobody"}})->status, 400);
    EXPECT_EQ(post("/segment", {{"points", json::array({{{"x", -4}, {"y", 2}}})}, {"provider", "oracle"}})->status,
              400);
    EXPECT_EQ(post("/segment", {{"view0", 77}, {"points", points_json()}, {"provider", "oracle"}})->status, 404);
}

TEST_F(HttpApi, UnreachableProviderIs503) {
    auto res = post("/segment", {{"points", points_json()}, {"provider", "http://127.0.0.1:1"}});
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 503);
}

TEST_F(HttpApi, UnknownJobIs404) {
    EXPECT_EQ(client_->Get("/job/job-999")->status, 404);
    EXPECT_EQ(client_->Get("/export/job-999")->status, 404);
    EXPECT_EQ(post("/edit", {{"job_id", "job-999"}, {"transform", {{"kind", "remove"}}}})->status, 404);
}

TEST_F(HttpApi, SegmentEditExportFlow) {
    auto submitted = post("/segment", {{"view0", 0}, {"points", points_json()}, {"provider", "oracle"}});
    ASSERT_TRUE(submitted);
    ASSERT_EQ(submitted->status, 202);
    const std::string id = json::parse(submitted->body).at("job_id");
    EXPECT_EQ(id, "job-1");
    const json done = wait_done(id);
    ASSERT_EQ(done.at("phase"), "done") << done.dump();
    EXPECT_GT(done.at("result").at("members").at("1").get<std::size_t>(), 0u);

    auto seg = client_->Get("/render?view=5&mode=seg&job=" + id);
    ASSERT_EQ(seg->status, 200);
    const std::span bytes(reinterpret_cast<const std::uint8_t*>(seg->body.data()), seg->body.size());
    const LabelImage mask = decode_png_gray(bytes);
    LabelImage target = scene().gt_masks[5];
    for (auto& l : target.pixels()) {
        l = l == 1 ? 1 : 0;
    }
    EXPECT_GT(mask_metrics(mask, target).iou, 0.8);

    auto exported = client_->Get("/export/" + id);
    ASSERT_EQ(exported->status, 200);
    std::istringstream ply(exported->body);
    EXPECT_EQ(read_ply(ply).size(), done.at("result").at("members").at("1").get<std::size_t>());

    auto edited = post("/edit", {{"job_id", id}, {"transform", {{"kind", "translate"}, {"offset", {0, 0, 1}}}}});
    ASSERT_EQ(edited->status, 200) << edited->body;
    const int revision = json::parse(edited->body).at("revision");
    EXPECT_EQ(revision, 1);
    EXPECT_EQ(client_->Get("/scene/info?revision=1")->status, 200);
    EXPECT_EQ(client_->Get("/scene/info?revision=5")->status, 404);
    EXPECT_EQ(post("/edit", {{"job_id", id}, {"transform", {{"kind", "explode"}}}})->status, 400);
    EXPECT_EQ(post("/edit", {{"transform", {{"kind", "remove"}}}})->status, 400);
}

TEST(Service, EditOnUnfinishedJobIs409) {
    auto service = make_service(1);
    auto gated = std::make_shared<GatedProvider>(make_oracle_provider(scene(), true));
    service->add_provider("gated", gated);
    SegmentRequest req = click_request();
    req.provider = "gated";
    const std::string id = service->submit(req);
    try {
        service->edit(id, 1, json{{"kind", "remove"}});
        ADD_FAILURE() << "edit on a running job succeeded";
    } catch (const ServiceError& e) {
        EXPECT_EQ(e.status(), 409);
    }
    gated->open();
    EXPECT_EQ(service->wait(id, 60s).phase, JobPhase::done);
    EXPECT_EQ(service->edit(id, 1, json{{"kind", "remove"}}), 1);
}

TEST(Service, ConcurrentJobsMatchSequentialAndLeaveBaseUntouched) {
    const std::string before = ply_bytes(scene().cloud);
    auto sequential = make_service(1);
    std::vector<std::string> expected;
    for (const GdMode gd : {GdMode::on, GdMode::off, GdMode::remove}) {
        const std::string id = sequential->submit(click_request(gd));
        const JobSnapshot snap = sequential->wait(id, 60s);
        ASSERT_EQ(snap.phase, JobPhase::done) << snap.error;
        expected.push_back(format_result(snap.run->result));
    }
    auto parallel = make_service(3);
    std::vector<std::string> ids;
    for (const GdMode gd : {GdMode::on, GdMode::off, GdMode::remove}) {
        ids.push_back(parallel->submit(click_request(gd)));
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const JobSnapshot snap = parallel->wait(ids[k], 60s);
        ASSERT_EQ(snap.phase, JobPhase::done) << snap.error;
        EXPECT_EQ(format_result(snap.run->result), expected[k]) << ids[k];
    }
    EXPECT_EQ(ply_bytes(scene().cloud), before);
    EXPECT_EQ(parallel->scene_info(0).at("gaussians"), scene().cloud.size());
    EXPECT_EQ(parallel->revision_count(), 1u);
}

TEST(Service, RendersArePureAndCached) {
    auto service = make_service(1);
    const Bytes a = service->render_png(2, RenderMode::rgb);
    const std::size_t cached = service->render_cache_size();
    const Bytes b = service->render_png(2, RenderMode::rgb);
    EXPECT_EQ(a, b);
    EXPECT_EQ(service->render_cache_size(), cached);
    ServiceOptions uncached;
    uncached.render_cache_entries = 0;
    SegmentationService fresh(scene().cloud, scene().cameras, uncached);
    EXPECT_EQ(fresh.render_png(2, RenderMode::rgb), a);
}

TEST(Service, RenderCacheIsBounded) {
    ServiceOptions options;
    options.render_cache_entries = 4;
    SegmentationService service(scene().cloud, scene().cameras, options);
    for (int view = 0; view < 10; ++view) {
        service.render_png(view, RenderMode::alpha);
    }
    EXPECT_EQ(service.render_cache_size(), 4u);
}

TEST(Service, EditsCreateRevisionsWithoutTouchingOlderOnes) {
    auto service = make_service(1);
    const std::string id = service->submit(click_request());
    const JobSnapshot snap = service->wait(id, 60s);
    ASSERT_EQ(snap.phase, JobPhase::done);
    const std::size_t members = snap.run->result.members(1).size();
    const int rev = service->edit(id, 1, json{{"kind", "remove"}});
    EXPECT_EQ(rev, 1);
    EXPECT_EQ(service->revision_count(), 2u);
    EXPECT_EQ(service->scene_info(0).at("gaussians"), scene().cloud.size());
    EXPECT_EQ(service->scene_info(1).at("gaussians").get<std::size_t>(), snap.run->state.active_count() - members);
    EXPECT_GT(members, 0u);

    SegmentRequest on_rev = click_request();
    on_rev.revision = 1;
    const JobSnapshot second = service->wait(service->submit(on_rev), 60s);
    EXPECT_EQ(second.revision, 1);
    EXPECT_EQ(second.phase, JobPhase::failed);
    EXPECT_NE(second.error.find("no anchor"), std::string::npos) << second.error;
    on_rev.revision = 9;
    try {
        service->submit(on_rev);
        ADD_FAILURE() << "unknown revision accepted";
    } catch (const ServiceError& e) {
        EXPECT_EQ(e.status(), 404);
    }
}

TEST(Service, RotateEditsRecordSkippedShRotation) {
    GaussianCloud cloud = scene().cloud;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        cloud[i].sh_degree = 1;
    }
    const json rotate{{"kind", "rotate"}, {"quaternion", {0.0, 0.0, 0.0, 1.0}}};
    for (const bool rotate_sh : {false, true}) {
        ServiceOptions options;
        options.workers = 1;
        options.rotate_sh = rotate_sh;
        SegmentationService service(cloud, scene().cameras, options);
        service.add_provider("oracle", make_oracle_provider(scene(), true));
        const std::string id = service.submit(click_request());
        ASSERT_EQ(service.wait(id, 60s).phase, JobPhase::done);
        const int rev = service.edit(id, 1, rotate);
        EXPECT_EQ(service.scene_info(rev).at("warnings").empty(), rotate_sh) << "rotate_sh=" << rotate_sh;
        EXPECT_TRUE(service.scene_info(0).at("warnings").empty());
    }
}

TEST(RequestParsing, DefaultsAndErrors) {
    SegmentParams defaults;
    defaults.tau = 0.65;
    const SegmentRequest req =
        parse_segment_request(json{{"points", json::array({{{"x", 1}, {"y", 2}, {"polarity", 0}}, {{"x", 3}, {"y", 4}}})}, {"gd", "delete"}},
                              defaults);
    EXPECT_EQ(req.params.tau, 0.65);
    EXPECT_EQ(req.params.gd, GdMode::remove);
    ASSERT_EQ(req.points.size(), 2u);
    EXPECT_EQ(req.points[0].polarity, Polarity::background);
    EXPECT_THROW(parse_segment_request(json::array(), defaults), ServiceError);
    EXPECT_THROW(parse_segment_request(json{{"points", 3}}, defaults), ServiceError);
    EXPECT_THROW(parse_segment_request(json{{"points", json::array({{{"x", 1}, {"y", 2}, {"polarity", 0}}})}}, defaults),
                 ServiceError);
    EXPECT_THROW(parse_segment_request(json{{"gd", "sometimes"}}, defaults), ServiceError);
    EXPECT_THROW(parse_edit_transform(json{{"kind", "rotate"}}, Eigen::Vector3d::Zero()), ServiceError);
    EXPECT_THROW(parse_render_mode("xray"), ServiceError);
}

} // namespace
} // namespace splatseg
