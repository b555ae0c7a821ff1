#include "splatseg/service/service.hpp"

#include "splatseg/camera/camera_io.hpp"
#include "splatseg/common/parallel.hpp"
#include "splatseg/model/ply_io.hpp"
#include "splatseg/render/rasterizer.hpp"
#include "splatseg/seg/result_io.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>

namespace splatseg {

using nlohmann::json;

struct SegmentationService::Job {
    std::string id;
    SegmentRequest request;
    std::shared_ptr<const GaussianCloud> base;
    std::shared_ptr<MaskProvider> provider;

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    JobPhase phase = JobPhase::queued;
    std::size_t done = 0;
    std::size_t total = 0;
    std::string error;
    std::shared_ptr<const SegmentRun> run;

    JobSnapshot snapshot() const {
        std::lock_guard lock(mutex);
        return {id, phase, done, total, error, request.revision, run};
    }

    // Phases only move forward.
    void advance(JobPhase next) {
        if (static_cast<int>(next) > static_cast<int>(phase)) {
            phase = next;
        }
    }
};

namespace {

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j, const char* name) {
    if (!j.is_array() || j.size() != 3) {
        throw ServiceError(400, std::string("'") + name + "' must be an array of 3 numbers");
    }
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) {
            throw ServiceError(400, std::string("'") + name + "' must be an array of 3 numbers");
        }
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

Polarity parse_polarity(const json& j) {
    if (j.is_boolean()) {
        return j.get<bool>() ? Polarity::foreground : Polarity::background;
    }
    if (j.is_number_integer()) {
        const int v = j.get<int>();
        if (v == 0 || v == 1) {
            return v == 1 ? Polarity::foreground : Polarity::background;
        }
    }
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "foreground" || s == "fg" || s == "positive") {
            return Polarity::foreground;
        }
        if (s == "background" || s == "bg" || s == "negative") {
            return Polarity::background;
        }
    }
    throw ServiceError(400, "polarity must be 1/0 or \"foreground\"/\"background\"");
}

JobPhase to_job_phase(SegmentPhase phase) {
    switch (phase) {
    case SegmentPhase::lifting:
        return JobPhase::lifting;
    case SegmentPhase::masking:
        return JobPhase::masking;
    case SegmentPhase::labeling:
        return JobPhase::labeling;
    case SegmentPhase::voting:
        return JobPhase::voting;
    }
    return JobPhase::queued;
}

std::string_view mode_name(RenderMode mode) {
    switch (mode) {
    case RenderMode::rgb:
        return "rgb";
    case RenderMode::depth:
        return "depth";
    case RenderMode::alpha:
        return "alpha";
    case RenderMode::seg:
        return "seg";
    }
    return "?";
}

} // namespace

Bytes encode_render(const RenderOutput& out, RenderMode mode) {
    if (mode == RenderMode::seg) {
        throw ParameterError("encode_render: seg needs a segmentation result");
    }
    if (mode == RenderMode::rgb) {
        return encode_png(out.rgb);
    }
    if (mode == RenderMode::depth) {
        Image<std::uint16_t> mm(out.depth.width(), out.depth.height());
        for (std::size_t i = 0; i < mm.size(); ++i) {
            const double v = std::round(static_cast<double>(out.depth.pixels()[i]) * 1000.0);
            mm.pixels()[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
        }
        return encode_png(mm);
    }
    Image<std::uint8_t> a(out.alpha.width(), out.alpha.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = std::round(static_cast<double>(out.alpha.pixels()[i]) * 255.0);
        a.pixels()[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return encode_png(a);
}

std::string_view to_string(JobPhase phase) {
    switch (phase) {
    case JobPhase::queued:
        return "queued";
    case JobPhase::lifting:
        return "lifting";
    case JobPhase::masking:
        return "masking";
    case JobPhase::labeling:
        return "labeling";
    case JobPhase::voting:
        return "voting";
    case JobPhase::done:
        return "done";
    case JobPhase::failed:
        return "failed";
    }
    return "unknown";
}

json job_to_json(const JobSnapshot& job) {
    json j{{"job_id", job.id},
           {"phase", std::string(to_string(job.phase))},
           {"progress", {{"done", job.done}, {"total", job.total}}},
           {"revision", job.revision}};
    if (job.phase == JobPhase::failed) {
        j["error"] = job.error;
    }
    if (job.run) {
        const SegmentationResult& r = job.run->result;
        json members = json::object();
        for (int k = 1; k <= r.num_objects; ++k) {
            members[std::to_string(k)] = r.members(k).size();
        }
        json unusable = json::object();
        for (const auto& [view, reason] : job.run->unusable_views) {
            unusable[std::to_string(view)] = reason;
        }
        j["result"] = {{"num_objects", r.num_objects},
                       {"members", members},
                       {"gaussians", r.object_ids.size()},
                       {"decompositions", r.decompositions.size()},
                       {"views", r.views},
                       {"unusable_views", unusable},
                       {"provider", r.provider},
                       {"params", params_to_json(r.params)},
                       {"export", "/export/" + job.id}};
    }
    return j;
}

SegmentRequest parse_segment_request(const json& body, const SegmentParams& defaults) {
    if (!body.is_object()) {
        throw ServiceError(400, "request body must be a JSON object");
    }
    SegmentRequest req;
    req.params = defaults;
    try {
        if (body.contains("view0")) {
            req.view0 = body.at("view0").get<int>();
        }
        if (body.contains("points")) {
            const json& pts = body.at("points");
            if (!pts.is_array()) {
                throw ServiceError(400, "'points' must be an array");
            }
            for (const auto& p : pts) {
                if (!p.is_object() || !p.contains("x") || !p.contains("y")) {
                    throw ServiceError(400, "each point needs 'x' and 'y'");
                }
                PromptPoint point;
                point.pixel = {p.at("x").get<double>(), p.at("y").get<double>()};
                if (p.contains("polarity")) {
                    point.polarity = parse_polarity(p.at("polarity"));
                }
                req.points.push_back(point);
            }
        }
        if (body.contains("tau")) {
            req.params.tau = body.at("tau").get<double>();
        }
        if (body.contains("epsilon")) {
            req.params.epsilon = body.at("epsilon").get<double>();
        }
        if (body.contains("gd")) {
            req.params.gd = parse_gd_mode(body.at("gd").get<std::string>());
        }
        if (body.contains("views_percent")) {
            req.params.views_percent = body.at("views_percent").get<double>();
        }
        if (body.contains("multi")) {
            req.params.multi = body.at("multi").get<bool>();
        }
        if (body.contains("global_n")) {
            req.params.global_n = body.at("global_n").get<bool>();
        }
        if (body.contains("discard_cut")) {
            req.params.discard_cut = body.at("discard_cut").get<bool>();
        }
        if (body.contains("provider") && !body.at("provider").is_null()) {
            req.provider = body.at("provider").get<std::string>();
        }
        if (body.contains("revision")) {
            req.revision = body.at("revision").get<int>();
        }
        req.params.validate();
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed request: ") + e.what());
    } catch (const ParameterError& e) {
        throw ServiceError(400, e.what());
    }
    const bool any_foreground = std::any_of(req.points.begin(), req.points.end(),
                                            [](const PromptPoint& p) { return p.polarity == Polarity::foreground; });
    if (!any_foreground) {
        throw ServiceError(400, "at least one foreground point is required");
    }
    return req;
}

EditTransform parse_edit_transform(const json& body, const Eigen::Vector3d& default_pivot) {
    if (!body.is_object() || !body.contains("kind") || !body.at("kind").is_string()) {
        throw ServiceError(400, "transform needs a 'kind' of remove, translate or rotate");
    }
    const std::string kind = body.at("kind").get<std::string>();
    try {
        if (kind == "remove") {
            return EditTransform::remove();
        }
        if (kind == "translate") {
            if (!body.contains("offset")) {
                throw ServiceError(400, "translate needs 'offset'");
            }
            return EditTransform::translate(vec3_from(body.at("offset"), "offset"));
        }
        if (kind == "rotate") {
            if (!body.contains("quaternion")) {
                throw ServiceError(400, "rotate needs 'quaternion' [w, x, y, z]");
            }
            const json& q = body.at("quaternion");
            if (!q.is_array() || q.size() != 4) {
                throw ServiceError(400, "'quaternion' must be [w, x, y, z]");
            }
            const Eigen::Quaterniond rot(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                         q[3].get<double>());
            const Eigen::Vector3d pivot = body.contains("pivot") ? vec3_from(body.at("pivot"), "pivot") : default_pivot;
            return EditTransform::rotate(rot, pivot);
        }
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed transform: ") + e.what());
    } catch (const ParameterError& e) {
        throw ServiceError(400, e.what());
    }
    throw ServiceError(400, "unknown transform kind '" + kind + "'");
}

RenderMode parse_render_mode(std::string_view text) {
    if (text == "rgb") {
        return RenderMode::rgb;
    }
    if (text == "depth") {
        return RenderMode::depth;
    }
    if (text == "alpha") {
        return RenderMode::alpha;
    }
    if (text == "seg") {
        return RenderMode::seg;
    }
    throw ServiceError(400, "mode must be one of rgb, depth, alpha, seg");
}

SegmentationService::SegmentationService(GaussianCloud cloud, std::vector<Camera> cameras, ServiceOptions options)
    : cameras_(std::move(cameras)), options_(std::move(options)) {
    if (cameras_.empty()) {
        throw ParameterError("service: no cameras");
    }
    std::sort(cameras_.begin(), cameras_.end(), [](const Camera& a, const Camera& b) { return a.id < b.id; });
    revisions_.push_back({std::make_shared<const GaussianCloud>(std::move(cloud)), -1, {}, {}});
    const unsigned n = resolve_threads(options_.workers);
    workers_.reserve(n);
    for (unsigned i = 0; i < n; ++i) {
        workers_.emplace_back([this] { worker_loop(); });
    }
}

SegmentationService::~SegmentationService() {
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& t : workers_) {
        t.join();
    }
}

void SegmentationService::add_provider(const std::string& name, std::shared_ptr<MaskProvider> provider) {
    if (!provider) {
        throw ParameterError("add_provider: null provider");
    }
    std::lock_guard lock(mutex_);
    providers_[name] = std::move(provider);
}

const Camera& SegmentationService::camera(int view) const {
    const auto it = std::find_if(cameras_.begin(), cameras_.end(), [&](const Camera& c) { return c.id == view; });
    if (it == cameras_.end()) {
        throw ServiceError(404, "unknown view " + std::to_string(view));
    }
    return *it;
}

std::shared_ptr<const GaussianCloud> SegmentationService::revision_cloud(int revision) const {
    std::lock_guard lock(mutex_);
    if (revision < 0 || static_cast<std::size_t>(revision) >= revisions_.size()) {
        throw ServiceError(404, "unknown revision " + std::to_string(revision));
    }
    return revisions_[static_cast<std::size_t>(revision)].cloud;
}

std::size_t SegmentationService::revision_count() const {
    std::lock_guard lock(mutex_);
    return revisions_.size();
}

std::size_t SegmentationService::render_cache_size() const {
    std::lock_guard lock(cache_mutex_);
    return cache_.size();
}

json SegmentationService::scene_info(int revision) const {
    const auto cloud = revision_cloud(revision);
    json j{{"revision", revision},
           {"gaussians", cloud->size()},
           {"views", cameras_.size()},
           {"sh_degree", cloud->sh_degree()},
           {"source", cloud->source()}};
    {
        std::lock_guard lock(mutex_);
        const Revision& r = revisions_[static_cast<std::size_t>(revision)];
        j["parent"] = r.parent < 0 ? json(nullptr) : json(r.parent);
        j["job"] = r.job.empty() ? json(nullptr) : json(r.job);
        j["revisions"] = revisions_.size();
        j["warnings"] = r.warnings;
    }
    if (cloud->empty()) {
        j["bounds"] = nullptr;
    } else {
        const Aabb box = cloud->bounds();
        j["bounds"] = {{"min", vec3_json(box.min)}, {"max", vec3_json(box.max)}};
    }
    return j;
}

json SegmentationService::views_json() const {
    json out = json::array();
    for (const auto& cam : cameras_) {
        out.push_back(camera_to_json(cam));
    }
    return out;
}

std::shared_ptr<MaskProvider> SegmentationService::resolve_provider(const std::string& name) const {
    const std::string chosen = name.empty() ? options_.default_provider : name;
    if (chosen.rfind("http://", 0) == 0 || chosen.rfind("https://", 0) == 0) {
        return std::make_shared<HttpProvider>(chosen);
    }
    std::lock_guard lock(mutex_);
    if (chosen.empty()) {
        if (providers_.size() == 1) {
            return providers_.begin()->second;
        }
        throw ServiceError(503, "no mask provider configured");
    }
    const auto it = providers_.find(chosen);
    if (it == providers_.end()) {
        throw ServiceError(400, "unknown provider '" + chosen + "'");
    }
    return it->second;
}

std::string SegmentationService::submit(const SegmentRequest& request) {
    SegmentRequest req = request;
    if (!req.view0) {
        req.view0 = cameras_.front().id;
    }
    const Camera& cam0 = camera(*req.view0);
    for (const auto& p : req.points) {
        if (!(p.pixel.x() >= 0.0 && p.pixel.y() >= 0.0 && p.pixel.x() <= cam0.width - 1 &&
              p.pixel.y() <= cam0.height - 1)) {
            throw ServiceError(400, "point outside view " + std::to_string(cam0.id));
        }
    }
    if (std::none_of(req.points.begin(), req.points.end(),
                     [](const PromptPoint& p) { return p.polarity == Polarity::foreground; })) {
        throw ServiceError(400, "at least one foreground point is required");
    }
    try {
        req.params.validate();
    } catch (const ParameterError& e) {
        throw ServiceError(400, e.what());
    }
    auto job = std::make_shared<Job>();
    job->base = revision_cloud(req.revision);
    job->provider = resolve_provider(req.provider);
    if (const auto* http = dynamic_cast<const HttpProvider*>(job->provider.get())) {
        std::string reason;
        if (!http->reachable(&reason)) {
            throw ServiceError(503, reason);
        }
    }
    job->request = std::move(req);
    {
        std::lock_guard lock(mutex_);
        job->id = "job-" + std::to_string(next_job_++);
        jobs_[job->id] = job;
    }
    {
        std::lock_guard lock(queue_mutex_);
        queue_.push_back(job);
    }
    queue_cv_.notify_one();
    return job->id;
}

void SegmentationService::worker_loop() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) {
                return;
            }
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        execute(*job);
    }
}

void SegmentationService::execute(Job& job) {
    const SegmentRequest& req = job.request;
    auto progress = [&job](SegmentPhase phase, std::size_t done, std::size_t total) {
        {
            std::lock_guard lock(job.mutex);
            job.advance(to_job_phase(phase));
            job.done = done;
            job.total = total;
        }
        job.changed.notify_all();
    };
    try {
        PromptInput prompt{*req.view0, req.points};
        SegmentParams params = req.params;
        params.threads = 1;
        auto run = std::make_shared<SegmentRun>(segment(*job.base, cameras_, *job.provider, prompt, params, progress));
        std::lock_guard lock(job.mutex);
        job.run = std::move(run);
        job.advance(JobPhase::done);
    } catch (const std::exception& e) {
        std::lock_guard lock(job.mutex);
        job.error = e.what()[0] != '\0' ? e.what() : "segmentation failed";
        job.phase = JobPhase::failed;
    }
    job.changed.notify_all();
}

std::shared_ptr<SegmentationService::Job> SegmentationService::find_job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) {
        throw ServiceError(404, "unknown job '" + id + "'");
    }
    return it->second;
}

JobSnapshot SegmentationService::job(const std::string& id) const { return find_job(id)->snapshot(); }

JobSnapshot SegmentationService::wait(const std::string& id, std::chrono::milliseconds timeout) const {
    const auto job = find_job(id);
    {
        std::unique_lock lock(job->mutex);
        job->changed.wait_for(lock, timeout,
                              [&] { return job->phase == JobPhase::done || job->phase == JobPhase::failed; });
    }
    return job->snapshot();
}

namespace {

std::shared_ptr<const SegmentRun> finished_run(const JobSnapshot& snap) {
    if (snap.phase == JobPhase::failed) {
        throw ServiceError(409, "job " + snap.id + " failed: " + snap.error);
    }
    if (!snap.run) {
        throw ServiceError(409, "job " + snap.id + " is not finished (" + std::string(to_string(snap.phase)) + ")");
    }
    return snap.run;
}

} // namespace

Bytes SegmentationService::render_png(int view, RenderMode mode, const std::string& job_id,
                                      std::optional<int> revision) {
    const Camera& cam = camera(view);
    if (mode == RenderMode::seg && job_id.empty()) {
        throw ServiceError(400, "mode=seg requires a job");
    }
    std::shared_ptr<const SegmentRun> run;
    std::shared_ptr<const GaussianCloud> cloud;
    int rev = revision.value_or(0);
    if (!job_id.empty()) {
        const JobSnapshot snap = job(job_id);
        run = finished_run(snap);
        rev = snap.revision;
    } else {
        cloud = revision_cloud(rev);
    }

    const std::string key = "r" + std::to_string(rev) + "|v" + std::to_string(view) + "|" +
                            std::string(mode_name(mode)) + "|" + job_id;
    {
        std::lock_guard lock(cache_mutex_);
        if (const auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
    }

    Bytes png;
    if (!run) {
        png = encode_render(render(*cloud, cam), mode);
    } else {
        const SegmentationResult& result = run->result;
        const GaussianCloud& overlay = run->state.cloud;
        const std::vector<std::size_t> active = indices_where(result.active);
        if (mode != RenderMode::seg) {
            png = encode_render(render_subset(overlay, active, cam), mode);
        } else if (!result.params.multi) {
            png = encode_png(mask_to_gray(render_object_mask(overlay, result.members(1), cam)));
        } else {
            const RenderOutput out = render_with_labels(overlay, active, result.object_ids, cam);
            Image<std::uint8_t> labels(cam.width, cam.height);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                labels.pixels()[i] = static_cast<std::uint8_t>(std::min<int>(out.id_map->pixels()[i], 255));
            }
            png = encode_png(labels);
        }
    }

    std::lock_guard lock(cache_mutex_);
    if (cache_.emplace(key, png).second) {
        cache_order_.push_back(key);
        while (cache_.size() > std::max<std::size_t>(1, options_.render_cache_entries)) {
            cache_.erase(cache_order_.front());
            cache_order_.pop_front();
        }
    }
    return png;
}

int SegmentationService::edit(const std::string& job_id, int object, const json& transform) {
    const JobSnapshot snap = job(job_id);
    const auto run = finished_run(snap);
    const SegmentationResult& result = run->result;
    if (object < 1 || object > result.num_objects) {
        throw ServiceError(400, "object must be in [1, " + std::to_string(result.num_objects) + "]");
    }
    // Materialize the overlay: active Gaussians in index order.
    const std::vector<std::size_t> active = indices_where(result.active);
    const GaussianCloud scene = run->state.cloud.subset(active);
    std::vector<std::size_t> subset;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (result.object_ids[active[k]] == object) {
            subset.push_back(k);
            centroid += scene[k].position;
        }
    }
    if (!subset.empty()) {
        centroid /= static_cast<double>(subset.size());
    }
    const EditTransform t = parse_edit_transform(transform, centroid);
    EditOutcome outcome = apply_edit(scene, subset, t, EditOptions{options_.rotate_sh});

    std::lock_guard lock(mutex_);
    revisions_.push_back({std::make_shared<const GaussianCloud>(std::move(outcome.cloud)), snap.revision, job_id,
                          std::move(outcome.warnings)});
    return static_cast<int>(revisions_.size() - 1);
}

std::string SegmentationService::export_ply(const std::string& job_id, std::optional<int> object) const {
    const auto run = finished_run(job(job_id));
    const SegmentationResult& result = run->result;
    if (object && (*object < 1 || *object > result.num_objects)) {
        throw ServiceError(400, "object must be in [1, " + std::to_string(result.num_objects) + "]");
    }
    const std::vector<std::size_t> indices = object ? result.members(*object) : indices_where(result.active);
    return ply_bytes(run->state.cloud.subset(indices));
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

int int_param(const httplib::Request& req, const char* name) {
    const std::string text = req.get_param_value(name);
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument(text);
        }
        return v;
    } catch (const std::exception&) {
        throw ServiceError(400, std::string("query parameter '") + name + "' must be an integer");
    }
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.what());
        } catch (const ParameterError& e) {
            send_error(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, std::string("malformed JSON body: ") + e.what());
    }
}

} // namespace

HttpServer::HttpServer(SegmentationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    s.Get("/scene/info", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const int revision = req.has_param("revision") ? int_param(req, "revision") : 0;
              res.set_content(service_.scene_info(revision).dump(), "application/json");
          }));

    s.Get("/views", guarded([this](const httplib::Request&, httplib::Response& res) {
              res.set_content(service_.views_json().dump(), "application/json");
          }));

    s.Get("/render", guarded([this](const httplib::Request& req, httplib::Response& res) {
              if (!req.has_param("view")) {
                  throw ServiceError(400, "query parameter 'view' is required");
              }
              const int view = int_param(req, "view");
              const RenderMode mode =
                  parse_render_mode(req.has_param("mode") ? req.get_param_value("mode") : std::string("rgb"));
              const std::string job = req.has_param("job") ? req.get_param_value("job") : std::string();
              std::optional<int> revision;
              if (req.has_param("revision")) {
                  revision = int_param(req, "revision");
              }
              const Bytes png = service_.render_png(view, mode, job, revision);
              res.set_content(std::string(png.begin(), png.end()), "image/png");
          }));

    s.Post("/segment", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const SegmentRequest request = parse_segment_request(parse_body(req), service_.defaults());
               const std::string id = service_.submit(request);
               res.status = 202;
               res.set_content(json{{"job_id", id}}.dump(), "application/json");
           }));

    s.Get(R"(/job/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              res.set_content(job_to_json(service_.job(req.matches[1])).dump(), "application/json");
          }));

    s.Post("/edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const json body = parse_body(req);
               if (!body.is_object() || !body.contains("job_id") || !body.at("job_id").is_string()) {
                   throw ServiceError(400, "'job_id' is required");
               }
               if (!body.contains("transform")) {
                   throw ServiceError(400, "'transform' is required");
               }
               int object = 1;
               if (body.contains("object")) {
                   if (!body.at("object").is_number_integer()) {
                       throw ServiceError(400, "'object' must be an integer");
                   }
                   object = body.at("object").get<int>();
               }
               const int revision = service_.edit(body.at("job_id").get<std::string>(), object, body.at("transform"));
               res.set_content(json{{"revision", revision}}.dump(), "application/json");
           }));

    s.Get(R"(/export/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              std::optional<int> object = 1;
              if (req.has_param("object")) {
                  if (req.get_param_value("object") == "all") {
                      object.reset();
                  } else {
                      object = int_param(req, "object");
                  }
              }
              res.set_content(service_.export_ply(req.matches[1], object), "application/octet-stream");
              res.set_header("Content-Disposition", "attachment; filename=\"" + std::string(req.matches[1]) + ".ply\"");
          }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) {
            throw IoError("cannot bind to " + host);
        }
        return bound;
    }
    if (!server_->bind_to_port(host, port)) {
        throw IoError("cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_) {
        server_->stop();
    }
}

} // namespace splatseg
