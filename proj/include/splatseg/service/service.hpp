#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/errors.hpp"
#include "splatseg/common/png_io.hpp"
#include "splatseg/model/edit.hpp"
#include "splatseg/model/gaussian.hpp"
#include "splatseg/prompt/mask_provider.hpp"
#include "splatseg/render/rasterizer.hpp"
#include "splatseg/seg/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace splatseg {

/// Request-level failure carrying the HTTP status it maps to.
class ServiceError : public Error {
public:
    ServiceError(int status, const std::string& message) : Error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

enum class JobPhase { queued, lifting, masking, labeling, voting, done, failed };

std::string_view to_string(JobPhase phase);

/// Point-in-time copy of a job. `run` is set once the job is done.
struct JobSnapshot {
    std::string id;
    JobPhase phase = JobPhase::queued;
    std::size_t done = 0;
    std::size_t total = 0;
    std::string error;
    int revision = 0;
    std::shared_ptr<const SegmentRun> run;
};

nlohmann::json job_to_json(const JobSnapshot& job);

struct SegmentRequest {
    std::optional<int> view0;
    std::vector<PromptPoint> points;
    SegmentParams params;
    /// Registered provider name or an http(s) URL; empty selects the default.
    std::string provider;
    int revision = 0;
};

/// Parses a POST /segment body over `defaults`. Throws ServiceError(400).
SegmentRequest parse_segment_request(const nlohmann::json& body, const SegmentParams& defaults);

/// {"kind": "remove"} | {"kind": "translate", "offset": [x, y, z]} |
/// {"kind": "rotate", "quaternion": [w, x, y, z], "pivot": [x, y, z]}.
/// A rotation without a pivot gets `default_pivot`. Throws ServiceError(400).
EditTransform parse_edit_transform(const nlohmann::json& body, const Eigen::Vector3d& default_pivot);

enum class RenderMode { rgb, depth, alpha, seg };

/// Throws ServiceError(400) on an unknown mode.
RenderMode parse_render_mode(std::string_view text);

/// rgb as 8-bit color, depth as 16-bit millimetres, alpha as 8-bit gray.
/// Throws ParameterError for seg.
Bytes encode_render(const RenderOutput& out, RenderMode mode);

struct ServiceOptions {
    /// Segmentation workers; 0 = one per hardware thread.
    unsigned workers = 0;
    std::size_t render_cache_entries = 256;
    SegmentParams defaults;
    /// Provider used when a request names none: a registered name or a URL.
    std::string default_provider;
    /// Rotate degree >= 1 SH coefficients in rotate edits.
    bool rotate_sh = false;
};

/// Scene state, job queue and render cache behind the HTTP API. All public
/// members are thread-safe.
class SegmentationService {
public:
    SegmentationService(GaussianCloud cloud, std::vector<Camera> cameras, ServiceOptions options = {});
    ~SegmentationService();

    SegmentationService(const SegmentationService&) = delete;
    SegmentationService& operator=(const SegmentationService&) = delete;

    void add_provider(const std::string& name, std::shared_ptr<MaskProvider> provider);

    const std::vector<Camera>& cameras() const noexcept { return cameras_; }
    const SegmentParams& defaults() const noexcept { return options_.defaults; }

    /// Counts and bounds of a scene revision (0 is the loaded scene).
    nlohmann::json scene_info(int revision = 0) const;
    nlohmann::json views_json() const;

    /// Validates the request, resolves and probes the provider and queues a job
    /// against the requested revision. Throws ServiceError 400, 404 or 503.
    std::string submit(const SegmentRequest& request);

    /// Throws ServiceError(404) for an unknown id.
    JobSnapshot job(const std::string& id) const;

    /// Blocks until the job is done or failed, or the timeout expires.
    JobSnapshot wait(const std::string& id, std::chrono::milliseconds timeout) const;

    /// PNG of a view. rgb is 8-bit color, depth 16-bit millimetres, alpha 8-bit,
    /// seg a 0/255 object mask (binary jobs) or the 8-bit label map (multi
    /// jobs). With a job, the job's overlay is rendered instead of the revision.
    Bytes render_png(int view, RenderMode mode, const std::string& job = {}, std::optional<int> revision = {});

    /// Applies an edit to `object` of a finished job and stores the outcome as a
    /// new revision. Returns the revision id. Throws ServiceError 404 or 409.
    int edit(const std::string& job, int object, const nlohmann::json& transform);

    /// Binary PLY of the job's overlay: the active Gaussians of `object`, or the
    /// whole materialized scene when object is unset.
    std::string export_ply(const std::string& job, std::optional<int> object) const;

    std::size_t revision_count() const;
    std::size_t render_cache_size() const;

private:
    struct Job;
    struct Revision {
        std::shared_ptr<const GaussianCloud> cloud;
        int parent = -1;
        std::string job;
        std::vector<std::string> warnings;
    };

    std::shared_ptr<Job> find_job(const std::string& id) const;
    std::shared_ptr<const GaussianCloud> revision_cloud(int revision) const;
    std::shared_ptr<MaskProvider> resolve_provider(const std::string& name) const;
    const Camera& camera(int view) const;
    void worker_loop();
    void execute(Job& job);

    std::vector<Camera> cameras_;
    ServiceOptions options_;

    mutable std::mutex mutex_;
    std::vector<Revision> revisions_;
    std::map<std::string, std::shared_ptr<MaskProvider>> providers_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::size_t next_job_ = 1;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::shared_ptr<Job>> queue_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;

    mutable std::mutex cache_mutex_;
    std::map<std::string, Bytes> cache_;
    std::list<std::string> cache_order_;
};

/// HTTP front end: GET /scene/info, GET /views, GET /render, POST /segment,
/// GET /job/{id}, POST /edit, GET /export/{id}.
class HttpServer {
public:
    explicit HttpServer(SegmentationService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to host:port; port 0 picks a free port. Returns the bound port.
    /// Throws IoError when binding fails.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires bind().
    void listen();
    void stop();

private:
    SegmentationService& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace splatseg
