#pragma once

#include "splatseg/camera/camera.hpp"
#include "splatseg/common/image.hpp"
#include "splatseg/prompt/prompt.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace splatseg {

struct MaskRequest {
    const Camera& camera;
    /// Rendered view; null when the provider does not need images.
    const RgbImage* image = nullptr;
    std::span<const PromptPoint> points;
};

/// Source of per-view label images. Implementations that are not safe for
/// concurrent requests report max_in_flight() == 1.
class MaskProvider {
public:
    virtual ~MaskProvider() = default;

    /// Label image for one view. Throws ProviderError on failure.
    virtual LabelImage request(const MaskRequest& req) = 0;
    virtual std::string provenance() const = 0;
    /// Concurrent requests allowed; 0 means unlimited.
    virtual unsigned max_in_flight() const { return 1; }
    virtual bool needs_images() const { return false; }
};

/// Reads `mask_{view_id}.png` (8-bit grayscale) from a directory. In binary mode
/// every nonzero pixel maps to label 1; otherwise pixel values are labels.
class FileProvider final : public MaskProvider {
public:
    explicit FileProvider(std::filesystem::path directory, bool binary = true);

    LabelImage request(const MaskRequest& req) override;
    std::string provenance() const override;
    unsigned max_in_flight() const override { return 0; }

private:
    std::filesystem::path directory_;
    bool binary_;
};

/// Ground-truth masks of a synthetic scene keyed by view id. With a target
/// label the masks are reduced to binary {0, 1}.
class OracleProvider final : public MaskProvider {
public:
    OracleProvider(std::map<int, LabelImage> masks, std::optional<std::uint16_t> target);

    LabelImage request(const MaskRequest& req) override;
    std::string provenance() const override;
    unsigned max_in_flight() const override { return 0; }

private:
    std::map<int, LabelImage> masks_;
    std::optional<std::uint16_t> target_;
};

struct HttpProviderOptions {
    std::chrono::seconds timeout{30};
    int retries = 1;
    unsigned max_in_flight = 4;
    bool binary = true;
};

/// POST {url}/mask with {view_id, width, height, image: base64 PNG,
/// points: [{x, y, polarity}]}; expects {mask: base64 grayscale PNG}.
class HttpProvider final : public MaskProvider {
public:
    explicit HttpProvider(std::string url, HttpProviderOptions options = {});

    LabelImage request(const MaskRequest& req) override;
    std::string provenance() const override { return url_; }
    unsigned max_in_flight() const override { return options_.max_in_flight; }
    bool needs_images() const override { return true; }

    /// True when a TCP connection to the server can be opened. `reason` receives
    /// the failure description otherwise.
    bool reachable(std::string* reason = nullptr) const;

private:
    std::string url_;
    HttpProviderOptions options_;
};

struct MaskSet {
    /// Usable views only, keyed by view id.
    std::map<int, LabelImage> masks;
    /// View id -> reason, for views that were requested but are unusable.
    std::map<int, std::string> unusable;
    std::string provider;
    std::vector<ViewPrompts> view_prompts;

    bool usable(int view_id) const { return masks.count(view_id) != 0; }
    std::size_t usable_count() const { return masks.size(); }
};

/// Requests one mask per view. `images`, when non-empty, is parallel to `views`;
/// `prompts`, when non-empty, is parallel to `views` and views flagged unusable
/// there are not requested. Provider failures and shape mismatches mark the view
/// unusable. Throws PipelineError when fewer than two usable views remain.
MaskSet get_masks(MaskProvider& provider, std::span<const Camera> views, std::span<const RgbImage> images,
                  std::span<const ViewPrompts> prompts);

} // namespace splatseg
