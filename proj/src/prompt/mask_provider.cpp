#include "splatseg/prompt/mask_provider.hpp"

#include "splatseg/common/base64.hpp"
#include "splatseg/common/errors.hpp"
#include "splatseg/common/png_io.hpp"

#include "httplib.h"
#include <nlohmann/json.hpp>

#include <future>

namespace splatseg {
namespace {

using nlohmann::json;

LabelImage binarize(LabelImage mask) {
    for (auto& v : mask.pixels()) {
        v = v != 0 ? 1 : 0;
    }
    return mask;
}

} // namespace

FileProvider::FileProvider(std::filesystem::path directory, bool binary)
    : directory_(std::move(directory)), binary_(binary) {}

LabelImage FileProvider::request(const MaskRequest& req) {
    const auto path = directory_ / ("mask_" + std::to_string(req.camera.id) + ".png");
    if (!std::filesystem::exists(path)) {
        throw ProviderError("missing mask file " + path.string());
    }
    try {
        LabelImage mask = decode_png_gray(read_file(path));
        return binary_ ? binarize(std::move(mask)) : mask;
    } catch (const Error& e) {
        throw ProviderError(path.string() + ": " + e.what());
    }
}

std::string FileProvider::provenance() const { return "file:" + directory_.string(); }

OracleProvider::OracleProvider(std::map<int, LabelImage> masks, std::optional<std::uint16_t> target)
    : masks_(std::move(masks)), target_(target) {}

LabelImage OracleProvider::request(const MaskRequest& req) {
    const auto it = masks_.find(req.camera.id);
    if (it == masks_.end()) {
        throw ProviderError("oracle has no mask for view " + std::to_string(req.camera.id));
    }
    return target_ ? select_label(it->second, *target_) : it->second;
}

std::string OracleProvider::provenance() const {
    return target_ ? "oracle:label=" + std::to_string(*target_) : "oracle:multi-label";
}

HttpProvider::HttpProvider(std::string url, HttpProviderOptions options)
    : url_(std::move(url)), options_(options) {
    while (!url_.empty() && url_.back() == '/') {
        url_.pop_back();
    }
}

bool HttpProvider::reachable(std::string* reason) const {
    httplib::Client client(url_);
    client.set_connection_timeout(std::chrono::seconds(2));
    client.set_read_timeout(std::chrono::seconds(2));
    const auto res = client.Get("/");
    if (!res) {
        if (reason != nullptr) {
            *reason = "mask provider " + url_ + " unreachable: " + httplib::to_string(res.error());
        }
        return false;
    }
    return true;
}

LabelImage HttpProvider::request(const MaskRequest& req) {
    json body;
    body["view_id"] = req.camera.id;
    body["width"] = req.camera.width;
    body["height"] = req.camera.height;
    if (req.image != nullptr) {
        body["image"] = base64_encode(encode_png(*req.image));
    } else {
        body["image"] = "";
    }
    json points = json::array();
    for (const auto& p : req.points) {
        points.push_back({{"x", p.pixel.x()}, {"y", p.pixel.y()}, {"polarity", static_cast<int>(p.polarity)}});
    }
    body["points"] = points;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        httplib::Client client(url_);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        const auto res = client.Post("/mask", payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        try {
            const json reply = json::parse(res->body);
            LabelImage mask = decode_png_gray(base64_decode(reply.at("mask").get<std::string>()));
            return options_.binary ? binarize(std::move(mask)) : mask;
        } catch (const std::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
        }
    }
    throw ProviderError("mask provider " + url_ + " failed for view " + std::to_string(req.camera.id) + ": " +
                        last_error);
}

MaskSet get_masks(MaskProvider& provider, std::span<const Camera> views, std::span<const RgbImage> images,
                  std::span<const ViewPrompts> prompts) {
    if (!images.empty() && images.size() != views.size()) {
        throw ParameterError("get_masks: images must be parallel to views");
    }
    if (!prompts.empty() && prompts.size() != views.size()) {
        throw ParameterError("get_masks: prompts must be parallel to views");
    }
    MaskSet set;
    set.provider = provider.provenance();
    set.view_prompts.assign(prompts.begin(), prompts.end());

    std::vector<std::size_t> pending;
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (!prompts.empty() && !prompts[v].usable) {
            set.unusable[views[v].id] = prompts[v].reason.empty() ? "no prompts" : prompts[v].reason;
            continue;
        }
        pending.push_back(v);
    }

    auto fetch = [&](std::size_t v) -> LabelImage {
        const RgbImage* image = images.empty() ? nullptr : &images[v];
        const std::span<const PromptPoint> pts =
            prompts.empty() ? std::span<const PromptPoint>{} : std::span<const PromptPoint>(prompts[v].points);
        return provider.request(MaskRequest{views[v], image, pts});
    };
    auto accept = [&](std::size_t v, LabelImage mask) {
        const Camera& cam = views[v];
        if (mask.width() != cam.width || mask.height() != cam.height) {
            set.unusable[cam.id] = "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                   ", camera is " + std::to_string(cam.width) + "x" + std::to_string(cam.height);
            return;
        }
        set.masks.emplace(cam.id, std::move(mask));
    };

    const unsigned limit = provider.max_in_flight();
    const std::size_t batch = limit == 0 ? pending.size() : limit;
    if (batch <= 1) {
        for (const auto v : pending) {
            try {
                accept(v, fetch(v));
            } catch (const Error& e) {
                set.unusable[views[v].id] = e.what();
            }
        }
    } else {
        for (std::size_t start = 0; start < pending.size(); start += batch) {
            const std::size_t stop = std::min(pending.size(), start + batch);
            std::vector<std::future<LabelImage>> futures;
            for (std::size_t k = start; k < stop; ++k) {
                futures.push_back(std::async(std::launch::async, fetch, pending[k]));
            }
            for (std::size_t k = start; k < stop; ++k) {
                try {
                    accept(pending[k], futures[k - start].get());
                } catch (const Error& e) {
                    set.unusable[views[pending[k]].id] = e.what();
                }
            }
        }
    }

    if (set.usable_count() < 2) {
        std::string detail;
        for (const auto& [id, reason] : set.unusable) {
            detail += "; view " + std::to_string(id) + ": " + reason;
        }
        throw PipelineError("only " + std::to_string(set.usable_count()) + " usable view(s), need at least 2" + detail);
    }
    return set;
}

} // namespace splatseg
