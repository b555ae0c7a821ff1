#include "splatseg/seg/voting.hpp"

#include "splatseg/common/errors.hpp"

#include <algorithm>
#include <string>

namespace splatseg {
namespace {

void check_active(std::span<const std::uint8_t> active, std::size_t n) {
    if (!active.empty() && active.size() != n) {
        throw ParameterError("active flags must be parallel to the label matrix");
    }
}

} // namespace

Votes vote_binary(const LabelMatrix& labels, double tau, std::span<const std::uint8_t> active,
                  const BinaryVoteOptions& options) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ParameterError("tau must lie in (0, 1), got " + std::to_string(tau));
    }
    if (options.global_views && *options.global_views == 0) {
        throw ParameterError("global view count must be positive");
    }
    check_active(active, labels.size());
    Votes out;
    out.object_ids.assign(labels.size(), 0);
    out.confidence.assign(labels.size(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!active.empty() && active[i] == 0) {
            continue;
        }
        const auto row = labels.row(i);
        if (row.empty()) {
            continue;
        }
        std::size_t hits = 0;
        for (const auto& o : row) {
            hits += o.label != 0 ? 1 : 0;
        }
        const double n = static_cast<double>(options.global_views ? *options.global_views : row.size());
        const double s = static_cast<double>(hits) / n;
        out.confidence[i] = s;
        const bool kept = tau < kPreliminaryVote ? (s > kPreliminaryVote && s > tau) : s > tau;
        out.object_ids[i] = kept ? 1 : 0;
    }
    return out;
}

Votes vote_multiobject(const LabelMatrix& labels, std::span<const std::uint8_t> active) {
    if (labels.num_objects() < 2) {
        throw ParameterError("multi-object voting needs at least 2 objects, got " +
                             std::to_string(labels.num_objects()));
    }
    check_active(active, labels.size());
    Votes out;
    out.object_ids.assign(labels.size(), 0);
    out.confidence.assign(labels.size(), 0.0);
    std::vector<std::size_t> histogram(static_cast<std::size_t>(labels.num_objects()) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!active.empty() && active[i] == 0) {
            continue;
        }
        const auto row = labels.row(i);
        if (row.empty()) {
            continue;
        }
        std::fill(histogram.begin(), histogram.end(), 0);
        for (const auto& o : row) {
            ++histogram[o.label];
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < histogram.size(); ++k) {
            if (histogram[k] > histogram[best]) {
                best = k;
            }
        }
        out.object_ids[i] = static_cast<int>(best);
        out.confidence[i] = static_cast<double>(histogram[best]) / static_cast<double>(row.size());
    }
    return out;
}

} // namespace splatseg
