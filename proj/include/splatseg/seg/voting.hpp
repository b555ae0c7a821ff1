#pragma once

#include "splatseg/seg/label_matrix.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace splatseg {

/// Default confidence threshold.
inline constexpr double kDefaultTau = 0.7;
/// Preliminary vote-out threshold applied before tau.
inline constexpr double kPreliminaryVote = 0.5;

struct Votes {
    std::vector<int> object_ids;
    /// Binary mode: fraction of observing views labelled 1. Multi-object mode:
    /// fraction of observing views that agree with the chosen label.
    std::vector<double> confidence;
};

struct BinaryVoteOptions {
    /// Divide by this many views instead of each Gaussian's own observation count.
    std::optional<std::size_t> global_views;
};

/// s_i = (sum of binary labels) / N_i, O_i = 1 iff s_i > tau (and s_i > 0.5 when
/// tau < 0.5). Unobserved or inactive Gaussians get s = 0, O = 0. Labels other
/// than 0 count as 1. Throws ParameterError unless 0 < tau < 1.
Votes vote_binary(const LabelMatrix& labels, double tau, std::span<const std::uint8_t> active = {},
                  const BinaryVoteOptions& options = {});

/// O_i = most frequent observed label; ties go to the lowest label, so background
/// wins any tie it takes part in. Unobserved or inactive Gaussians get 0.
/// Throws ParameterError unless labels.num_objects() >= 2.
Votes vote_multiobject(const LabelMatrix& labels, std::span<const std::uint8_t> active = {});

} // namespace splatseg
