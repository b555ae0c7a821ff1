#pragma once

#include "splatseg/common/image.hpp"

#include <cstdint>
#include <limits>

namespace splatseg {

/// Default boundary band width in pixels.
inline constexpr int kDefaultBand = 3;

struct MaskMetrics {
    double iou = 0.0;
    /// Full-image pixel accuracy.
    double acc = 0.0;
    double boundary_iou = 0.0;
    double boundary_ap = 0.0;
    double boundary_f1 = 0.0;
    int band_width = kDefaultBand;
    /// True when AP was computed from a binary mask (precision at one operating point).
    bool ap_single_point = false;
};

/// Chebyshev distance (8-connected steps) from every pixel to the nearest nonzero
/// pixel of `seeds`; INT_MAX where there is no seed.
Image<int> chebyshev_distance(const Image<std::uint8_t>& seeds);

/// Foreground pixels with at least one background 8-neighbor. Off-image
/// neighbors do not count.
Image<std::uint8_t> mask_boundary(const LabelImage& mask);

/// Pixels at Chebyshev distance < band from the boundary of `gt`.
Image<std::uint8_t> boundary_band(const LabelImage& gt, int band = kDefaultBand);

/// Compares binary masks (nonzero = foreground). `pred_alpha`, when given, is the
/// pre-threshold alpha used for boundary AP. Empty-vs-empty scores 1. Throws
/// ParameterError on size mismatch.
MaskMetrics mask_metrics(const LabelImage& pred, const LabelImage& gt, int band = kDefaultBand,
                         const FloatImage* pred_alpha = nullptr);

} // namespace splatseg
