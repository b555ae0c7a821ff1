#include "splatseg/synth/metrics.hpp"

#include "splatseg/common/errors.hpp"

#include <algorithm>
#include <climits>
#include <string>
#include <vector>

namespace splatseg {

Image<int> chebyshev_distance(const Image<std::uint8_t>& seeds) {
    const int w = seeds.width();
    const int h = seeds.height();
    Image<int> d(w, h, INT_MAX);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (seeds.pixels()[i] != 0) {
            d.pixels()[i] = 0;
        }
    }
    auto relax = [&](int x, int y, int nx, int ny) {
        if (d.contains(nx, ny) && d(nx, ny) != INT_MAX) {
            d(x, y) = std::min(d(x, y), d(nx, ny) + 1);
        }
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            relax(x, y, x - 1, y);
            relax(x, y, x - 1, y - 1);
            relax(x, y, x, y - 1);
            relax(x, y, x + 1, y - 1);
        }
    }
    for (int y = h - 1; y >= 0; --y) {
        for (int x = w - 1; x >= 0; --x) {
            relax(x, y, x + 1, y);
            relax(x, y, x + 1, y + 1);
            relax(x, y, x, y + 1);
            relax(x, y, x - 1, y + 1);
        }
    }
    return d;
}

Image<std::uint8_t> mask_boundary(const LabelImage& mask) {
    Image<std::uint8_t> out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0) {
                continue;
            }
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy) {
                for (int dx = -1; dx <= 1 && !edge; ++dx) {
                    if (mask.contains(x + dx, y + dy) && mask(x + dx, y + dy) == 0) {
                        edge = true;
                    }
                }
            }
            out(x, y) = edge ? 1 : 0;
        }
    }
    return out;
}

Image<std::uint8_t> boundary_band(const LabelImage& gt, int band) {
    if (band < 0) {
        throw ParameterError("boundary band width must be non-negative");
    }
    const Image<int> d = chebyshev_distance(mask_boundary(gt));
    Image<std::uint8_t> out(gt.width(), gt.height(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.pixels()[i] = d.pixels()[i] < band ? 1 : 0;
    }
    return out;
}

namespace {

double ratio_or_one(std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Area under the precision-recall curve, summing precision times recall
// increments over descending score thresholds (tied scores form one threshold).
double average_precision(std::vector<std::pair<float, bool>> scored) {
    std::size_t positives = 0;
    for (const auto& s : scored) {
        positives += s.second ? 1 : 0;
    }
    if (positives == 0) {
        return 1.0;
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        tp += scored[i].second ? 1 : 0;
        ++seen;
        if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) {
            continue;
        }
        if (scored[i].first <= 0.0f) {
            break;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

} // namespace

MaskMetrics mask_metrics(const LabelImage& pred, const LabelImage& gt, int band, const FloatImage* pred_alpha) {
    if (pred.width() != gt.width() || pred.height() != gt.height()) {
        throw ParameterError("mask_metrics: prediction is " + std::to_string(pred.width()) + "x" +
                             std::to_string(pred.height()) + ", ground truth is " + std::to_string(gt.width()) +
                             "x" + std::to_string(gt.height()));
    }
    if (pred_alpha != nullptr && (pred_alpha->width() != gt.width() || pred_alpha->height() != gt.height())) {
        throw ParameterError("mask_metrics: alpha image size differs from the masks");
    }
    const Image<std::uint8_t> in_band = boundary_band(gt, band);
    std::size_t inter = 0, uni = 0, agree = 0;
    std::size_t b_inter = 0, b_uni = 0, b_pred = 0, b_gt = 0;
    std::vector<std::pair<float, bool>> scored;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = pred.pixels()[i] != 0;
        const bool g = gt.pixels()[i] != 0;
        inter += p && g;
        uni += p || g;
        agree += p == g;
        if (in_band.pixels()[i] != 0) {
            b_inter += p && g;
            b_uni += p || g;
            b_pred += p;
            b_gt += g;
            if (pred_alpha != nullptr) {
                scored.emplace_back(pred_alpha->pixels()[i], g);
            }
        }
    }
    MaskMetrics m;
    m.band_width = band;
    m.iou = ratio_or_one(inter, uni);
    m.acc = gt.size() == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(gt.size());
    m.boundary_iou = ratio_or_one(b_inter, b_uni);
    const double precision = ratio_or_one(b_inter, b_pred);
    const double recall = ratio_or_one(b_inter, b_gt);
    m.boundary_f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    if (pred_alpha != nullptr) {
        m.boundary_ap = average_precision(std::move(scored));
        m.ap_single_point = false;
    } else {
        m.boundary_ap = precision;
        m.ap_single_point = true;
    }
    return m;
}

} // namespace splatseg
