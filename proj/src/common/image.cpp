#include "splatseg/common/image.hpp"

#include <cmath>
#include <limits>

namespace splatseg {

int pixel_index(double coordinate) noexcept {
    if (!std::isfinite(coordinate)) {
        return std::numeric_limits<int>::min();
    }
    const double r = std::round(coordinate);
    if (r < static_cast<double>(std::numeric_limits<int>::min()) ||
        r > static_cast<double>(std::numeric_limits<int>::max())) {
        return std::numeric_limits<int>::min();
    }
    return static_cast<int>(r);
}

std::uint16_t label_at(const LabelImage& mask, double x, double y, std::uint16_t outside) noexcept {
    const int px = pixel_index(x);
    const int py = pixel_index(y);
    if (!mask.contains(px, py)) {
        return outside;
    }
    return mask(px, py);
}

LabelImage select_label(const LabelImage& labels, std::uint16_t target) {
    LabelImage out(labels.width(), labels.height());
    auto& dst = out.pixels();
    const auto& src = labels.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] == target ? 1 : 0;
    }
    return out;
}

} // namespace splatseg
