#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace splatseg {

/// Row-major single-plane image. Pixel (x, y) has its center at integer coordinates.
template <class T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
        assert(width >= 0 && height >= 0);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& pixels() noexcept { return data_; }
    const std::vector<T>& pixels() const noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        assert(contains(x, y));
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Rgb = std::array<float, 3>;
using RgbImage = Image<Rgb>;
using FloatImage = Image<float>;

/// Per-pixel object labels: 0 is background, 1..C are objects. Binary masks use {0, 1}.
using LabelImage = Image<std::uint16_t>;

/// Pixel index nearest to a continuous image coordinate (round half away from zero).
int pixel_index(double coordinate) noexcept;

/// Label at the pixel nearest to (x, y); `outside` when the pixel is off-image.
std::uint16_t label_at(const LabelImage& mask, double x, double y, std::uint16_t outside = 0) noexcept;

/// Binary view of a label image: 1 where label == target, 0 elsewhere.
LabelImage select_label(const LabelImage& labels, std::uint16_t target);

} // namespace splatseg
