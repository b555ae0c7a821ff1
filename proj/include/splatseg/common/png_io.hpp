#pragma once

#include "splatseg/common/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatseg {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB; channel values in [0, 1] are quantized with rounding.
Bytes encode_png(const RgbImage& image);
/// 8-bit grayscale.
Bytes encode_png(const Image<std::uint8_t>& image);
/// 16-bit grayscale.
Bytes encode_png(const Image<std::uint16_t>& image);

/// Decodes a grayscale (8 or 16 bit) PNG. Color inputs keep their first channel,
/// palette inputs are expanded first. Alpha is dropped.
LabelImage decode_png_gray(std::span<const std::uint8_t> bytes);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Binary mask {0, nonzero} as 0/255 grayscale pixels.
Image<std::uint8_t> mask_to_gray(const LabelImage& mask);

} // namespace splatseg
