#include "splatseg/common/png_io.hpp"

#include "splatseg/common/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

namespace splatseg {
namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(data, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

// Rows are passed as already-packed big-endian byte rows.
Bytes encode_rows(int width, int height, int bit_depth, int color_type,
                  const std::vector<std::vector<png_byte>>& rows) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw IoError("png: cannot create write struct");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: cannot create info struct");
    }
    Bytes out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: encoding failed");
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows) {
        png_write_row(png, const_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::vector<png_byte>> rows;
};

DecodedPng decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw DataError("png: not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) {
        throw IoError("png: cannot create read struct");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot create info struct");
    }
    ReadCursor cursor{bytes, 0};
    DecodedPng result;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: decoding failed");
    }
    png_set_read_fn(png, &cursor, read_from_span);
    png_read_info(png, info);

    const auto color_type = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    result.width = static_cast<int>(png_get_image_width(png, info));
    result.height = static_cast<int>(png_get_image_height(png, info));
    result.channels = png_get_channels(png, info);
    result.bit_depth = png_get_bit_depth(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    result.rows.assign(static_cast<std::size_t>(result.height), std::vector<png_byte>(rowbytes));
    for (auto& row : result.rows) {
        png_read_row(png, row.data(), nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return result;
}

std::uint16_t sample(const DecodedPng& img, int x, int y, int channel) {
    const auto& row = img.rows[static_cast<std::size_t>(y)];
    const std::size_t idx = static_cast<std::size_t>(x * img.channels + channel);
    if (img.bit_depth == 16) {
        return static_cast<std::uint16_t>((row[2 * idx] << 8) | row[2 * idx + 1]);
    }
    return row[idx];
}

std::uint8_t quantize(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

} // namespace

Bytes encode_png(const RgbImage& image) {
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(image.height()),
                                            std::vector<png_byte>(3 * static_cast<std::size_t>(image.width())));
    for (int y = 0; y < image.height(); ++y) {
        auto& row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < image.width(); ++x) {
            const auto& px = image(x, y);
            for (int c = 0; c < 3; ++c) {
                row[static_cast<std::size_t>(3 * x + c)] = quantize(px[static_cast<std::size_t>(c)]);
            }
        }
    }
    return encode_rows(image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

Bytes encode_png(const Image<std::uint8_t>& image) {
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(image.height()));
    for (int y = 0; y < image.height(); ++y) {
        const auto* begin = image.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width());
        rows[static_cast<std::size_t>(y)].assign(begin, begin + image.width());
    }
    return encode_rows(image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, rows);
}

Bytes encode_png(const Image<std::uint16_t>& image) {
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(image.height()),
                                            std::vector<png_byte>(2 * static_cast<std::size_t>(image.width())));
    for (int y = 0; y < image.height(); ++y) {
        auto& row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < image.width(); ++x) {
            const std::uint16_t v = image(x, y);
            row[static_cast<std::size_t>(2 * x)] = static_cast<png_byte>(v >> 8);
            row[static_cast<std::size_t>(2 * x + 1)] = static_cast<png_byte>(v & 0xFF);
        }
    }
    return encode_rows(image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

LabelImage decode_png_gray(std::span<const std::uint8_t> bytes) {
    const DecodedPng img = decode(bytes);
    LabelImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out(x, y) = sample(img, x, y, 0);
        }
    }
    return out;
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
    const DecodedPng img = decode(bytes);
    const float scale = img.bit_depth == 16 ? 65535.0f : 255.0f;
    RgbImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int ch = img.channels >= 3 ? c : 0;
                out(x, y)[static_cast<std::size_t>(c)] = static_cast<float>(sample(img, x, y, ch)) / scale;
            }
        }
    }
    return out;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image<std::uint8_t> mask_to_gray(const LabelImage& mask) {
    Image<std::uint8_t> out(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out.pixels()[i] = mask.pixels()[i] != 0 ? 255 : 0;
    }
    return out;
}

} // namespace splatseg
