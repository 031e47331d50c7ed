#include "usps/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "usps/util.hpp"

namespace usps {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void read_png(const std::filesystem::path& p, int& w, int& h, int& channels, int& bit_depth,
              std::vector<uint8_t>& bytes) {
    FilePtr f(std::fopen(p.string().c_str(), "rb"));
    if (!f) throw LoadError("cannot open PNG: " + p.string());
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw LoadError("libpng init failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw LoadError("libpng info init failed");
    if (setjmp(png_jmpbuf(r.png))) throw LoadError("corrupt PNG: " + p.string());
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    w = static_cast<int>(png_get_image_width(r.png, r.info));
    h = static_cast<int>(png_get_image_height(r.png, r.info));
    bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    if (bit_depth == 16) png_set_swap(r.png);  // little-endian in memory
    png_read_update_info(r.png, r.info);

    bit_depth = png_get_bit_depth(r.png, r.info);
    channels = png_get_channels(r.png, r.info);
    const size_t row_bytes = png_get_rowbytes(r.png, r.info);
    bytes.resize(row_bytes * static_cast<size_t>(h));
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = bytes.data() + row_bytes * static_cast<size_t>(y);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
}

void write_png(const std::filesystem::path& p, int w, int h, int color_type, int bit_depth,
               const std::vector<uint8_t>& bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    FilePtr f(std::fopen(p.string().c_str(), "wb"));
    if (!f) throw IoError("cannot write PNG: " + p.string());
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) throw IoError("libpng init failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw IoError("libpng info init failed");
    if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + p.string());
    png_init_io(wr.png, f.get());
    png_set_compression_level(wr.png, 6);
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    if (bit_depth == 16) png_set_swap(wr.png);
    const int ch = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const size_t row_bytes = static_cast<size_t>(w) * ch * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(bytes.data() + row_bytes * static_cast<size_t>(y));
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

}  // namespace

Image read_image_png(const std::filesystem::path& p) {
    int w, h, ch, depth;
    std::vector<uint8_t> bytes;
    read_png(p, w, h, ch, depth, bytes);
    Image img(w, h);
    const size_t n = img.pixel_count();
    auto r = img.plane(0);
    auto g = img.plane(1);
    auto b = img.plane(2);
    if (depth == 8) {
        for (size_t i = 0; i < n; ++i) {
            if (ch >= 3) {
                r[i] = bytes[i * ch + 0] / 255.f;
                g[i] = bytes[i * ch + 1] / 255.f;
                b[i] = bytes[i * ch + 2] / 255.f;
            } else {
                r[i] = g[i] = b[i] = bytes[i * ch] / 255.f;
            }
        }
    } else {
        const auto* px = reinterpret_cast<const uint16_t*>(bytes.data());
        for (size_t i = 0; i < n; ++i) {
            if (ch >= 3) {
                r[i] = px[i * ch + 0] / 65535.f;
                g[i] = px[i * ch + 1] / 65535.f;
                b[i] = px[i * ch + 2] / 65535.f;
            } else {
                r[i] = g[i] = b[i] = px[i * ch] / 65535.f;
            }
        }
    }
    return img;
}

void write_image_png(const Image& image, const std::filesystem::path& p) {
    const size_t n = image.pixel_count();
    std::vector<uint8_t> bytes(n * 3);
    const auto r = image.plane(0);
    const auto g = image.plane(1);
    const auto b = image.plane(2);
    for (size_t i = 0; i < n; ++i) {
        bytes[i * 3 + 0] = static_cast<uint8_t>(std::lround(clamp01(r[i]) * 255.f));
        bytes[i * 3 + 1] = static_cast<uint8_t>(std::lround(clamp01(g[i]) * 255.f));
        bytes[i * 3 + 2] = static_cast<uint8_t>(std::lround(clamp01(b[i]) * 255.f));
    }
    write_png(p, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, bytes);
}

SaliencyMap read_map_png16(const std::filesystem::path& p) {
    int w, h, ch, depth;
    std::vector<uint8_t> bytes;
    read_png(p, w, h, ch, depth, bytes);
    if (ch != 1) throw LoadError("expected single-channel map PNG: " + p.string());
    SaliencyMap map(w, h);
    const size_t n = map.size();
    if (depth == 16) {
        const auto* px = reinterpret_cast<const uint16_t*>(bytes.data());
        for (size_t i = 0; i < n; ++i) map.values[i] = px[i] / 65535.f;
    } else {
        for (size_t i = 0; i < n; ++i) map.values[i] = bytes[i] / 255.f;
    }
    return map;
}

void write_map_png16(const SaliencyMap& map, const std::filesystem::path& p) {
    const size_t n = map.size();
    std::vector<uint8_t> bytes(n * 2);
    auto* px = reinterpret_cast<uint16_t*>(bytes.data());
    for (size_t i = 0; i < n; ++i)
        px[i] = static_cast<uint16_t>(std::lround(clamp01(map.values[i]) * 65535.f));
    write_png(p, map.width, map.height, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

BinaryMask read_mask_png(const std::filesystem::path& p) {
    int w, h, ch, depth;
    std::vector<uint8_t> bytes;
    read_png(p, w, h, ch, depth, bytes);
    BinaryMask mask(w, h);
    const size_t n = mask.size();
    for (size_t i = 0; i < n; ++i) {
        float v;
        if (depth == 16)
            v = reinterpret_cast<const uint16_t*>(bytes.data())[i * ch] / 65535.f;
        else
            v = bytes[i * ch] / 255.f;
        mask.values[i] = v > 0.5f ? 1 : 0;
    }
    return mask;
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& p) {
    std::vector<uint8_t> bytes(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.values[i] ? 255 : 0;
    write_png(p, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 8, bytes);
}

void write_map_png8(const SaliencyMap& map, const std::filesystem::path& p) {
    std::vector<uint8_t> bytes(map.size());
    for (size_t i = 0; i < map.size(); ++i)
        bytes[i] = static_cast<uint8_t>(std::lround(clamp01(map.values[i]) * 255.f));
    write_png(p, map.width, map.height, PNG_COLOR_TYPE_GRAY, 8, bytes);
}

}  // namespace usps
