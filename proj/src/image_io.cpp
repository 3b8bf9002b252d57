#include "uda/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "uda/common.hpp"

namespace uda::io {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Decodes any 8-bit PNG into packed RGB or gray rows.
std::vector<std::uint8_t> read_rows(const std::string& path, int& h, int& w, int& channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG for reading: " + path);

    PngRead ctx;
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw DataError("libpng read init failed: " + path);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw DataError("libpng info init failed: " + path);
    if (setjmp(png_jmpbuf(ctx.png))) throw DataError("PNG decode failed: " + path);

    png_init_io(ctx.png, fp.get());
    png_read_info(ctx.png, ctx.info);

    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(ctx.png, ctx.info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (bit_depth == 16) png_set_strip_16(ctx.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    channels = png_get_channels(ctx.png, ctx.info);
    h = static_cast<int>(height);
    w = static_cast<int>(width);

    std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * channels);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);
    return buf;
}

void write_rows(const std::string& path, const std::uint8_t* pixels, int h, int w, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open PNG for writing: " + path);

    PngWrite ctx;
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw DataError("libpng write init failed: " + path);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw DataError("libpng info init failed: " + path);
    if (setjmp(png_jmpbuf(ctx.png))) throw DataError("PNG encode failed: " + path);

    png_init_io(ctx.png, fp.get());
    int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(ctx.png, ctx.info, w, h, 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * w * channels);
    png_write_image(ctx.png, rows.data());
    png_write_end(ctx.png, nullptr);
}

}  // namespace

Tensor read_image_png(const std::string& path) {
    int h = 0, w = 0, channels = 0;
    auto rows = read_rows(path, h, w, channels);
    if (channels != 1 && channels != 3)
        throw DataError("unsupported PNG channel count " + std::to_string(channels) + ": " + path);

    Tensor img(3, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* px = rows.data() + (static_cast<std::size_t>(y) * w + x) * channels;
            for (int c = 0; c < 3; ++c) {
                std::uint8_t v = channels == 1 ? px[0] : px[c];
                img.at(c, y, x) = v / 255.0;
            }
        }
    }
    return img;
}

void write_image_png(const std::string& path, const Tensor& img) {
    if (img.c != 3) throw DataError("write_image_png expects a 3-channel tensor");
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = img.at(c, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                rows[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    write_rows(path, rows.data(), img.h, img.w, 3);
}

GrayRaster read_gray_png(const std::string& path) {
    int h = 0, w = 0, channels = 0;
    auto rows = read_rows(path, h, w, channels);
    if (channels != 1)
        throw DataError("label PNG must be single-channel 8-bit: " + path);
    GrayRaster r;
    r.h = h;
    r.w = w;
    r.pixels = std::move(rows);
    return r;
}

void write_gray_png(const std::string& path, const GrayRaster& raster) {
    write_rows(path, raster.pixels.data(), raster.h, raster.w, 1);
}

}  // namespace uda::io
