#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "fieldscout/common.hpp"

namespace fieldscout {

/// 8-bit image buffer as loaded from disk. channels is 1 (gray) or 3 (RGB).
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> pixels; // row-major, interleaved

    uint8_t at(int x, int y, int c = 0) const {
        return pixels[(size_t(y) * width + x) * channels + c];
    }
};

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(char(c));
        c = in.get();
    }
    return tok.empty() ? EOF : 0;
}

} // namespace detail

inline Image8 load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string magic, tok;
    if (detail::pgm_next_token(in, magic) == EOF || (magic != "P2" && magic != "P5"))
        throw io_error(path + ": not a PGM file");
    long dims[3];
    for (long& d : dims) {
        if (detail::pgm_next_token(in, tok) == EOF) throw io_error(path + ": truncated PGM header");
        d = std::strtol(tok.c_str(), nullptr, 10);
    }
    long w = dims[0], h = dims[1], maxval = dims[2];
    if (w <= 0 || h <= 0) throw validation_error(path + ": zero-size image");
    if (maxval <= 0 || maxval > 255) throw io_error(path + ": only 8-bit PGM supported");

    Image8 img;
    img.width = int(w);
    img.height = int(h);
    img.channels = 1;
    img.pixels.resize(size_t(w) * h);
    if (magic == "P5") {
        in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
        if (in.gcount() != std::streamsize(img.pixels.size()))
            throw io_error(path + ": truncated PGM data");
    } else {
        for (auto& px : img.pixels) {
            if (detail::pgm_next_token(in, tok) == EOF) throw io_error(path + ": truncated PGM data");
            px = uint8_t(std::strtol(tok.c_str(), nullptr, 10));
        }
    }
    return img;
}

inline void save_pgm(const std::string& path, const Image8& img) {
    if (img.channels != 1) throw validation_error("save_pgm expects a single-channel image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
}

inline Image8 load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw io_error("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw io_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw io_error(path + ": PNG decode failed");
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    color = png_get_color_type(png, info);
    int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;

    Image8 img;
    img.width = int(w);
    img.height = int(h);
    img.channels = channels;
    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw validation_error(path + ": zero-size image");
    }
    img.pixels.resize(size_t(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + size_t(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

inline void save_png(const std::string& path, const Image8& img) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw io_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw io_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw io_error(path + ": PNG encode failed");
    }
    png_init_io(png, fp);
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + size_t(y) * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline Image8 load_image(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = char(std::tolower(c));
    if (ext == "pgm") return load_pgm(path);
    if (ext == "png") return load_png(path);
    throw io_error(path + ": unsupported image format (expected .png or .pgm)");
}

/// Render a field (or any [0,1] grid) to an 8-bit grayscale image.
inline Image8 to_gray_image(const std::vector<double>& values, int width, int height) {
    Image8 img;
    img.width = width;
    img.height = height;
    img.channels = 1;
    img.pixels.resize(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        img.pixels[i] = uint8_t(std::lround(clamp01(values[i]) * 255.0));
    return img;
}

} // namespace fieldscout
