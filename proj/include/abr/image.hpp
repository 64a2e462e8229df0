#pragma once

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "abr/error.hpp"

namespace abr {

/// Decoded 8-bit raster, interleaved row-major. channels is 1 (gray) or 3 (RGB).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

    bool operator==(const Image&) const = default;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw Error("cannot open image file: " + path.string());
    return f;
}

// Binary PPM (P6) / PGM (P5), maxval <= 255.
inline Image decode_pnm(std::istream& in, const std::string& name) {
    auto next_token = [&]() {
        std::string tok;
        int ch;
        while ((ch = in.get()) != EOF) {
            if (ch == '#') {
                while ((ch = in.get()) != EOF && ch != '\n') {}
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        return tok;
    };
    std::string magic = next_token();
    std::size_t channels = magic == "P6" ? 3 : magic == "P5" ? 1 : 0;
    if (channels == 0) throw Error("undecodable image (unsupported PNM variant): " + name);
    try {
        std::size_t w = std::stoul(next_token());
        std::size_t h = std::stoul(next_token());
        unsigned long maxval = std::stoul(next_token());
        if (w == 0 || h == 0 || maxval == 0 || maxval > 255) throw Error("bad PNM header");
        Image img(w, h, channels);
        in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
        if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) throw Error("truncated PNM data");
        return img;
    } catch (const std::exception& e) {
        throw Error("undecodable image (" + std::string(e.what()) + "): " + name);
    }
}

inline Image decode_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw Error("undecodable image (" + std::string(image.message) + "): " + path.string());
    image.format = PNG_FORMAT_RGB;
    Image img(image.width, image.height, 3);
    if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw Error("undecodable image (" + msg + "): " + path.string());
    }
    return img;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

// Only trivially destructible locals live across setjmp; the raster is malloc'd
// and released on the error path.
inline bool decode_jpeg_raw(std::FILE* file, JpegErrorManager& err, unsigned char** out, std::size_t* width,
                            std::size_t* height, std::size_t* channels) {
    jpeg_decompress_struct cinfo{};
    unsigned char* volatile buffer = nullptr;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = [](j_common_ptr c) {
        auto* e = reinterpret_cast<JpegErrorManager*>(c->err);
        (*c->err->format_message)(c, e->message);
        std::longjmp(e->jump, 1);
    };
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::free(buffer);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t w = cinfo.output_width, h = cinfo.output_height;
    const auto c = static_cast<std::size_t>(cinfo.output_components);
    buffer = static_cast<unsigned char*>(std::malloc(w * h * c));
    if (!buffer) {
        jpeg_destroy_decompress(&cinfo);
        std::snprintf(err.message, sizeof(err.message), "out of memory");
        return false;
    }
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = buffer + static_cast<std::size_t>(cinfo.output_scanline) * w * c;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    *out = buffer;
    *width = w;
    *height = h;
    *channels = c;
    return true;
}

inline Image decode_jpeg(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    JpegErrorManager err{};
    unsigned char* raw = nullptr;
    std::size_t w = 0, h = 0, c = 0;
    if (!decode_jpeg_raw(file.get(), err, &raw, &w, &h, &c))
        throw Error("undecodable image (" + std::string(err.message) + "): " + path.string());
    std::unique_ptr<unsigned char, decltype(&std::free)> owned(raw, &std::free);
    Image img(w, h, c);
    std::copy(raw, raw + img.pixels.size(), img.pixels.begin());
    return img;
}

} // namespace detail

/// Decodes PNG, JPEG or binary PPM/PGM, sniffing the format from the leading bytes.
inline Image decode_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image file: " + path.string());
    unsigned char head[8] = {};
    in.read(reinterpret_cast<char*>(head), sizeof(head));
    auto got = in.gcount();
    if (got >= 8 && png_sig_cmp(head, 0, 8) == 0) return detail::decode_png(path);
    if (got >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) return detail::decode_jpeg(path);
    if (got >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
        in.clear();
        in.seekg(0);
        return detail::decode_pnm(in, path.string());
    }
    throw Error("undecodable image (unknown format): " + path.string());
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3) throw Error("write_ppm: channels must be 1 or 3");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image: " + path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw Error("short write: " + path.string());
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3) throw Error("write_png: channels must be 1 or 3");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
        throw Error("cannot write png (" + std::string(image.message) + "): " + path.string());
}

} // namespace abr
