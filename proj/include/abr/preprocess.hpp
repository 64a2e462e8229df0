#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "abr/error.hpp"
#include "abr/image.hpp"
#include "abr/model_manifest.hpp"

namespace abr {

struct CropRect {
    std::size_t x = 0;
    std::size_t y = 0;
    std::size_t width = 0;
    std::size_t height = 0;

    bool operator==(const CropRect&) const = default;
};

/// Exact pixel copy of `rect`; throws when the rect leaves the image.
inline Image crop(const Image& image, const CropRect& rect) {
    if (rect.width == 0 || rect.height == 0) throw Error("crop: rect must have positive width and height");
    if (rect.x > image.width || rect.width > image.width - rect.x || rect.y > image.height ||
        rect.height > image.height - rect.y)
        throw Error("crop: rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) + " " +
                    std::to_string(rect.width) + "x" + std::to_string(rect.height) + ") exceeds image " +
                    std::to_string(image.width) + "x" + std::to_string(image.height));
    Image out(rect.width, rect.height, image.channels);
    const std::size_t row_bytes = rect.width * image.channels;
    for (std::size_t r = 0; r < rect.height; ++r) {
        auto src = image.pixels.begin() +
                   static_cast<std::ptrdiff_t>(((rect.y + r) * image.width + rect.x) * image.channels);
        std::copy(src, src + static_cast<std::ptrdiff_t>(row_bytes),
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(r * row_bytes));
    }
    return out;
}

/// Model-ready 3-channel float tensor (batch dimension implicit, always 1).
struct InputTensor {
    std::size_t height = 0;
    std::size_t width = 0;
    static constexpr std::size_t channels = 3;
    TensorLayout layout = TensorLayout::NCHW;
    std::vector<float> values;

    float& at(std::size_t c, std::size_t y, std::size_t x) { return values[index(c, y, x)]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return values[index(c, y, x)]; }

    std::size_t index(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return layout == TensorLayout::NCHW ? (c * height + y) * width + x : (y * width + x) * channels + c;
    }

    bool operator==(const InputTensor&) const = default;
};

/// One bilinear tap: source indices and the weight of the upper one.
struct ResampleTap {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double frac = 0.0;
};

/// Half-pixel-centre mapping: src = (dst + 0.5) * src_len / dst_len - 0.5,
/// clamped to [0, src_len - 1]. Equal lengths map every index onto itself with frac 0.
inline std::vector<ResampleTap> resample_taps(std::size_t src_len, std::size_t dst_len) {
    std::vector<ResampleTap> taps(dst_len);
    const double scale = static_cast<double>(src_len) / static_cast<double>(dst_len);
    const double max_pos = static_cast<double>(src_len - 1);
    for (std::size_t i = 0; i < dst_len; ++i) {
        double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
        pos = std::clamp(pos, 0.0, max_pos);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        taps[i] = {lo, std::min(lo + 1, src_len - 1), pos - static_cast<double>(lo)};
    }
    return taps;
}

/// Bilinear resize to `out_w` x `out_h`, producing unrounded pixel values in [0, 255]
/// as an interleaved 3-channel buffer. Grayscale input is replicated to 3 channels.
inline std::vector<double> resize_bilinear(const Image& image, std::size_t out_w, std::size_t out_h) {
    if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * image.channels)
        throw Error("resize: empty or malformed image");
    if (image.channels != 1 && image.channels != 3) throw Error("resize: image must have 1 or 3 channels");
    const auto xs = resample_taps(image.width, out_w);
    const auto ys = resample_taps(image.height, out_h);
    std::vector<double> out(out_w * out_h * 3);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const auto& ty = ys[oy];
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto& tx = xs[ox];
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t sc = image.channels == 1 ? 0 : c;
                const double p00 = image.at(tx.lo, ty.lo, sc), p01 = image.at(tx.hi, ty.lo, sc);
                const double p10 = image.at(tx.lo, ty.hi, sc), p11 = image.at(tx.hi, ty.hi, sc);
                const double top = (1.0 - tx.frac) * p00 + tx.frac * p01;
                const double bottom = (1.0 - tx.frac) * p10 + tx.frac * p11;
                out[(oy * out_w + ox) * 3 + c] = (1.0 - ty.frac) * top + ty.frac * bottom;
            }
        }
    }
    return out;
}

/// Resize to the manifest's input size, then value' = (value/255 - mean_c) / std_c.
inline InputTensor prepare_input(const Image& image, const ModelManifest& manifest) {
    if (manifest.input_size == 0) throw Error("prepare_input: manifest input_size is 0");
    for (double s : manifest.channel_stds)
        if (!(s > 0.0)) throw Error("prepare_input: manifest missing normalization constants");
    const std::size_t n = manifest.input_size;
    const auto plane = resize_bilinear(image, n, n);
    InputTensor t;
    t.height = n;
    t.width = n;
    t.layout = manifest.layout;
    t.values.resize(n * n * 3);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = (plane[(y * n + x) * 3 + c] / 255.0 - manifest.channel_means[c]) / manifest.channel_stds[c];
                t.at(c, y, x) = static_cast<float>(v);
            }
    return t;
}

} // namespace abr
