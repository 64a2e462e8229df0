#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "abr/checksum.hpp"
#include "abr/error.hpp"
#include "abr/features.hpp"

namespace abr {

// Little-endian byte packing shared by the binary file formats.
namespace binio {

class Writer {
public:
    void bytes(std::string_view s) {
        for (char c : s) buf_.push_back(std::byte(static_cast<unsigned char>(c)));
    }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    /// Appends FNV-1a of everything written so far; returns it.
    std::uint64_t seal() {
        auto h = fnv1a64(buf_);
        u64(h);
        return h;
    }
    const std::vector<std::byte>& data() const noexcept { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(std::byte((v >> (8 * i)) & 0xFF));
    }
    std::vector<std::byte> buf_;
};

class Reader {
public:
    Reader(std::span<const std::byte> data, std::string what) : data_(data), what_(std::move(what)) {}

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() { return bytes(u32()); }
    std::string line() {
        std::string s;
        for (;;) {
            need(1);
            char c = static_cast<char>(data_[pos_++]);
            if (c == '\n') return s;
            s.push_back(c);
        }
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw Error(what_ + ": unexpected end of data");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> data) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!out) throw Error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Splits off and verifies the trailing FNV-1a checksum.
inline std::span<const std::byte> verified_body(std::span<const std::byte> data, const std::string& what) {
    if (data.size() < 8) throw ChecksumError(what + ": file too short to carry a checksum");
    auto body = data.first(data.size() - 8);
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(data[body.size() + i]) << (8 * i);
    if (fnv1a64(body) != stored) throw ChecksumError(what + ": checksum mismatch (corrupted or truncated file)");
    return body;
}

} // namespace binio

inline constexpr std::string_view feature_cache_magic = "ABRF1";

/// Serializes `vectors` (all from one model, same length). Layout: magic
/// `ABRF1`, header line `model_name,feature_dim,count\n`, then per record a
/// u32-length-prefixed sample_id and feature_dim f64 values, then the u64
/// FNV-1a checksum of all preceding bytes. Everything little-endian.
inline std::vector<std::byte> encode_feature_cache(std::span<const FeatureVector> vectors, std::uint64_t* checksum = nullptr) {
    if (vectors.empty()) throw Error("write_cache: no feature vectors");
    const auto& model = vectors.front().model_name;
    const auto dim = vectors.front().values.size();
    binio::Writer w;
    w.bytes(feature_cache_magic);
    w.bytes(model + "," + std::to_string(dim) + "," + std::to_string(vectors.size()) + "\n");
    for (const auto& v : vectors) {
        if (v.model_name != model || v.values.size() != dim)
            throw Error("write_cache: vectors disagree on model or dimension (sample '" + v.sample_id + "')");
        w.str(v.sample_id);
        for (double x : v.values) w.f64(x);
    }
    auto h = w.seal();
    if (checksum) *checksum = h;
    return w.data();
}

inline std::vector<FeatureVector> decode_feature_cache(std::span<const std::byte> data, const std::string& what) {
    auto body = binio::verified_body(data, what);
    binio::Reader r(body, what);
    if (r.bytes(feature_cache_magic.size()) != feature_cache_magic) throw Error(what + ": not a feature cache");
    auto header = r.line();
    auto fields = detail::split(header, ',');
    if (fields.size() != 3) throw Error(what + ": malformed header '" + header + "'");
    std::string model(fields[0]);
    std::size_t dim = 0, count = 0;
    try {
        dim = std::stoul(std::string(fields[1]));
        count = std::stoul(std::string(fields[2]));
    } catch (const std::exception&) {
        throw Error(what + ": malformed header '" + header + "'");
    }
    std::vector<FeatureVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        FeatureVector v{r.str(), model, std::vector<double>(dim)};
        for (auto& x : v.values) x = r.f64();
        out.push_back(std::move(v));
    }
    if (r.remaining() != 0) throw Error(what + ": trailing bytes after records");
    return out;
}

/// Atomically writes the cache file; returns its checksum.
inline std::uint64_t write_cache(std::span<const FeatureVector> vectors, const std::filesystem::path& path) {
    std::uint64_t h = 0;
    auto bytes = encode_feature_cache(vectors, &h);
    binio::write_file_atomic(path, bytes);
    return h;
}

inline std::vector<FeatureVector> read_cache(const std::filesystem::path& path) {
    return decode_feature_cache(binio::read_file(path), path.string());
}

/// read_cache() plus a guard that the file belongs to `manifest`.
inline std::vector<FeatureVector> read_cache(const std::filesystem::path& path, const ModelManifest& manifest) {
    auto vectors = read_cache(path);
    for (const auto& v : vectors)
        if (v.model_name != manifest.model_name || v.values.size() != manifest.feature_dim)
            throw Error(path.string() + ": cache holds " + v.model_name + "/" + std::to_string(v.values.size()) +
                        ", requested " + manifest.model_name + "/" + std::to_string(manifest.feature_dim));
    return vectors;
}

} // namespace abr
