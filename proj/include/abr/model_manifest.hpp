#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "abr/dataset.hpp"
#include "abr/error.hpp"

namespace abr {

enum class TensorLayout : std::uint8_t { NCHW, NHWC };

inline std::string_view to_string(TensorLayout l) noexcept { return l == TensorLayout::NCHW ? "nchw" : "nhwc"; }

/// Metadata binding an exported network to its input contract and feature tap.
struct ModelManifest {
    std::string model_name;
    std::string weights_path;
    std::string weights_checksum; ///< lowercase SHA-256 hex of the weights file
    std::size_t input_size = 0;   ///< square input edge, pixels
    std::array<double, 3> channel_means{};
    std::array<double, 3> channel_stds{};
    std::string feature_output_name;
    std::size_t feature_dim = 0;
    TensorLayout layout = TensorLayout::NCHW;

    bool operator==(const ModelManifest&) const = default;
};

namespace detail {

inline std::array<double, 3> parse_triple(std::string_view key, std::string_view value) {
    auto parts = split(value, ',');
    if (parts.size() != 3) throw Error("model manifest: '" + std::string(key) + "' needs 3 comma-separated values");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            std::size_t used = 0;
            std::string tok(trim(parts[i]));
            out[i] = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error("model manifest: bad number in '" + std::string(key) + "'");
        }
    }
    return out;
}

inline std::size_t parse_count(std::string_view key, std::string_view value) {
    std::string tok(trim(value));
    try {
        std::size_t used = 0;
        long long v = std::stoll(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw Error("model manifest: '" + std::string(key) + "' must be a positive integer, got '" + tok + "'");
    }
}

} // namespace detail

/// Parses `key = value` lines ('#' starts a comment). Relative weights paths
/// resolve against `base_dir`.
inline ModelManifest parse_model_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
    std::map<std::string, std::string, std::less<>> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = detail::trim(std::string_view(line).substr(0, line.find('#')));
        if (text.empty()) continue;
        auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw Error("model manifest line " + std::to_string(line_no) + ": expected key = value");
        kv[std::string(detail::trim(text.substr(0, eq)))] = std::string(detail::trim(text.substr(eq + 1)));
    }
    auto require = [&](std::string_view key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end() || it->second.empty()) throw Error("model manifest: missing key '" + std::string(key) + "'");
        return it->second;
    };

    ModelManifest m;
    m.model_name = require("model_name");
    if (m.model_name.find_first_of(",\n/\\") != std::string::npos)
        throw Error("model manifest: model_name may not contain ',', '/', '\\\\' or newlines");
    std::filesystem::path w(require("weights_path"));
    if (w.is_relative() && !base_dir.empty()) w = base_dir / w;
    m.weights_path = w.string();
    m.weights_checksum = detail::lower(require("weights_checksum"));
    m.input_size = detail::parse_count("input_size", require("input_size"));
    if (!kv.contains("channel_means") || !kv.contains("channel_stds"))
        throw Error("model manifest: missing normalization constants (channel_means, channel_stds)");
    m.channel_means = detail::parse_triple("channel_means", kv["channel_means"]);
    m.channel_stds = detail::parse_triple("channel_stds", kv["channel_stds"]);
    for (double s : m.channel_stds)
        if (!(s > 0.0)) throw Error("model manifest: channel_stds must be positive");
    m.feature_output_name = require("feature_output_name");
    m.feature_dim = detail::parse_count("feature_dim", require("feature_dim"));
    if (auto it = kv.find("layout"); it != kv.end()) {
        auto v = detail::lower(it->second);
        if (v == "nchw") m.layout = TensorLayout::NCHW;
        else if (v == "nhwc") m.layout = TensorLayout::NHWC;
        else throw Error("model manifest: layout must be nchw or nhwc, got '" + it->second + "'");
    }
    return m;
}

inline ModelManifest load_model_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model manifest: " + path.string());
    try {
        return parse_model_manifest(in, path.parent_path());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline void write_model_manifest(const ModelManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model manifest: " + path.string());
    out.precision(17);
    auto triple = [&](const std::array<double, 3>& v) { out << v[0] << ',' << v[1] << ',' << v[2] << '\n'; };
    out << "model_name = " << m.model_name << '\n'
        << "weights_path = " << m.weights_path << '\n'
        << "weights_checksum = " << m.weights_checksum << '\n'
        << "input_size = " << m.input_size << '\n'
        << "channel_means = ";
    triple(m.channel_means);
    out << "channel_stds = ";
    triple(m.channel_stds);
    out << "feature_output_name = " << m.feature_output_name << '\n'
        << "feature_dim = " << m.feature_dim << '\n'
        << "layout = " << to_string(m.layout) << '\n';
}

} // namespace abr
