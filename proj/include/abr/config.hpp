#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr/backend.hpp"
#include "abr/checksum.hpp"
#include "abr/error.hpp"
#include "abr/parallel.hpp"
#include "abr/preprocess.hpp"
#include "abr/svm.hpp"

namespace abr {

/// Everything one experiment needs. Paths are absolute or relative to the
/// working directory after parsing (config-relative paths are resolved).
struct RunConfig {
    std::filesystem::path manifest_path;
    std::vector<std::filesystem::path> model_manifest_paths;
    std::optional<CropRect> crop_left;
    std::optional<CropRect> crop_right;
    std::size_t k = 5;
    std::size_t repeats = 100;
    std::uint64_t master_seed = 0;
    SvmParams svm;
    std::filesystem::path cache_dir;
    std::filesystem::path output_dir;
    BackendKind backend = BackendKind::Interchange;
    std::size_t jobs = default_jobs();
    bool group_by_patient = false;
    std::string config_hash; ///< SHA-256 of the config file bytes

    /// Seed of repeat i.
    std::uint64_t run_seed(std::size_t i) const noexcept { return master_seed + i; }
};

inline BackendKind parse_backend(const std::string& name) {
    if (name == "mock") return BackendKind::Mock;
    if (name == "interchange") return BackendKind::Interchange;
    throw ConfigError("unknown backend '" + name + "' (valid: interchange, mock)");
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": key '" + key + "' has the wrong type");
    }
}

inline std::size_t get_count(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + ": key '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

inline CropRect parse_crop(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object with x, y, width, height");
    reject_unknown_keys(obj, {"x", "y", "width", "height"}, where);
    for (const char* key : {"x", "y", "width", "height"})
        if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + std::string(key) + "'");
    CropRect r{get_count(obj, "x", where), get_count(obj, "y", where), get_count(obj, "width", where),
               get_count(obj, "height", where)};
    if (r.width == 0 || r.height == 0) throw ConfigError(where + ": width and height must be positive");
    return r;
}

inline SvmParams parse_svm(const json& obj) {
    const std::string where = "svm";
    if (!obj.is_object()) throw ConfigError("svm must be an object");
    reject_unknown_keys(obj, {"C", "kernel", "gamma", "tolerance", "max_passes", "class_weighting", "standardize"}, where);
    SvmParams p;
    if (obj.contains("C")) p.C = get_as<double>(obj, "C", where);
    if (obj.contains("kernel")) {
        auto k = get_as<std::string>(obj, "kernel", where);
        if (k == "rbf") p.kernel = KernelKind::Rbf;
        else if (k == "linear") p.kernel = KernelKind::Linear;
        else throw ConfigError("svm: unknown kernel '" + k + "' (valid: rbf, linear)");
    }
    if (obj.contains("gamma")) {
        const auto& g = obj.at("gamma");
        if (g.is_string() && g.get<std::string>() == "scale") p.gamma.reset();
        else if (g.is_number()) p.gamma = g.get<double>();
        else throw ConfigError("svm: gamma must be a positive number or \"scale\"");
    }
    if (obj.contains("tolerance")) p.tolerance = get_as<double>(obj, "tolerance", where);
    if (obj.contains("max_passes")) p.max_passes = get_count(obj, "max_passes", where);
    if (obj.contains("class_weighting")) {
        auto w = get_as<std::string>(obj, "class_weighting", where);
        if (w == "off") p.class_weighting = ClassWeighting::Off;
        else if (w == "balanced") p.class_weighting = ClassWeighting::Balanced;
        else throw ConfigError("svm: unknown class_weighting '" + w + "' (valid: off, balanced)");
    }
    if (obj.contains("standardize")) p.standardize = get_as<bool>(obj, "standardize", where);
    try {
        p.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return p;
}

} // namespace detail

/// Parses JSON config text. `base_dir` anchors relative paths.
inline RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(root,
                                {"manifest", "models", "output_dir", "cache_dir", "k", "repeats", "seed", "backend",
                                 "jobs", "group_by_patient", "crop", "svm"},
                                "config");
    for (const char* key : {"manifest", "models", "output_dir"})
        if (!root.contains(key)) throw ConfigError("config: missing required key '" + std::string(key) + "'");

    auto resolve = [&](const std::filesystem::path& p) { return p.is_relative() ? base_dir / p : p; };
    RunConfig c;
    c.manifest_path = resolve(detail::get_as<std::string>(root, "manifest", "config"));
    const auto& models = root.at("models");
    if (models.is_string()) {
        c.model_manifest_paths.push_back(resolve(models.get<std::string>()));
    } else if (models.is_array() && !models.empty()) {
        for (const auto& m : models) {
            if (!m.is_string()) throw ConfigError("config: 'models' entries must be paths");
            c.model_manifest_paths.push_back(resolve(m.get<std::string>()));
        }
    } else {
        throw ConfigError("config: 'models' must be a path or a non-empty list of paths");
    }
    c.output_dir = resolve(detail::get_as<std::string>(root, "output_dir", "config"));
    c.cache_dir = root.contains("cache_dir") ? resolve(detail::get_as<std::string>(root, "cache_dir", "config"))
                                             : c.output_dir / "cache";
    if (root.contains("k")) c.k = detail::get_count(root, "k", "config");
    if (root.contains("repeats")) c.repeats = detail::get_count(root, "repeats", "config");
    if (root.contains("seed")) c.master_seed = detail::get_as<std::uint64_t>(root, "seed", "config");
    if (root.contains("backend")) c.backend = parse_backend(detail::get_as<std::string>(root, "backend", "config"));
    if (root.contains("jobs")) {
        auto j = detail::get_count(root, "jobs", "config");
        c.jobs = j == 0 ? default_jobs() : j;
    }
    if (root.contains("group_by_patient")) c.group_by_patient = detail::get_as<bool>(root, "group_by_patient", "config");
    if (root.contains("crop")) {
        const auto& crop = root.at("crop");
        if (!crop.is_object()) throw ConfigError("config: 'crop' must be an object with 'left'/'right'");
        detail::reject_unknown_keys(crop, {"left", "right"}, "crop");
        if (crop.contains("left")) c.crop_left = detail::parse_crop(crop.at("left"), "crop.left");
        if (crop.contains("right")) c.crop_right = detail::parse_crop(crop.at("right"), "crop.right");
    }
    if (root.contains("svm")) c.svm = detail::parse_svm(root.at("svm"));
    if (c.k < 2) throw ConfigError("config: k must be >= 2, got " + std::to_string(c.k));
    if (c.repeats < 1) throw ConfigError("config: repeats must be >= 1");
    c.config_hash = sha256_hex(text);
    return c;
}

/// Checks bounds (again, after CLI overrides) and that input files exist.
inline void validate_config(const RunConfig& c) {
    if (c.k < 2) throw ConfigError("config: k must be >= 2, got " + std::to_string(c.k));
    if (c.repeats < 1) throw ConfigError("config: repeats must be >= 1");
    if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (!std::filesystem::is_regular_file(c.manifest_path))
        throw ConfigError("config: manifest not readable: " + c.manifest_path.string());
    for (const auto& m : c.model_manifest_paths)
        if (!std::filesystem::is_regular_file(m)) throw ConfigError("config: model manifest not readable: " + m.string());
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    auto c = parse_config_text(text.str(), path.parent_path());
    validate_config(c);
    return c;
}

} // namespace abr
