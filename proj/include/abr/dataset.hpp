#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "abr/error.hpp"
#include "abr/random.hpp"

namespace abr {

enum class Label : std::uint8_t { Normal = 0, Abnormal = 1 };
enum class Ear : std::uint8_t { Left = 0, Right = 1 };

inline constexpr std::array<Label, 2> all_labels{Label::Normal, Label::Abnormal};

inline std::string_view to_string(Label l) noexcept { return l == Label::Normal ? "normal" : "abnormal"; }
inline std::string_view to_string(Ear e) noexcept { return e == Ear::Left ? "left" : "right"; }

/// SVM target encoding: Abnormal is the positive class.
inline int to_sign(Label l) noexcept { return l == Label::Abnormal ? +1 : -1; }

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace detail

inline Label parse_label(std::string_view s) {
    auto v = detail::lower(detail::trim(s));
    if (v == "normal") return Label::Normal;
    if (v == "abnormal") return Label::Abnormal;
    throw Error("unknown label '" + std::string(s) + "' (expected normal or abnormal)");
}

inline Ear parse_ear(std::string_view s) {
    auto v = detail::lower(detail::trim(s));
    if (v == "left") return Ear::Left;
    if (v == "right") return Ear::Right;
    throw Error("unknown ear '" + std::string(s) + "' (expected left or right)");
}

struct SampleRecord {
    std::string sample_id;
    std::string image_path;
    Label label = Label::Normal;
    Ear ear = Ear::Left;
    std::string patient_id;

    bool operator==(const SampleRecord&) const = default;
};

class DatasetManifest {
public:
    DatasetManifest() = default;

    /// Validates uniqueness of sample ids and non-empty image paths.
    explicit DatasetManifest(std::vector<SampleRecord> samples) : samples_(std::move(samples)) {
        std::unordered_set<std::string> seen;
        for (const auto& s : samples_) {
            if (s.sample_id.empty()) throw Error("empty sample_id");
            if (s.image_path.empty()) throw Error("empty image_path for sample '" + s.sample_id + "'");
            if (!seen.insert(s.sample_id).second) throw Error("duplicate sample_id '" + s.sample_id + "'");
            ++counts_[static_cast<std::size_t>(s.label)];
        }
    }

    const std::vector<SampleRecord>& samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t count(Label l) const noexcept { return counts_[static_cast<std::size_t>(l)]; }

    std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.push_back(s.label);
        return out;
    }

    /// Both classes present; required before any training use.
    void require_both_classes() const {
        if (count(Label::Normal) == 0 || count(Label::Abnormal) == 0)
            throw Error("manifest must contain both normal and abnormal samples");
    }

private:
    std::vector<SampleRecord> samples_;
    std::array<std::size_t, 2> counts_{};
};

inline constexpr std::string_view manifest_header = "sample_id,image_path,label,ear,patient_id";

/// Parses manifest CSV text. Relative image paths are resolved against `base_dir` when given.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<SampleRecord> rows;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = detail::trim(line);
        if (line_no == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
        if (text.empty()) continue;
        if (!have_header) {
            if (detail::lower(text) != manifest_header)
                throw Error("manifest line " + std::to_string(line_no) + ": expected header '" +
                            std::string(manifest_header) + "'");
            have_header = true;
            continue;
        }
        auto fields = detail::split(text, ',');
        if (fields.size() != 5)
            throw Error("manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
        try {
            SampleRecord r;
            r.sample_id = std::string(detail::trim(fields[0]));
            std::filesystem::path img(std::string(detail::trim(fields[1])));
            if (!img.empty() && img.is_relative() && !base_dir.empty()) img = base_dir / img;
            r.image_path = img.string();
            r.label = parse_label(fields[2]);
            r.ear = parse_ear(fields[3]);
            r.patient_id = std::string(detail::trim(fields[4]));
            rows.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (rows.empty()) throw Error("no samples in manifest");
    return DatasetManifest(std::move(rows));
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path.string());
    try {
        return parse_manifest(in, path.parent_path());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stratified folds
// ---------------------------------------------------------------------------

struct FoldOptions {
    bool group_by_patient = false;
};

/// Fold index for every row of `labels`. Each class is shuffled independently
/// (Normal first, then Abnormal, from one generator seeded by `seed`) and dealt
/// round-robin; the dealing position carries over from one class to the next.
///
/// With `groups`, rows sharing a group key move together: groups are
/// stratified by their label composition and dealt the same way.
inline std::vector<std::size_t> stratified_fold_indices(std::span<const Label> labels, std::size_t k,
                                                        std::uint64_t seed,
                                                        std::span<const std::string> groups = {}) {
    if (k < 2) throw Error("stratified_kfold: k must be >= 2, got " + std::to_string(k));
    if (!groups.empty() && groups.size() != labels.size())
        throw Error("stratified_kfold: group keys do not match the number of samples");

    std::array<std::size_t, 2> n{};
    for (Label l : labels) ++n[static_cast<std::size_t>(l)];
    for (Label l : all_labels)
        if (n[static_cast<std::size_t>(l)] < k)
            throw Error("stratified_kfold: class '" + std::string(to_string(l)) + "' has " +
                        std::to_string(n[static_cast<std::size_t>(l)]) + " samples, fewer than k=" +
                        std::to_string(k));

    // units[u] lists the rows dealt together; strata order the units.
    std::vector<std::vector<std::size_t>> units;
    std::vector<std::vector<std::size_t>> strata;
    if (groups.empty()) {
        strata.resize(2);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            strata[static_cast<std::size_t>(labels[i])].push_back(units.size());
            units.push_back({i});
        }
    } else {
        std::unordered_map<std::string, std::size_t> unit_of;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto [it, fresh] = unit_of.try_emplace(groups[i], units.size());
            if (fresh) units.emplace_back();
            units[it->second].push_back(i);
        }
        if (units.size() < k)
            throw Error("stratified_kfold: " + std::to_string(units.size()) + " patient groups, fewer than k=" +
                        std::to_string(k));
        // Strata: normal-only, abnormal-only, mixed.
        strata.resize(3);
        for (std::size_t u = 0; u < units.size(); ++u) {
            bool has_n = false, has_a = false;
            for (auto row : units[u]) (labels[row] == Label::Normal ? has_n : has_a) = true;
            strata[has_n && has_a ? 2 : (has_a ? 1 : 0)].push_back(u);
        }
    }

    Rng rng(seed);
    std::vector<std::size_t> fold(labels.size(), 0);
    std::size_t offset = 0;
    for (auto& stratum : strata) {
        deterministic_shuffle(std::span(stratum), rng);
        for (std::size_t i = 0; i < stratum.size(); ++i)
            for (auto row : units[stratum[i]]) fold[row] = (offset + i) % k;
        offset = (offset + stratum.size()) % k;
    }
    return fold;
}

struct FoldAssignment {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> fold_of;
    /// Same assignment, aligned with the manifest's sample order.
    std::vector<std::size_t> fold_by_index;

    bool operator==(const FoldAssignment&) const = default;
};

inline FoldAssignment stratified_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed,
                                       FoldOptions options = {}) {
    auto labels = manifest.labels();
    std::vector<std::string> groups;
    if (options.group_by_patient) {
        groups.reserve(manifest.size());
        for (const auto& s : manifest.samples()) groups.push_back(s.patient_id);
    }
    FoldAssignment out;
    out.k = k;
    out.seed = seed;
    out.fold_by_index = stratified_fold_indices(labels, k, seed, groups);
    for (std::size_t i = 0; i < manifest.size(); ++i)
        out.fold_of.emplace(manifest.samples()[i].sample_id, out.fold_by_index[i]);
    return out;
}

} // namespace abr
