#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr/aggregate.hpp"
#include "abr/config.hpp"
#include "abr/cross_validation.hpp"
#include "abr/dataset.hpp"
#include "abr/feature_cache.hpp"
#include "abr/features.hpp"
#include "abr/image.hpp"
#include "abr/model_manifest.hpp"
#include "abr/parallel.hpp"
#include "abr/preprocess.hpp"
#include "abr/report.hpp"
#include "abr/version.hpp"

namespace abr {

/// decode -> per-ear crop (when configured) -> resize + normalize.
inline InputTensor preprocess_sample(const SampleRecord& s, const RunConfig& cfg, const ModelManifest& m) {
    try {
        Image img = decode_image(s.image_path);
        const auto& rect = s.ear == Ear::Left ? cfg.crop_left : cfg.crop_right;
        if (rect) img = crop(img, *rect);
        return prepare_input(img, m);
    } catch (const std::exception& e) {
        throw Error("sample '" + s.sample_id + "': " + e.what());
    }
}

/// Features for every manifest sample, in manifest order, through `model`.
inline std::vector<FeatureVector> compute_features(const RunConfig& cfg, const DatasetManifest& data,
                                                   const LoadedModel& model) {
    constexpr std::size_t chunk = 32; // bounds the number of live tensors
    std::vector<FeatureVector> out;
    out.reserve(data.size());
    const auto& samples = data.samples();
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
        const std::size_t n = std::min(chunk, samples.size() - start);
        std::vector<LabeledTensor> batch(n);
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
            const auto& s = samples[start + i];
            batch[i] = LabeledTensor{s.sample_id, preprocess_sample(s, cfg, model.manifest)};
        });
        auto vectors = extract_features(model, batch, cfg.jobs);
        std::move(vectors.begin(), vectors.end(), std::back_inserter(out));
    }
    return out;
}

inline std::filesystem::path cache_path(const RunConfig& cfg, const ModelManifest& m) {
    return cfg.cache_dir / (m.model_name + ".abrf");
}

/// Sidecar holding the weights checksum the cached vectors were computed with.
inline std::filesystem::path cache_weights_path(const RunConfig& cfg, const ModelManifest& m) {
    return cfg.cache_dir / (m.model_name + ".abrf.weights");
}

/// Extracts features and stores them in the cache; returns the vectors.
inline std::vector<FeatureVector> extract_to_cache(const RunConfig& cfg, const DatasetManifest& data,
                                                   const ModelManifest& m) {
    auto model = load_model(m, cfg.backend);
    auto vectors = compute_features(cfg, data, model);
    std::filesystem::create_directories(cfg.cache_dir);
    write_cache(vectors, cache_path(cfg, m));
    detail::write_text_atomic(cache_weights_path(cfg, m), m.weights_checksum + "\n");
    return vectors;
}

/// Cached vectors when the cache matches this model and the manifest's sample
/// order; otherwise extracts afresh and refreshes the cache.
inline std::vector<FeatureVector> obtain_features(const RunConfig& cfg, const DatasetManifest& data,
                                                  const ModelManifest& m, std::ostream& log) {
    verify_weights(m);
    const auto path = cache_path(cfg, m);
    if (std::filesystem::exists(path)) {
        try {
            std::ifstream side(cache_weights_path(cfg, m));
            std::string recorded;
            std::getline(side, recorded);
            if (recorded != m.weights_checksum) throw Error("computed with different weights");
            auto vectors = read_cache(path, m);
            bool same = vectors.size() == data.size();
            for (std::size_t i = 0; same && i < vectors.size(); ++i) same = vectors[i].sample_id == data.samples()[i].sample_id;
            if (same) {
                log << "  features: cache " << path.filename().string() << '\n';
                return vectors;
            }
            log << "  features: cache sample ids differ from manifest, re-extracting\n";
        } catch (const Error& e) {
            log << "  features: cache rejected (" << e.what() << "), re-extracting\n";
        }
    }
    log << "  features: extracting with " << to_string(cfg.backend) << " backend\n";
    return extract_to_cache(cfg, data, m);
}

/// repeats x cross_validate on one feature matrix, then the max/mean/std roll-up.
inline ModelOutcome evaluate_features(const RunConfig& cfg, const DatasetManifest& data,
                                      std::span<const FeatureVector> vectors, const std::string& model_name) {
    data.require_both_classes();
    Matrix X;
    for (const auto& v : vectors) X.push_row(v.values);
    const auto labels = data.labels();
    std::vector<std::string> groups;
    if (cfg.group_by_patient)
        for (const auto& s : data.samples()) groups.push_back(s.patient_id);

    std::vector<RunResult> runs(cfg.repeats);
    parallel_for(cfg.repeats, cfg.jobs, [&](std::size_t i) {
        runs[i] = cross_validate(X, labels, cfg.svm, cfg.k, cfg.run_seed(i), groups);
        runs[i].model_name = model_name;
        runs[i].run_index = i;
    });

    ModelOutcome o;
    o.model_name = model_name;
    o.ok = true;
    o.n_samples = X.rows();
    o.feature_dim = X.cols();
    if (runs.size() >= 2) {
        o.report = aggregate(runs);
    } else {
        // A single run has no spread; std is reported as NA.
        AggregateReport r;
        r.model_name = model_name;
        r.runs = 1;
        for (Metric k : all_metrics) {
            const double v = runs[0].metrics.get(k);
            r.summary(k) = {v, v, v, std::numeric_limits<double>::quiet_NaN()};
        }
        r.auc = auc(runs[0].labels, runs[0].scores);
        r.roc = roc_curve(runs[0].labels, runs[0].scores);
        o.report = std::move(r);
    }
    o.runs = std::move(runs);
    return o;
}

namespace detail {

inline void log_header(std::ostream& log, const RunConfig& cfg, std::string_view command) {
    log << "abr " << version << ' ' << command << '\n'
        << "config_sha256 " << cfg.config_hash << '\n'
        << "backend " << to_string(cfg.backend) << '\n'
        << "k " << cfg.k << " repeats " << cfg.repeats << " group_by_patient " << (cfg.group_by_patient ? 1 : 0) << '\n'
        << "master_seed " << cfg.master_seed << " (run i uses seed master_seed + i)\n"
        << "jobs " << cfg.jobs << '\n'
        << "svm " << svm_params_json(cfg.svm).dump() << '\n';
}

inline std::string model_label(const std::filesystem::path& manifest_path) {
    return manifest_path.stem().string();
}

} // namespace detail

/// Exit status convention shared by the subcommands.
enum ExitCode : int { exit_ok = 0, exit_partial_failure = 1, exit_config_error = 2 };

/// Feature extraction only: fills the cache for every model.
inline int run_extract(const RunConfig& cfg, std::ostream& log) {
    detail::log_header(log, cfg, "extract");
    const auto data = load_manifest(cfg.manifest_path);
    log << "samples " << data.size() << " (normal " << data.count(Label::Normal) << ", abnormal "
        << data.count(Label::Abnormal) << ")\n";
    bool failed = false;
    for (const auto& path : cfg.model_manifest_paths) {
        std::string name = detail::model_label(path);
        try {
            const auto m = load_model_manifest(path);
            name = m.model_name;
            log << "model " << name << '\n';
            auto vectors = extract_to_cache(cfg, data, m);
            log << "  wrote " << vectors.size() << " vectors to " << cache_path(cfg, m).string() << '\n';
        } catch (const std::exception& e) {
            failed = true;
            log << "model " << name << " FAILED: " << e.what() << '\n';
        }
    }
    return failed ? exit_partial_failure : exit_ok;
}

/// Full evaluation: features (cached or fresh), repeated CV, tables, ROC files,
/// results.json and run.log under output_dir.
inline int run_evaluate(const RunConfig& cfg, std::ostream& log) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ostringstream run_log;
    detail::log_header(run_log, cfg, "evaluate");

    std::vector<ModelOutcome> outcomes;
    std::optional<DatasetManifest> data;
    std::string data_error;
    try {
        data = load_manifest(cfg.manifest_path);
        run_log << "samples " << data->size() << " (normal " << data->count(Label::Normal) << ", abnormal "
                << data->count(Label::Abnormal) << ")\n";
    } catch (const std::exception& e) {
        data_error = e.what();
        run_log << "manifest FAILED: " << data_error << '\n';
    }

    for (const auto& path : cfg.model_manifest_paths) {
        ModelOutcome o;
        o.model_name = detail::model_label(path);
        try {
            if (!data) throw Error(data_error);
            const auto m = load_model_manifest(path);
            o.model_name = m.model_name;
            run_log << "model " << o.model_name << '\n';
            const auto vectors = obtain_features(cfg, *data, m, run_log);
            o = evaluate_features(cfg, *data, vectors, m.model_name);
            std::size_t non_converged = 0;
            for (const auto& r : o.runs) non_converged += r.non_converged_folds();
            run_log << "  runs " << o.runs.size() << ", non-converged folds " << non_converged << ", mean accuracy "
                    << o.report->accuracy.mean << ", auc " << o.report->auc << '\n';
        } catch (const std::exception& e) {
            o.ok = false;
            o.error = e.what();
            o.report.reset();
            o.runs.clear();
            run_log << "model " << o.model_name << " FAILED: " << o.error << '\n';
        }
        outcomes.push_back(std::move(o));
    }

    detail::write_text_atomic(cfg.output_dir / "results.json", results_to_json(cfg, outcomes).dump(2) + "\n");
    render_report(outcomes, cfg.output_dir);
    detail::write_text_atomic(cfg.output_dir / "run.log", run_log.str());
    log << run_log.str();
    const bool failed = std::ranges::any_of(outcomes, [](const ModelOutcome& o) { return !o.ok; });
    return failed ? exit_partial_failure : exit_ok;
}

/// Re-renders tables and plots from output_dir/results.json.
inline int run_report(const RunConfig& cfg, std::ostream& log) {
    const auto path = cfg.output_dir / "results.json";
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string() + " (run evaluate first)");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed results file " + path.string() + ": " + e.what());
    }
    const auto outcomes = outcomes_from_json(root);
    render_report(outcomes, cfg.output_dir);
    log << "rendered " << outcomes.size() << " model rows into " << cfg.output_dir.string() << '\n';
    const bool failed = std::ranges::any_of(outcomes, [](const ModelOutcome& o) { return !o.ok; });
    return failed ? exit_partial_failure : exit_ok;
}

} // namespace abr
