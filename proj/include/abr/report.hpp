#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr/aggregate.hpp"
#include "abr/config.hpp"
#include "abr/cross_validation.hpp"
#include "abr/feature_cache.hpp"
#include "abr/version.hpp"

namespace abr {

/// Outcome of one model column: either a full aggregate or a recorded failure.
struct ModelOutcome {
    std::string model_name;
    bool ok = false;
    std::string error;
    std::size_t n_samples = 0;
    std::size_t feature_dim = 0;
    std::optional<AggregateReport> report;
    std::vector<RunResult> runs; ///< empty when loaded back from results.json
};

/// The four table columns, in order.
inline constexpr Metric table_metrics[] = {Metric::Accuracy, Metric::GMean, Metric::Precision, Metric::Recall};
inline constexpr const char* table_metric_labels[] = {"Accuracy", "GM", "Precision", "Recall"};

namespace detail {

inline std::string fmt(const char* spec, double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

inline std::vector<std::string> degenerate_names(const MetricSet& m) {
    std::vector<std::string> out;
    for (Metric k : all_metrics)
        if (m.is_degenerate(k)) out.emplace_back(to_string(k));
    return out;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    binio::write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

} // namespace detail

inline nlohmann::json svm_params_json(const SvmParams& p) {
    nlohmann::json j;
    j["C"] = p.C;
    j["kernel"] = std::string(to_string(p.kernel));
    j["gamma"] = p.gamma ? nlohmann::json(*p.gamma) : nlohmann::json("scale");
    j["tolerance"] = p.tolerance;
    j["max_passes"] = p.max_passes ? nlohmann::json(*p.max_passes) : nlohmann::json("10n");
    j["class_weighting"] = std::string(to_string(p.class_weighting));
    j["standardize"] = p.standardize;
    return j;
}

/// Machine-readable results. Holds only values fixed by the config and inputs,
/// so identical runs give identical bytes.
inline nlohmann::json results_to_json(const RunConfig& cfg, std::span<const ModelOutcome> outcomes) {
    using nlohmann::json;
    json root;
    root["software_version"] = version;
    root["config_sha256"] = cfg.config_hash;
    root["backend"] = std::string(to_string(cfg.backend));
    root["k"] = cfg.k;
    root["repeats"] = cfg.repeats;
    root["master_seed"] = cfg.master_seed;
    root["group_by_patient"] = cfg.group_by_patient;
    root["svm"] = svm_params_json(cfg.svm);
    json models = json::array();
    for (const auto& o : outcomes) {
        json m;
        m["model_name"] = o.model_name;
        m["status"] = o.ok ? "ok" : "failed";
        if (!o.ok) {
            m["error"] = o.error;
            models.push_back(std::move(m));
            continue;
        }
        m["n_samples"] = o.n_samples;
        m["feature_dim"] = o.feature_dim;
        const auto& r = *o.report;
        json summary;
        for (Metric k : all_metrics) {
            const auto& s = r.summary(k);
            summary[std::string(to_string(k))] = {{"max", s.max},
                                                  {"mean", s.mean},
                                                  {"min", s.min},
                                                  {"std", detail::number_or_null(s.std)}};
        }
        m["summary"] = std::move(summary);
        m["auc"] = r.auc;
        json roc = json::array();
        for (const auto& p : r.roc.points) roc.push_back({detail::number_or_null(p.threshold), p.fpr, p.tpr});
        m["roc"] = std::move(roc);
        json runs = json::array();
        for (const auto& run : o.runs) {
            json jr;
            jr["run_index"] = run.run_index;
            jr["seed"] = run.seed;
            for (Metric k : all_metrics) jr[std::string(to_string(k))] = run.metrics.get(k);
            jr["degenerate"] = detail::degenerate_names(run.metrics);
            jr["non_converged_folds"] = run.non_converged_folds();
            double worst = 0.0;
            for (const auto& f : run.folds) worst = std::max(worst, f.kkt_violation);
            jr["max_kkt_violation"] = worst;
            runs.push_back(std::move(jr));
        }
        m["runs"] = std::move(runs);
        models.push_back(std::move(m));
    }
    root["models"] = std::move(models);
    return root;
}

/// Rebuilds the per-model aggregates (not the per-run details) from results.json.
inline std::vector<ModelOutcome> outcomes_from_json(const nlohmann::json& root) {
    std::vector<ModelOutcome> out;
    try {
        for (const auto& m : root.at("models")) {
            ModelOutcome o;
            o.model_name = m.at("model_name").get<std::string>();
            o.ok = m.at("status").get<std::string>() == "ok";
            if (!o.ok) {
                o.error = m.value("error", std::string("unknown error"));
                out.push_back(std::move(o));
                continue;
            }
            o.n_samples = m.at("n_samples").get<std::size_t>();
            o.feature_dim = m.at("feature_dim").get<std::size_t>();
            AggregateReport r;
            r.model_name = o.model_name;
            r.runs = m.at("runs").size();
            for (Metric k : all_metrics) {
                const auto& s = m.at("summary").at(std::string(to_string(k)));
                r.summary(k) = {s.at("max").get<double>(), s.at("mean").get<double>(), s.at("min").get<double>(),
                                detail::number_or_nan(s.at("std"))};
            }
            r.auc = m.at("auc").get<double>();
            for (const auto& p : m.at("roc")) {
                double thr = p.at(0).is_null() ? std::numeric_limits<double>::infinity() : p.at(0).get<double>();
                r.roc.points.push_back({thr, p.at(1).get<double>(), p.at(2).get<double>()});
            }
            o.report = std::move(r);
            out.push_back(std::move(o));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed results file: ") + e.what());
    }
    return out;
}

/// One table: "Models,<Prefix> Accuracy,<Prefix> GM,..." with percent or fraction values.
inline std::string render_table(std::span<const ModelOutcome> outcomes, const std::string& prefix,
                                double MetricSummary::*field, bool percent) {
    std::string out = "Models";
    for (const char* label : table_metric_labels) out += "," + prefix + " " + label + (percent ? " (%)" : "");
    out += "\n";
    for (const auto& o : outcomes) {
        out += o.model_name;
        for (Metric k : table_metrics) {
            out += ",";
            if (!o.ok) {
                out += "NA";
                continue;
            }
            const double v = o.report->summary(k).*field;
            out += percent ? detail::fmt("%.2f", 100.0 * v) : detail::fmt("%.4f", v);
        }
        out += "\n";
    }
    return out;
}

inline std::string render_roc_csv(const RocCurve& curve) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : curve.points)
        out += detail::fmt("%.17g", p.threshold) + "," + detail::fmt("%.17g", p.fpr) + "," + detail::fmt("%.17g", p.tpr) + "\n";
    return out;
}

/// ROC curves of all successful models as a standalone SVG.
inline std::string render_roc_svg(std::span<const ModelOutcome> outcomes) {
    static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                              "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
    constexpr double x0 = 60, y0 = 40, side = 400;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"500\" font-family=\"sans-serif\" "
                    "font-size=\"12\">\n";
    s += "<rect x=\"60\" y=\"40\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<line x1=\"60\" y1=\"440\" x2=\"460\" y2=\"40\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = t / 5.0;
        s += "<text x=\"" + detail::fmt("%.1f", x0 + v * side) + "\" y=\"458\" text-anchor=\"middle\">" +
             detail::fmt("%.1f", v) + "</text>\n";
        s += "<text x=\"52\" y=\"" + detail::fmt("%.1f", y0 + side - v * side + 4) + "\" text-anchor=\"end\">" +
             detail::fmt("%.1f", v) + "</text>\n";
    }
    s += "<text x=\"260\" y=\"485\" text-anchor=\"middle\">False positive rate</text>\n";
    s += "<text x=\"18\" y=\"240\" text-anchor=\"middle\" transform=\"rotate(-90 18 240)\">True positive rate</text>\n";
    std::size_t idx = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) continue;
        const char* color = palette[idx % std::size(palette)];
        s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(color) + "\" points=\"";
        for (const auto& p : o.report->roc.points)
            s += detail::fmt("%.2f", x0 + p.fpr * side) + "," + detail::fmt("%.2f", y0 + side - p.tpr * side) + " ";
        s += "\"/>\n";
        const double ly = y0 + 10 + 18.0 * static_cast<double>(idx);
        s += "<rect x=\"480\" y=\"" + detail::fmt("%.1f", ly) + "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
        s += "<text x=\"498\" y=\"" + detail::fmt("%.1f", ly + 10) + "\">" + o.model_name +
             " (AUC " + detail::fmt("%.3f", o.report->auc) + ")</text>\n";
        ++idx;
    }
    s += "</svg>\n";
    return s;
}

/// Writes table_max.csv, table_mean.csv, table_std.csv, auc.csv, roc_<model>.csv and roc.svg.
inline void render_report(std::span<const ModelOutcome> outcomes, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_text_atomic(dir / "table_max.csv", render_table(outcomes, "Max", &MetricSummary::max, true));
    detail::write_text_atomic(dir / "table_mean.csv", render_table(outcomes, "Mean", &MetricSummary::mean, true));
    detail::write_text_atomic(dir / "table_std.csv", render_table(outcomes, "Std", &MetricSummary::std, false));
    std::string auc_csv = "Models,AUC\n";
    for (const auto& o : outcomes) {
        auc_csv += o.model_name + "," + (o.ok ? detail::fmt("%.4f", o.report->auc) : std::string("NA")) + "\n";
        if (o.ok) detail::write_text_atomic(dir / ("roc_" + o.model_name + ".csv"), render_roc_csv(o.report->roc));
    }
    detail::write_text_atomic(dir / "auc.csv", auc_csv);
    detail::write_text_atomic(dir / "roc.svg", render_roc_svg(outcomes));
}

} // namespace abr
