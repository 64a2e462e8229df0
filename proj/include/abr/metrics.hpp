#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abr/dataset.hpp"
#include "abr/error.hpp"

namespace abr {

struct ConfusionMatrix {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const noexcept { return tp + tn + fp + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred,
                                 Label positive = Label::Abnormal) {
    if (y_true.size() != y_pred.size())
        throw Error("confusion: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()) + ")");
    if (y_true.empty()) throw Error("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool actual = y_true[i] == positive, predicted = y_pred[i] == positive;
        if (actual && predicted) ++cm.tp;
        else if (actual) ++cm.fn;
        else if (predicted) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

enum class Metric : std::uint8_t { Accuracy, Precision, Recall, F1, GMean };

inline constexpr Metric all_metrics[] = {Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1, Metric::GMean};

inline std::string_view to_string(Metric m) noexcept {
    switch (m) {
    case Metric::Accuracy: return "accuracy";
    case Metric::Precision: return "precision";
    case Metric::Recall: return "recall";
    case Metric::F1: return "f1";
    case Metric::GMean: return "gmean";
    }
    return "?";
}

struct MetricSet {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double gmean = 0.0;
    /// Bit per Metric whose denominator was zero; such a metric is reported as 0.
    std::uint8_t degenerate = 0;

    double get(Metric m) const noexcept {
        switch (m) {
        case Metric::Accuracy: return accuracy;
        case Metric::Precision: return precision;
        case Metric::Recall: return recall;
        case Metric::F1: return f1;
        case Metric::GMean: return gmean;
        }
        return 0.0;
    }
    double& get(Metric m) noexcept {
        switch (m) {
        case Metric::Accuracy: return accuracy;
        case Metric::Precision: return precision;
        case Metric::Recall: return recall;
        case Metric::F1: return f1;
        case Metric::GMean: break;
        }
        return gmean;
    }
    bool is_degenerate(Metric m) const noexcept { return (degenerate >> static_cast<unsigned>(m)) & 1u; }
    void flag(Metric m) noexcept { degenerate |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(m)); }

    bool operator==(const MetricSet&) const = default;
};

/// accuracy = (tp+tn)/N, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// f1 = 2tp/(2tp+fp+fn), gmean = sqrt(recall * specificity) with
/// specificity = tn/(tn+fp).
inline MetricSet compute_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("compute_metrics: empty confusion matrix");
    MetricSet m;
    auto ratio = [&](std::size_t num, std::size_t den, Metric which) {
        if (den == 0) {
            m.flag(which);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(cm.tp + cm.tn, cm.total(), Metric::Accuracy);
    m.precision = ratio(cm.tp, cm.tp + cm.fp, Metric::Precision);
    m.recall = ratio(cm.tp, cm.tp + cm.fn, Metric::Recall);
    m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, Metric::F1);
    if (cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0) {
        m.flag(Metric::GMean);
        m.gmean = 0.0;
    } else {
        const double specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
        m.gmean = std::sqrt(m.recall * specificity);
    }
    return m;
}

/// Unweighted mean of each metric; degenerate flags are OR-ed.
inline MetricSet mean_metrics(std::span<const MetricSet> sets) {
    if (sets.empty()) throw Error("mean_metrics: no metric sets");
    MetricSet out;
    for (Metric k : all_metrics) {
        double sum = 0.0;
        for (const auto& s : sets) sum += s.get(k);
        out.get(k) = sum / static_cast<double>(sets.size());
    }
    for (const auto& s : sets) out.degenerate |= s.degenerate;
    return out;
}

/// Sample standard deviation, sqrt(sum (x - mean)^2 / (w - 1)).
inline double sample_std(std::span<const double> values) {
    if (values.size() < 2) throw Error("sample_std: need at least 2 values, got " + std::to_string(values.size()));
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

} // namespace abr
