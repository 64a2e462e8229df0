#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abr/cross_validation.hpp"
#include "abr/metrics.hpp"
#include "abr/roc.hpp"

namespace abr {

struct MetricSummary {
    double max = 0.0;
    double mean = 0.0;
    double min = 0.0;
    double std = 0.0; ///< sample standard deviation over runs

    bool operator==(const MetricSummary&) const = default;
};

/// Per-model roll-up of repeated cross-validation runs.
struct AggregateReport {
    std::string model_name;
    std::size_t runs = 0;
    MetricSummary accuracy, gmean, precision, recall, f1;
    double auc = 0.0;   ///< on the pooled out-of-fold scores of the final run
    RocCurve roc;       ///< same scores

    const MetricSummary& summary(Metric m) const noexcept {
        switch (m) {
        case Metric::Accuracy: return accuracy;
        case Metric::Precision: return precision;
        case Metric::Recall: return recall;
        case Metric::F1: return f1;
        case Metric::GMean: break;
        }
        return gmean;
    }
    MetricSummary& summary(Metric m) noexcept {
        return const_cast<MetricSummary&>(std::as_const(*this).summary(m));
    }
};

inline MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    s.max = *std::max_element(values.begin(), values.end());
    s.min = *std::min_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.std = sample_std(values);
    return s;
}

/// Max / mean / min / sample std over run-level metrics. No rounding happens here.
inline AggregateReport aggregate(std::span<const RunResult> runs) {
    if (runs.size() < 2) throw Error("aggregate: need at least 2 runs, got " + std::to_string(runs.size()));
    AggregateReport r;
    r.model_name = runs.front().model_name;
    r.runs = runs.size();
    for (const auto& run : runs)
        if (run.model_name != r.model_name) throw Error("aggregate: runs from different models");
    for (Metric m : all_metrics) {
        std::vector<double> values;
        values.reserve(runs.size());
        for (const auto& run : runs) values.push_back(run.metrics.get(m));
        r.summary(m) = summarize(values);
    }
    const auto& last = *std::max_element(runs.begin(), runs.end(),
                                         [](const RunResult& a, const RunResult& b) { return a.run_index < b.run_index; });
    r.auc = auc(last.labels, last.scores);
    r.roc = roc_curve(last.labels, last.scores);
    return r;
}

} // namespace abr
