#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "abr/dataset.hpp"
#include "abr/error.hpp"

namespace abr {

struct RocPoint {
    double threshold = 0.0; ///< scores >= threshold are called positive
    double fpr = 0.0;
    double tpr = 0.0;

    bool operator==(const RocPoint&) const = default;
};

/// Points from a descending threshold sweep, starting at (0,0) with an
/// infinite threshold and ending at (1,1). Tied scores form one step.
struct RocCurve {
    std::vector<RocPoint> points;
};

namespace detail {

inline void check_scored(std::span<const Label> y, std::span<const double> scores, Label positive, std::size_t& n_pos,
                         std::size_t& n_neg) {
    if (y.size() != scores.size()) throw Error("roc: labels and scores differ in length");
    for (double s : scores)
        if (std::isnan(s)) throw Error("roc: NaN score");
    n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), positive));
    n_neg = y.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("roc: both classes must be present");
}

} // namespace detail

inline RocCurve roc_curve(std::span<const Label> y, std::span<const double> scores, Label positive = Label::Abnormal) {
    std::size_t n_pos = 0, n_neg = 0;
    detail::check_scored(y, scores, positive, n_pos, n_neg);
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        for (; k < order.size() && scores[order[k]] == s; ++k) (y[order[k]] == positive ? tp : fp) += 1;
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return curve;
}

inline double trapezoid_area(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

/// Mann-Whitney AUC from mid-ranks: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc(std::span<const Label> y, std::span<const double> scores, Label positive = Label::Abnormal) {
    std::size_t n_pos = 0, n_neg = 0;
    detail::check_scored(y, scores, positive, n_pos, n_neg);
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t end = k;
        while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
        const double mid_rank = 0.5 * static_cast<double>(k + 1 + end); // mean of ranks k+1 .. end
        for (std::size_t t = k; t < end; ++t)
            if (y[order[t]] == positive) pos_rank_sum += mid_rank;
        k = end;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) * 0.5) / (np * nn);
}

} // namespace abr
