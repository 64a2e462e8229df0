#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "abr/dataset.hpp"
#include "abr/error.hpp"
#include "abr/matrix.hpp"
#include "abr/metrics.hpp"
#include "abr/svm.hpp"

namespace abr {

struct FoldResult {
    ConfusionMatrix confusion;
    MetricSet metrics;
    bool converged = true;
    std::size_t iterations = 0;
    std::size_t support_vectors = 0;
    double kkt_violation = 0.0; ///< worst KKT violation on the fold's training rows

    bool operator==(const FoldResult&) const = default;
};

struct RunResult {
    std::string model_name;
    std::size_t run_index = 0;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    MetricSet metrics;            ///< unweighted mean over folds
    std::vector<double> scores;   ///< out-of-fold decision values, aligned with the input rows
    std::vector<Label> labels;

    std::size_t non_converged_folds() const noexcept {
        std::size_t n = 0;
        for (const auto& f : folds) n += f.converged ? 0 : 1;
        return n;
    }

    bool operator==(const RunResult&) const = default;
};

/// Stratified k-fold evaluation: for each fold, standardizer and SVM are fit on
/// the other k-1 folds and scored on the held-out fold.
inline RunResult cross_validate(const Matrix& features, std::span<const Label> labels, const SvmParams& params,
                                std::size_t k, std::uint64_t seed, std::span<const std::string> groups = {}) {
    if (features.rows() != labels.size())
        throw Error("cross_validate: " + std::to_string(features.rows()) + " feature rows but " +
                    std::to_string(labels.size()) + " labels");
    const auto fold_of = stratified_fold_indices(labels, k, seed, groups);

    RunResult run;
    run.seed = seed;
    run.labels.assign(labels.begin(), labels.end());
    run.scores.assign(labels.size(), std::numeric_limits<double>::quiet_NaN());
    run.folds.resize(k);
    std::vector<MetricSet> per_fold;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
        try {
            if (test.empty()) throw Error("empty test fold");
            const Matrix X_train = features.select_rows(train);
            std::vector<Label> y_train, y_test, y_pred;
            for (auto i : train) y_train.push_back(labels[i]);
            const auto trained = train_smo(X_train, y_train, params);

            for (auto i : test) {
                const double s = decision_function(trained.model, features.row(i));
                run.scores[i] = s;
                y_test.push_back(labels[i]);
                y_pred.push_back(s > 0.0 ? Label::Abnormal : Label::Normal);
            }
            auto& fr = run.folds[f];
            fr.confusion = confusion(y_test, y_pred);
            fr.metrics = compute_metrics(fr.confusion);
            fr.converged = trained.converged;
            fr.iterations = trained.iterations;
            fr.support_vectors = trained.model.dual_coeffs.size();
            fr.kkt_violation = kkt_violation(trained, X_train);
            per_fold.push_back(fr.metrics);
        } catch (const Error& e) {
            throw Error("cross_validate (seed " + std::to_string(seed) + ", fold " + std::to_string(f) + "): " + e.what());
        }
    }
    run.metrics = mean_metrics(per_fold);
    return run;
}

} // namespace abr
