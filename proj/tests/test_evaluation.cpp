#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "abr/aggregate.hpp"
#include "abr/cross_validation.hpp"
#include "abr/metrics.hpp"
#include "abr/random.hpp"
#include "abr/roc.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace {

using abr::Label;
using abr::Metric;
constexpr Label P = Label::Abnormal;
constexpr Label N = Label::Normal;

TEST(Confusion, Examples) {
    const std::vector<Label> t{P, P, N, N}, p{P, N, P, N};
    EXPECT_EQ(abr::confusion(t, p), (abr::ConfusionMatrix{1, 1, 1, 1}));
    EXPECT_EQ(abr::confusion(t, t), (abr::ConfusionMatrix{2, 2, 0, 0}));
    EXPECT_THROW(abr::confusion(t, std::vector<Label>{P}), abr::Error);
    EXPECT_THROW(abr::confusion({}, {}), abr::Error);
}

TEST(Metrics, WorkedExample) {
    const auto m = abr::compute_metrics({50, 30, 10, 10});
    EXPECT_NEAR(m.accuracy, 0.80, 1e-12);
    EXPECT_NEAR(m.precision, 0.833333, 1e-6);
    EXPECT_NEAR(m.recall, 0.833333, 1e-6);
    EXPECT_NEAR(m.f1, 0.833333, 1e-6);
    EXPECT_NEAR(m.gmean, 0.790569, 1e-6);
    EXPECT_EQ(m.degenerate, 0);
}

TEST(Metrics, AllPredictedNormal) {
    const auto m = abr::compute_metrics({0, 116, 0, 71});
    EXPECT_EQ(m.precision, 0.0);
    EXPECT_TRUE(m.is_degenerate(Metric::Precision));
    EXPECT_EQ(m.recall, 0.0);
    EXPECT_FALSE(m.is_degenerate(Metric::Recall));
    EXPECT_EQ(m.gmean, 0.0);
    EXPECT_FALSE(m.is_degenerate(Metric::GMean));
    EXPECT_NEAR(m.accuracy, 116.0 / 187.0, 1e-15);
    EXPECT_THROW(abr::compute_metrics({}), abr::Error);
}

TEST(Metrics, RandomMatricesMatchDefinitions) {
    abr::Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        abr::ConfusionMatrix cm;
        // Small counts so zero denominators actually occur.
        const std::uint64_t hi = trial % 2 ? 4 : 200;
        cm.tp = abr::uniform_below(rng, hi);
        cm.tn = abr::uniform_below(rng, hi);
        cm.fp = abr::uniform_below(rng, hi);
        cm.fn = abr::uniform_below(rng, hi);
        if (cm.total() == 0) cm.tn = 1;
        const auto m = abr::compute_metrics(cm);
        const auto d = abr::testing::definitional_metrics(cm.tp, cm.tn, cm.fp, cm.fn);
        EXPECT_NEAR(m.accuracy, d.accuracy, 1e-12);
        EXPECT_NEAR(m.precision, d.precision, 1e-12);
        EXPECT_NEAR(m.recall, d.recall, 1e-12);
        EXPECT_NEAR(m.f1, d.f1, 1e-12);
        EXPECT_NEAR(m.gmean, d.gmean, 1e-12);
        EXPECT_EQ(m.is_degenerate(Metric::Precision), d.precision_zero_den);
        EXPECT_EQ(m.is_degenerate(Metric::Recall), d.recall_zero_den);
        EXPECT_EQ(m.is_degenerate(Metric::F1), d.f1_zero_den);
        EXPECT_EQ(m.is_degenerate(Metric::GMean), d.gmean_zero_den);
        EXPECT_FALSE(m.is_degenerate(Metric::Accuracy));
        for (Metric k : abr::all_metrics) {
            EXPECT_GE(m.get(k), 0.0);
            EXPECT_LE(m.get(k), 1.0);
        }
    }
}

TEST(SampleStd, Examples) {
    const std::vector<double> v{0.94, 0.95, 0.93, 0.95, 0.94};
    EXPECT_NEAR(abr::sample_std(v), 0.008367, 1e-6);
    EXPECT_EQ(abr::sample_std(std::vector<double>{0.9, 0.9, 0.9}), 0.0);
    EXPECT_THROW(abr::sample_std(std::vector<double>{0.9}), abr::Error);
    EXPECT_THROW(abr::sample_std(std::vector<double>{}), abr::Error);
}

TEST(Auc, Examples) {
    const std::vector<Label> y{P, P, N, N};
    EXPECT_DOUBLE_EQ(abr::auc(y, std::vector<double>{0.9, 0.4, 0.6, 0.2}), 0.75);
    EXPECT_DOUBLE_EQ(abr::auc(y, std::vector<double>{1, 1, 1, 1}), 0.5);
    EXPECT_DOUBLE_EQ(abr::auc(y, std::vector<double>{4, 3, 2, 1}), 1.0);
    EXPECT_DOUBLE_EQ(abr::auc(y, std::vector<double>{1, 2, 3, 4}), 0.0);
    EXPECT_THROW(abr::auc(std::vector<Label>{P, P}, std::vector<double>{1, 2}), abr::Error);
    EXPECT_THROW(abr::auc(y, std::vector<double>{1, NAN, 2, 3}), abr::Error);
    EXPECT_THROW(abr::auc(y, std::vector<double>{1, 2}), abr::Error);
}

TEST(Roc, CurveShape) {
    const std::vector<Label> y{P, P, N, N};
    const auto c = abr::roc_curve(y, std::vector<double>{0.9, 0.4, 0.6, 0.2});
    ASSERT_EQ(c.points.size(), 5u);
    EXPECT_TRUE(std::isinf(c.points.front().threshold));
    EXPECT_EQ(c.points.front().fpr, 0.0);
    EXPECT_EQ(c.points.back().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    EXPECT_EQ(c.points[2].threshold, 0.6);
    EXPECT_EQ(c.points[2].fpr, 0.5);
    EXPECT_EQ(c.points[2].tpr, 0.5);
    EXPECT_EQ(abr::roc_curve(y, std::vector<double>{1, 1, 1, 1}).points.size(), 2u);
}

// Property: trapezoid area under the swept curve equals the rank statistic and
// pairwise counting; strictly increasing transforms do not move it.
TEST(Auc, RandomTiedScoresAgreeAcrossFormulas) {
    abr::Rng rng(5150);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + abr::uniform_below(rng, 60);
        const std::uint64_t levels = 1 + abr::uniform_below(rng, 8);
        std::vector<Label> y(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = i == 0 ? P : i == 1 ? N : (rng() & 1 ? P : N);
            s[i] = static_cast<double>(abr::uniform_below(rng, levels)) / 4.0 - 1.0;
        }
        const double trap = abr::trapezoid_area(abr::roc_curve(y, s));
        const double ranks = abr::auc(y, s);
        const double pairs = abr::testing::pairwise_auc(y, s);
        EXPECT_NEAR(trap, pairs, 1e-12);
        EXPECT_NEAR(ranks, pairs, 1e-12);
        std::vector<double> e(n), a(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(s[i]), a[i] = 3.0 * s[i] + 7.0;
        EXPECT_NEAR(abr::auc(y, e), ranks, 1e-12);
        EXPECT_NEAR(abr::auc(y, a), ranks, 1e-12);
    }
}

TEST(CrossValidate, SeparableDataScoresNearPerfect) {
    const auto pts = abr::testing::separable_blobs(200, 3, 0.3, 1);
    abr::SvmParams p;
    p.kernel = abr::KernelKind::Linear;
    const auto run = abr::cross_validate(pts.X, pts.y, p, 5, 17);
    EXPECT_GE(run.metrics.accuracy, 0.99);
    EXPECT_EQ(run.folds.size(), 5u);
    for (const auto& f : run.folds) EXPECT_LE(f.kkt_violation, 10 * p.tolerance);
}

TEST(CrossValidate, PermutedLabelsGiveChance) {
    const auto pts = abr::testing::separable_blobs(200, 3, 0.3, 2);
    abr::SvmParams p;
    p.kernel = abr::KernelKind::Linear;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto y = pts.y;
        abr::Rng rng(1000 + seed);
        abr::deterministic_shuffle(std::span(y), rng);
        const auto run = abr::cross_validate(pts.X, y, p, 5, seed);
        total += run.metrics.accuracy;
        for (const auto& f : run.folds) EXPECT_LE(f.kkt_violation, 10 * p.tolerance);
    }
    const double mean = total / 20.0;
    EXPECT_GE(mean, 0.35);
    EXPECT_LE(mean, 0.65);
}

TEST(CrossValidate, FullCohortRunShape) {
    const auto pts = abr::testing::separable_blobs(187, 4, 0.1, 3);
    std::vector<Label> y(187);
    for (std::size_t i = 0; i < 187; ++i) y[i] = i < 71 ? P : N;
    abr::Matrix X = pts.X;
    for (std::size_t i = 0; i < 187; ++i) X(i, 0) = std::abs(X(i, 0)) * (y[i] == P ? 1.0 : -1.0);
    const auto run = abr::cross_validate(X, y, abr::SvmParams{}, 5, 9);
    ASSERT_EQ(run.folds.size(), 5u);
    std::size_t total = 0;
    for (const auto& f : run.folds) total += f.confusion.total();
    EXPECT_EQ(total, 187u);
    for (double s : run.scores) EXPECT_FALSE(std::isnan(s));
    std::vector<abr::MetricSet> per_fold;
    for (const auto& f : run.folds) per_fold.push_back(f.metrics);
    EXPECT_EQ(run.metrics, abr::mean_metrics(per_fold));
}

TEST(CrossValidate, DeterministicForSeed) {
    const auto pts = abr::testing::separable_blobs(60, 2, 0.0, 4);
    const auto a = abr::cross_validate(pts.X, pts.y, abr::SvmParams{}, 5, 42);
    const auto b = abr::cross_validate(pts.X, pts.y, abr::SvmParams{}, 5, 42);
    EXPECT_EQ(a, b);
}

TEST(CrossValidate, RejectsBadInput) {
    const auto pts = abr::testing::separable_blobs(10, 2, 0.5, 4);
    EXPECT_THROW(abr::cross_validate(pts.X, std::span(pts.y).first(9), abr::SvmParams{}, 5, 1), abr::Error);
    EXPECT_THROW(abr::cross_validate(pts.X, pts.y, abr::SvmParams{}, 1, 1), abr::Error);
}

abr::RunResult run_with(std::size_t index, double acc) {
    abr::RunResult r;
    r.model_name = "M";
    r.run_index = index;
    r.metrics.accuracy = acc;
    r.labels = {P, N, P, N};
    r.scores = {0.3 * static_cast<double>(index), 0.1, 0.5, 0.2};
    return r;
}

TEST(Aggregate, Examples) {
    const std::vector<abr::RunResult> runs{run_with(0, 0.93), run_with(1, 0.95), run_with(2, 0.94)};
    const auto rep = abr::aggregate(runs);
    EXPECT_EQ(rep.runs, 3u);
    EXPECT_DOUBLE_EQ(rep.accuracy.max, 0.95);
    EXPECT_NEAR(rep.accuracy.mean, 0.94, 1e-15);
    EXPECT_NEAR(rep.accuracy.std, 0.01, 1e-12);
    EXPECT_DOUBLE_EQ(rep.accuracy.min, 0.93);
    EXPECT_DOUBLE_EQ(rep.auc, abr::auc(runs[2].labels, runs[2].scores));
    for (Metric m : abr::all_metrics) EXPECT_GE(rep.summary(m).max, rep.summary(m).mean);

    EXPECT_THROW(abr::aggregate(std::span(runs).first(1)), abr::Error);
    auto mixed = runs;
    mixed[1].model_name = "other";
    EXPECT_THROW(abr::aggregate(mixed), abr::Error);
}

} // namespace
