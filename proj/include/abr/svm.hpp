#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abr/dataset.hpp"
#include "abr/error.hpp"
#include "abr/matrix.hpp"

namespace abr {

enum class KernelKind : std::uint8_t { Linear = 0, Rbf = 1 };
enum class ClassWeighting : std::uint8_t { Off, Balanced };

inline std::string_view to_string(KernelKind k) noexcept { return k == KernelKind::Linear ? "linear" : "rbf"; }
inline std::string_view to_string(ClassWeighting w) noexcept { return w == ClassWeighting::Off ? "off" : "balanced"; }

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double gamma = 1.0; ///< used by Rbf only

    static KernelSpec linear() noexcept { return {KernelKind::Linear, 0.0}; }
    static KernelSpec rbf(double gamma) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("rbf kernel: gamma must be positive");
        return {KernelKind::Rbf, gamma};
    }

    bool operator==(const KernelSpec&) const = default;
};

inline double kernel_eval(std::span<const double> u, std::span<const double> v, const KernelSpec& spec) {
    if (u.size() != v.size())
        throw Error("kernel_eval: length mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    double acc = 0.0;
    if (spec.kind == KernelKind::Linear) {
        for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
        return acc;
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        acc += d * d;
    }
    return std::exp(-spec.gamma * acc);
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline constexpr double std_floor = 1e-12;

struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t dim() const noexcept { return means.size(); }

    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != means.size())
            throw Error("standardizer: expected " + std::to_string(means.size()) + " features, got " +
                        std::to_string(x.size()));
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - means[j]) / stds[j];
        return out;
    }

    Matrix apply(const Matrix& X) const {
        Matrix out(X.rows(), X.cols());
        for (std::size_t i = 0; i < X.rows(); ++i) {
            auto r = apply(X.row(i));
            std::ranges::copy(r, out.row(i).begin());
        }
        return out;
    }

    bool operator==(const Standardizer&) const = default;
};

/// Column means and sample standard deviations (n - 1), stds floored at 1e-12.
inline Standardizer fit_standardizer(const Matrix& X) {
    if (X.rows() < 2) throw Error("fit_standardizer: need at least 2 rows, got " + std::to_string(X.rows()));
    const std::size_t n = X.rows(), d = X.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.means[j] += X(i, j);
    for (auto& m : s.means) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = X(i, j) - s.means[j];
            s.stds[j] += c * c;
        }
    for (auto& v : s.stds) v = std::max(std::sqrt(v / static_cast<double>(n - 1)), std_floor);
    return s;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct SvmParams {
    double C = 1.0;
    KernelKind kernel = KernelKind::Rbf;
    std::optional<double> gamma;            ///< unset: the "scale" rule, resolved at training
    double tolerance = 1e-3;
    std::optional<std::size_t> max_passes;  ///< pair updates; unset: 10 * n
    ClassWeighting class_weighting = ClassWeighting::Off;
    bool standardize = true;                ///< off: identity standardizer, kernel on raw rows

    void validate() const {
        if (!(C > 0.0) || !std::isfinite(C)) throw Error("svm: C must be positive");
        if (!(tolerance > 0.0)) throw Error("svm: tolerance must be positive");
        if (gamma && !(*gamma > 0.0)) throw Error("svm: gamma must be positive");
        if (max_passes && *max_passes < 1) throw Error("svm: max_passes must be >= 1");
    }

    bool operator==(const SvmParams&) const = default;
};

struct TrainedSvm {
    Matrix support_vectors;           ///< standardized rows
    std::vector<double> dual_coeffs;  ///< alpha_i * y_i
    double bias = 0.0;
    KernelSpec kernel;
    Standardizer standardizer;

    std::size_t feature_dim() const noexcept { return standardizer.dim(); }

    bool operator==(const TrainedSvm&) const = default;
};

/// Full training outcome, including every multiplier (pruned or not) for auditing.
struct TrainResult {
    TrainedSvm model;
    std::vector<double> alpha;   ///< per training row
    std::vector<double> upper;   ///< C_i per training row
    std::vector<int> y;          ///< +1 / -1 per training row
    bool converged = false;
    std::size_t iterations = 0;
    double gap = 0.0;            ///< final maximal-violating-pair gap
    double dual_objective = 0.0;
};

inline constexpr double prune_threshold = 1e-9;

/// gamma = 1 / (d * mean column variance) over already standardized rows.
inline double scale_gamma(const Matrix& Z) {
    const std::size_t n = Z.rows(), d = Z.cols();
    if (d == 0) throw Error("svm: zero-dimensional features");
    double var_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += Z(i, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (Z(i, j) - mean) * (Z(i, j) - mean);
        var_sum += n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    }
    const double mean_var = var_sum / static_cast<double>(d);
    return mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0 / static_cast<double>(d);
}

/// Soft-margin SVM by sequential minimal optimization over the dual
///
///     max  sum a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
///     s.t. 0 <= a_i <= C_i,  sum a_i y_i = 0.
///
/// Each step updates the maximal violating pair: the first multiplier is the
/// largest KKT violator, the second maximizes |E_i - E_j| among admissible
/// partners (lowest index wins ties). Stops once that gap is <= tolerance or
/// after max_passes updates (converged = false).
inline TrainResult train_smo(const Matrix& X, std::span<const int> y, const SvmParams& params) {
    params.validate();
    const std::size_t n = X.rows();
    if (n != y.size()) throw Error("train_smo: " + std::to_string(n) + " rows but " + std::to_string(y.size()) + " labels");
    std::size_t n_pos = 0, n_neg = 0;
    for (int v : y) {
        if (v == 1) ++n_pos;
        else if (v == -1) ++n_neg;
        else throw Error("train_smo: labels must be +1 or -1");
    }
    if (n_pos == 0 || n_neg == 0) throw Error("train_smo: training data contains a single class");

    TrainResult res;
    res.y.assign(y.begin(), y.end());
    auto& model = res.model;
    if (params.standardize) {
        model.standardizer = fit_standardizer(X);
    } else {
        if (n < 2) throw Error("train_smo: need at least 2 rows");
        model.standardizer = {std::vector<double>(X.cols(), 0.0), std::vector<double>(X.cols(), 1.0)};
    }
    const Matrix Z = model.standardizer.apply(X);
    model.kernel = params.kernel == KernelKind::Linear ? KernelSpec::linear()
                                                       : KernelSpec::rbf(params.gamma ? *params.gamma : scale_gamma(Z));

    res.upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (params.class_weighting == ClassWeighting::Balanced)
            res.upper[i] = params.C * static_cast<double>(n) / (2.0 * static_cast<double>(y[i] > 0 ? n_pos : n_neg));
        else
            res.upper[i] = params.C;
    }
    const auto& C = res.upper;

    Matrix K(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) K(i, j) = K(j, i) = kernel_eval(Z.row(i), Z.row(j), model.kernel);

    auto& alpha = res.alpha;
    alpha.assign(n, 0.0);
    // Gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij.
    std::vector<double> G(n, -1.0);
    const auto yd = [&](std::size_t t) { return static_cast<double>(y[t]); };
    const auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C[t]) || (y[t] < 0 && alpha[t] > 0.0); };
    const auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < C[t]); };

    const std::size_t max_iter = params.max_passes ? *params.max_passes : 10 * n;
    constexpr double tau = 1e-12;
    constexpr double inf = std::numeric_limits<double>::infinity();

    for (;;) {
        std::size_t i = n, j = n;
        double m_up = -inf, m_low = inf;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -yd(t) * G[t];
            if (in_up(t) && v > m_up) m_up = v, i = t;
            if (in_low(t) && v < m_low) m_low = v, j = t;
        }
        res.gap = (i == n || j == n) ? 0.0 : m_up - m_low;
        if (res.gap <= params.tolerance) {
            res.converged = true;
            break;
        }
        if (res.iterations >= max_iter) break;
        ++res.iterations;

        const double old_i = alpha[i], old_j = alpha[j];
        double eta = K(i, i) + K(j, j) - 2.0 * K(i, j);
        if (eta <= 0.0) eta = tau;
        if (y[i] != y[j]) {
            const double delta = (-G[i] - G[j]) / eta;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0, alpha[j] = -diff;
            }
            if (diff > C[i] - C[j]) {
                if (alpha[i] > C[i]) alpha[i] = C[i], alpha[j] = C[i] - diff;
            } else if (alpha[j] > C[j]) {
                alpha[j] = C[j], alpha[i] = C[j] + diff;
            }
        } else {
            const double delta = (G[i] - G[j]) / eta;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C[i]) {
                if (alpha[i] > C[i]) alpha[i] = C[i], alpha[j] = sum - C[i];
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0, alpha[i] = sum;
            }
            if (sum > C[j]) {
                if (alpha[j] > C[j]) alpha[j] = C[j], alpha[i] = sum - C[j];
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0, alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t)
            G[t] += yd(t) * (yd(i) * K(t, i) * di + yd(j) * K(t, j) * dj);
    }

    // b = -rho with rho the mean of y_t G_t over free multipliers, or the
    // midpoint of the interval bound multipliers allow when none is free.
    double free_sum = 0.0, ub = inf, lb = -inf;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = yd(t) * G[t];
        if (alpha[t] >= C[t]) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            free_sum += yg;
        }
    }
    double rho;
    if (n_free > 0) rho = free_sum / static_cast<double>(n_free);
    else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
    else rho = std::isfinite(ub) ? ub : lb;
    model.bias = -rho;

    double lin = 0.0, quad = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        lin += alpha[t];
        quad += alpha[t] * (G[t] + 1.0); // (Qa)_t = G_t + 1
    }
    res.dual_objective = lin - 0.5 * quad;

    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] < prune_threshold) continue;
        model.support_vectors.push_row(Z.row(t));
        model.dual_coeffs.push_back(alpha[t] * yd(t));
    }
    if (model.support_vectors.empty()) model.support_vectors = Matrix(0, Z.cols());
    return res;
}

inline TrainResult train_smo(const Matrix& X, std::span<const Label> labels, const SvmParams& params) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (Label l : labels) y.push_back(to_sign(l));
    return train_smo(X, y, params);
}

/// f(x) = sum_i coeff_i K(sv_i, standardize(x)) + b.
inline double decision_function(const TrainedSvm& model, std::span<const double> x) {
    const auto z = model.standardizer.apply(x);
    double f = model.bias;
    for (std::size_t i = 0; i < model.dual_coeffs.size(); ++i)
        f += model.dual_coeffs[i] * kernel_eval(model.support_vectors.row(i), z, model.kernel);
    return f;
}

/// Abnormal when f(x) > 0; a score of exactly 0 goes to Normal.
inline Label predict(const TrainedSvm& model, std::span<const double> x) {
    return decision_function(model, x) > 0.0 ? Label::Abnormal : Label::Normal;
}

/// Largest KKT violation over the training rows:
/// a = 0 needs y f >= 1, 0 < a < C needs y f = 1, a = C needs y f <= 1.
inline double kkt_violation(const TrainResult& res, const Matrix& X) {
    double worst = 0.0;
    for (std::size_t t = 0; t < X.rows(); ++t) {
        const double m = res.y[t] * decision_function(res.model, X.row(t));
        double v;
        if (res.alpha[t] <= 0.0) v = 1.0 - m;
        else if (res.alpha[t] >= res.upper[t]) v = m - 1.0;
        else v = std::abs(m - 1.0);
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace abr
