// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr/abr.hpp"
#include "support/oracles.hpp"
#include "support/qp_oracle.hpp"
#include "support/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using abr::Label;
using abr::Metric;
using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* spec, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Worst KKT violation seen in any training, relative to that training's tolerance.
struct KktAudit {
    std::size_t trainings = 0;
    double worst_ratio = 0.0;

    void record(double violation, double tolerance) {
        ++trainings;
        worst_ratio = std::max(worst_ratio, violation / tolerance);
    }
    void record(const abr::TrainResult& r, const abr::Matrix& X, double tolerance) {
        record(abr::kkt_violation(r, X), tolerance);
    }
    void record(const abr::RunResult& run, double tolerance) {
        for (const auto& f : run.folds) record(f.kkt_violation, tolerance);
    }
};

KktAudit audit;

Verdict metric_oracle() {
    Verdict v;
    const auto t0 = Clock::now();
    abr::Rng rng(20240601);
    std::size_t degenerate_seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        abr::ConfusionMatrix cm;
        const std::uint64_t hi = trial % 2 ? 3 : 500;
        cm.tp = abr::uniform_below(rng, hi);
        cm.tn = abr::uniform_below(rng, hi);
        cm.fp = abr::uniform_below(rng, hi);
        cm.fn = abr::uniform_below(rng, hi);
        if (cm.total() == 0) cm.fp = 1;
        const auto m = abr::compute_metrics(cm);
        const auto d = abr::testing::definitional_metrics(cm.tp, cm.tn, cm.fp, cm.fn);
        const double err = std::max({std::abs(m.accuracy - d.accuracy), std::abs(m.precision - d.precision),
                                     std::abs(m.recall - d.recall), std::abs(m.f1 - d.f1),
                                     std::abs(m.gmean - d.gmean)});
        v.require(err <= 1e-12, "trial " + std::to_string(trial) + ": deviation " + fmt("%.3g", err));
        const bool flags_ok = m.is_degenerate(Metric::Precision) == d.precision_zero_den &&
                              m.is_degenerate(Metric::Recall) == d.recall_zero_den &&
                              m.is_degenerate(Metric::F1) == d.f1_zero_den &&
                              m.is_degenerate(Metric::GMean) == d.gmean_zero_den &&
                              !m.is_degenerate(Metric::Accuracy);
        v.require(flags_ok, "trial " + std::to_string(trial) + ": degenerate flags disagree");
        degenerate_seen += m.degenerate != 0;
    }
    const double secs = seconds_since(t0);
    v.require(degenerate_seen > 0, "no degenerate matrix was generated");
    v.require(secs < 1.0, "took " + fmt("%.3f", secs) + " s");
    if (v.pass)
        v.detail = "1000 matrices, " + std::to_string(degenerate_seen) + " with zero denominators, " + fmt("%.3f", secs) + " s";
    return v;
}

Verdict smo_vs_qp() {
    Verdict v;
    const auto t0 = Clock::now();
    abr::Rng rng(314159);
    const double Cs[] = {0.1, 1.0, 10.0};
    double worst_obj = 0.0;
    std::size_t sign_checks = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + abr::uniform_below(rng, 5);
        const std::size_t d = 1 + abr::uniform_below(rng, 3);
        abr::Matrix X(0, d);
        Eigen::MatrixXd E(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        std::vector<int> y;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(d);
            for (std::size_t j = 0; j < d; ++j) {
                row[j] = 4.0 * abr::uniform_unit(rng()) - 2.0;
                E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
            }
            X.push_row(row);
            y.push_back(i == 0 ? 1 : i == 1 ? -1 : (rng() & 1 ? 1 : -1));
        }
        const double C = Cs[trial % 3];
        const bool rbf = (trial / 3) % 2 == 1;
        abr::SvmParams p;
        p.C = C;
        p.kernel = rbf ? abr::KernelKind::Rbf : abr::KernelKind::Linear;
        p.gamma = 0.5;
        p.tolerance = 1e-8;
        p.max_passes = 100000;
        const auto r = abr::train_smo(X, y, p);
        audit.record(r, X, p.tolerance);
        const auto oracle = abr::testing::solve_dual_brute_force(E, y, C, rbf, 0.5);
        const double gap = std::abs(r.dual_objective - oracle.objective);
        worst_obj = std::max(worst_obj, gap);
        const std::string tag = "instance " + std::to_string(trial);
        v.require(r.converged, tag + ": SMO did not converge");
        v.require(gap <= 1e-5, tag + ": dual objective off by " + fmt("%.3g", gap));
        const auto f = abr::testing::oracle_training_decisions(oracle, y);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(f[i]) < 1e-6) continue; // on the decision boundary, sign undefined
            ++sign_checks;
            v.require((abr::decision_function(r.model, X.row(i)) > 0) == (f[i] > 0),
                      tag + ": decision sign differs at point " + std::to_string(i));
        }
    }
    const double secs = seconds_since(t0);
    v.require(secs < 30.0, "took " + fmt("%.2f", secs) + " s");
    if (v.pass)
        v.detail = "200 instances, max |dual gap| " + fmt("%.2g", worst_obj) + ", " + std::to_string(sign_checks) +
                   " signs agree, " + fmt("%.2f", secs) + " s";
    return v;
}

Verdict svm_sanity() {
    Verdict v;
    {
        abr::Matrix X{{-1.0}, {1.0}};
        const std::vector<int> y{-1, 1};
        abr::SvmParams p;
        p.C = 10.0;
        p.kernel = abr::KernelKind::Linear;
        p.standardize = false;
        const auto r = abr::train_smo(X, y, p);
        audit.record(r, X, p.tolerance);
        v.require(std::abs(r.alpha[0] - 0.5) <= 1e-4 && std::abs(r.alpha[1] - 0.5) <= 1e-4,
                  "two-point alphas " + fmt("%.6f", r.alpha[0]) + ", " + fmt("%.6f", r.alpha[1]));
        v.require(std::abs(r.model.bias) <= 1e-4, "two-point bias " + fmt("%.6f", r.model.bias));
        for (double x = -2.0; x <= 2.0; x += 0.25) {
            const std::vector<double> q{x};
            v.require(std::abs(abr::decision_function(r.model, q) - x) <= 1e-4, "two-point f(x) != x at " + fmt("%g", x));
        }
    }
    {
        abr::Matrix X{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
        const std::vector<int> y{-1, -1, 1, 1};
        abr::SvmParams p;
        p.C = 10.0;
        p.gamma = 1.0;
        const auto r = abr::train_smo(X, y, p);
        audit.record(r, X, p.tolerance);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < 4; ++i) correct += (abr::decision_function(r.model, X.row(i)) > 0) == (y[i] > 0);
        v.require(correct == 4, "XOR training accuracy " + std::to_string(correct) + "/4");
    }
    double blob_acc = 0.0;
    {
        const auto pts = abr::testing::separable_blobs(200, 2, 0.5, 77);
        abr::SvmParams p;
        p.kernel = abr::KernelKind::Linear;
        const auto run = abr::cross_validate(pts.X, pts.y, p, 5, 1);
        audit.record(run, p.tolerance);
        blob_acc = run.metrics.accuracy;
        v.require(blob_acc >= 0.99, "blob CV accuracy " + fmt("%.4f", blob_acc));
    }
    if (v.pass) v.detail = "two-point alpha=0.5 f(x)=x b=0; XOR 4/4; blobs CV accuracy " + fmt("%.4f", blob_acc);
    return v;
}

Verdict auc_mann_whitney() {
    Verdict v;
    abr::Rng rng(8675309);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + abr::uniform_below(rng, 80);
        const std::uint64_t levels = 1 + abr::uniform_below(rng, 10);
        std::vector<Label> y(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = i == 0 ? Label::Abnormal : i == 1 ? Label::Normal : (rng() & 1 ? Label::Abnormal : Label::Normal);
            s[i] = static_cast<double>(abr::uniform_below(rng, levels)) * 0.3 - 1.0;
        }
        const double pairs = abr::testing::pairwise_auc(y, s);
        const double trap = abr::trapezoid_area(abr::roc_curve(y, s));
        const double ranks = abr::auc(y, s);
        std::vector<double> e(n), a(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(s[i]), a[i] = 2.5 * s[i] - 4.0;
        const double err = std::max({std::abs(trap - pairs), std::abs(ranks - pairs),
                                     std::abs(abr::auc(y, e) - ranks), std::abs(abr::auc(y, a) - ranks),
                                     std::abs(abr::trapezoid_area(abr::roc_curve(y, e)) - pairs)});
        worst = std::max(worst, err);
        v.require(err <= 1e-12, "set " + std::to_string(trial) + ": deviation " + fmt("%.3g", err));
    }
    if (v.pass) v.detail = "500 tied score sets, max deviation " + fmt("%.2g", worst);
    return v;
}

abr::DatasetManifest random_manifest(abr::Rng& rng, std::size_t n_normal, std::size_t n_abnormal) {
    std::vector<abr::SampleRecord> samples;
    for (std::size_t i = 0; i < n_normal + n_abnormal; ++i) {
        abr::SampleRecord s;
        s.sample_id = "s" + std::to_string(i);
        s.image_path = s.sample_id + ".png";
        s.label = i < n_normal ? Label::Normal : Label::Abnormal;
        s.patient_id = "p" + std::to_string(i / 2);
        samples.push_back(std::move(s));
    }
    abr::Rng shuffle_rng(rng());
    abr::deterministic_shuffle(std::span(samples), shuffle_rng);
    return abr::DatasetManifest(std::move(samples));
}

std::vector<std::size_t> fold_sizes(const abr::FoldAssignment& a, const abr::DatasetManifest& m, Label label) {
    std::vector<std::size_t> sizes(a.k, 0);
    for (const auto& s : m.samples())
        if (s.label == label) ++sizes[a.fold_of.at(s.sample_id)];
    return sizes;
}

Verdict stratified_folds() {
    Verdict v;
    abr::Rng rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + abr::uniform_below(rng, 9);
        const std::size_t n_normal = k + abr::uniform_below(rng, 150);
        const std::size_t n_abnormal = k + abr::uniform_below(rng, 150);
        const auto m = random_manifest(rng, n_normal, n_abnormal);
        const std::uint64_t seed = rng();
        const auto a = abr::stratified_kfold(m, k, seed);
        const std::string tag = "manifest " + std::to_string(trial) + " (k=" + std::to_string(k) + ")";
        std::set<std::string> covered;
        bool in_range = true;
        for (const auto& [id, f] : a.fold_of) {
            covered.insert(id);
            in_range = in_range && f < k;
        }
        v.require(a.fold_of.size() == m.size() && covered.size() == m.size() && in_range,
                  tag + ": not a partition of the samples");
        for (const auto& s : m.samples()) v.require(a.fold_of.count(s.sample_id) == 1, tag + ": sample missing");
        for (Label label : abr::all_labels) {
            const auto sizes = fold_sizes(a, m, label);
            const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
            v.require(*hi - *lo <= 1, tag + ": class counts differ by more than 1 across folds");
        }
        v.require(abr::stratified_kfold(m, k, seed) == a, tag + ": same seed gave different folds");
    }
    abr::Rng cohort_rng(1);
    const auto cohort = random_manifest(cohort_rng, 116, 71);
    auto normal = fold_sizes(abr::stratified_kfold(cohort, 5, 0), cohort, Label::Normal);
    auto abnormal = fold_sizes(abr::stratified_kfold(cohort, 5, 0), cohort, Label::Abnormal);
    std::sort(normal.rbegin(), normal.rend());
    std::sort(abnormal.rbegin(), abnormal.rend());
    v.require(normal == std::vector<std::size_t>{24, 23, 23, 23, 23}, "116 normal not split 24/23/23/23/23");
    v.require(abnormal == std::vector<std::size_t>{15, 14, 14, 14, 14}, "71 abnormal not split 15/14/14/14/14");
    if (v.pass) v.detail = "100 random manifests k in [2,10]; 116/71 at k=5 -> {24,23,23,23,23}/{15,14,14,14,14}";
    return v;
}

Verdict end_to_end() {
    Verdict v;
    const auto root = fs::temp_directory_path() / "abr_acceptance_e2e";
    abr::testing::SyntheticSpec spec; // 116 normal / 71 abnormal, 20 repeats, k = 5
    const auto ex = abr::testing::make_synthetic_experiment(root, spec);
    const auto cfg = abr::parse_config(ex.config);

    const auto t0 = Clock::now();
    std::ostringstream log;
    const int rc = abr::run_evaluate(cfg, log);
    const double secs = seconds_since(t0);
    v.require(rc == abr::exit_ok, "evaluate exit code " + std::to_string(rc));
    v.require(secs < 120.0, "took " + fmt("%.1f", secs) + " s");

    const char* tables[] = {"table_max.csv", "table_mean.csv", "table_std.csv"};
    std::map<std::string, std::string> first;
    for (const char* t : tables) {
        v.require(fs::is_regular_file(ex.output_dir / t), std::string("missing ") + t);
        first[t] = slurp(ex.output_dir / t);
    }
    first["results.json"] = slurp(ex.output_dir / "results.json");

    double mean_acc = 0.0;
    try {
        const auto results = nlohmann::json::parse(first["results.json"]);
        const auto& model = results.at("models").at(0);
        v.require(model.at("runs").size() == 20, "expected 20 runs");
        mean_acc = model.at("summary").at("accuracy").at("mean").get<double>();
        for (const auto& [name, s] : model.at("summary").items())
            v.require(s.at("max").get<double>() >= s.at("mean").get<double>(), "max < mean for " + name);
        for (const auto& run : model.at("runs")) audit.record(run.at("max_kkt_violation").get<double>(), cfg.svm.tolerance);
    } catch (const std::exception& e) {
        v.require(false, std::string("results file unreadable: ") + e.what());
    }
    v.require(mean_acc >= 0.95, "mean accuracy " + fmt("%.4f", mean_acc));

    std::ostringstream log2;
    v.require(abr::run_evaluate(cfg, log2) == abr::exit_ok, "rerun failed");
    for (const auto& [name, bytes] : first)
        v.require(slurp(ex.output_dir / name) == bytes, name + " differs on rerun");

    if (v.pass)
        v.detail = "187 samples x 20 repeats x 5 folds, mean accuracy " + fmt("%.4f", mean_acc) +
                   ", rerun byte-identical, " + fmt("%.1f", secs) + " s";
    return v;
}

Verdict sample_std_examples() {
    Verdict v;
    const double s = abr::sample_std(std::vector<double>{0.94, 0.95, 0.93, 0.95, 0.94});
    v.require(std::abs(s - 0.008367) <= 1e-6, "std " + fmt("%.9f", s));
    v.require(abr::sample_std(std::vector<double>{0.9, 0.9, 0.9, 0.9}) == 0.0, "constant input not 0");
    bool threw = false;
    try {
        abr::sample_std(std::vector<double>{0.9});
    } catch (const abr::Error&) {
        threw = true;
    }
    v.require(threw, "singleton accepted");
    if (v.pass) v.detail = "std " + fmt("%.6f", s) + ", constant -> 0, singleton -> error";
    return v;
}

bool bit_equal(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
}

template <typename Decode>
bool every_corruption_rejected(std::vector<std::byte> bytes, Decode decode, std::size_t& cases) {
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        for (std::byte mask : {std::byte{0x01}, std::byte{0x80}}) {
            bytes[i] ^= mask;
            ++cases;
            bool rejected = false;
            try {
                decode(std::span<const std::byte>(bytes));
            } catch (const abr::ChecksumError&) {
                rejected = true;
            } catch (...) {
            }
            bytes[i] ^= mask;
            if (!rejected) return false;
        }
    }
    for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 8) {
        ++cases;
        bool rejected = false;
        try {
            decode(std::span<const std::byte>(bytes).first(len));
        } catch (const abr::ChecksumError&) {
            rejected = true;
        } catch (...) {
        }
        if (!rejected) return false;
    }
    return true;
}

Verdict serialization() {
    Verdict v;
    const auto dir = fs::temp_directory_path() / "abr_acceptance_io";
    fs::create_directories(dir);
    abr::Rng rng(99);
    std::size_t corruption_cases = 0;

    std::vector<abr::FeatureVector> vectors;
    for (std::size_t i = 0; i < 37; ++i) {
        abr::FeatureVector fv{"sample-" + std::to_string(i), "ResNet50", std::vector<double>(64)};
        for (auto& x : fv.values) x = std::ldexp(2.0 * abr::uniform_unit(rng()) - 1.0, static_cast<int>(rng() % 200) - 100);
        vectors.push_back(std::move(fv));
    }
    vectors[0].values[0] = -0.0;
    vectors[0].values[1] = std::numeric_limits<double>::denorm_min();
    vectors[0].values[2] = std::numeric_limits<double>::max();
    vectors[0].values[3] = std::nextafter(1.0, 2.0);
    const auto path = dir / "ResNet50.abrf";
    abr::write_cache(vectors, path);
    const auto back = abr::read_cache(path);
    bool exact = back.size() == vectors.size();
    for (std::size_t i = 0; exact && i < back.size(); ++i) {
        exact = back[i].sample_id == vectors[i].sample_id && back[i].model_name == vectors[i].model_name &&
                back[i].values.size() == vectors[i].values.size();
        for (std::size_t j = 0; exact && j < back[i].values.size(); ++j) exact = bit_equal(back[i].values[j], vectors[i].values[j]);
    }
    v.require(exact, "feature cache roundtrip not bit-exact");
    const auto cache_bytes = abr::encode_feature_cache(std::span<const abr::FeatureVector>(vectors).first(3));
    v.require(every_corruption_rejected(
                  cache_bytes, [](std::span<const std::byte> b) { abr::decode_feature_cache(b, "cache"); },
                  corruption_cases),
              "corrupted feature cache accepted or rejected without a checksum error");

    const auto pts = abr::testing::separable_blobs(40, 3, 0.0, 5);
    abr::SvmParams p;
    const auto trained = abr::train_smo(pts.X, pts.y, p);
    audit.record(trained, pts.X, p.tolerance);
    abr::save_svm(trained.model, dir / "model.svm");
    const auto loaded = abr::load_svm(dir / "model.svm");
    v.require(loaded == trained.model && abr::encode_svm(loaded) == abr::encode_svm(trained.model),
              "svm model roundtrip not bit-exact");
    v.require(every_corruption_rejected(
                  abr::encode_svm(trained.model), [](std::span<const std::byte> b) { abr::decode_svm(b); },
                  corruption_cases),
              "corrupted svm model accepted or rejected without a checksum error");
    if (v.pass)
        v.detail = "feature cache and svm model bit-exact; " + std::to_string(corruption_cases) +
                   " corruptions rejected with checksum errors";
    return v;
}

Verdict kkt_audit() {
    Verdict v;
    v.require(audit.trainings > 0, "no trainings audited");
    v.require(audit.worst_ratio <= 10.0, "worst violation " + fmt("%.3g", audit.worst_ratio) + " x tolerance");
    if (v.pass)
        v.detail = std::to_string(audit.trainings) + " trainings, worst violation " + fmt("%.3g", audit.worst_ratio) +
                   " x tolerance";
    return v;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Verdict()> check;
    };
    // The KKT audit runs last so it covers every training the other checks did.
    const Criterion criteria[] = {
        {"metric-oracle", metric_oracle},
        {"smo-vs-qp-oracle", smo_vs_qp},
        {"svm-sanity", svm_sanity},
        {"auc-mann-whitney", auc_mann_whitney},
        {"stratified-folds", stratified_folds},
        {"end-to-end-mock", end_to_end},
        {"sample-std", sample_std_examples},
        {"serialization-roundtrip", serialization},
        {"kkt-audit", kkt_audit},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str());
        std::fflush(stdout);
        failures += v.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
