#include "calibal/classifiers.hpp"
#include "calibal/ingest.hpp"
#include "calibal/metrics.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

using namespace calibal;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

// Plug-in MI with equal-frequency bins: rank r of n goes to bin floor(r * bins / n), and a
// run of tied values takes the bin of its first rank.
double mi_oracle(const std::vector<double>& x, const std::vector<int>& y, int bins) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<int> bin(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t first = r;
        while (first > 0 && x[order[first - 1]] == x[order[r]]) --first;
        bin[order[r]] = static_cast<int>(first * static_cast<std::size_t>(bins) / n);
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> px, py;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{bin[i], y[i]}] += 1.0 / static_cast<double>(n);
        px[bin[i]] += 1.0 / static_cast<double>(n);
        py[y[i]] += 1.0 / static_cast<double>(n);
    }
    double mi = 0.0;
    for (const auto& [key, p] : joint) mi += p * std::log(p / (px[key.first] * py[key.second]));
    return mi;
}

double knn_auc(const SyntheticConfig& cfg) {
    const Dataset d = gen_synthetic(cfg);
    const Split s = assemble_split(d, stratified_kfold(d, 10, RngSeed{2}), SplitSpec::rotation(10, 0));
    const TrainedModel m = fit(ModelSpec{KnnParams{}}, s.train);
    std::vector<Instance> rest;
    for (const Dataset* part : {&s.test, &s.calibration, &s.pool}) rest.insert(rest.end(), part->begin(), part->end());
    const Dataset eval(rest, d.n_classes());
    return auc_ovr_weighted(predict_scores(m, eval), eval.labels());
}

} // namespace

TEST_CASE("three labeled csv rows") {
    const Dataset d = parse("# n_classes=3\nid,f0,f1,label\n10,0.5,1,0\n11,-2,3e-2,1\n12,1,1,2\n");
    CHECK(d.size() == 3);
    CHECK(d.n_classes() == 3);
    CHECK(d.labels() == std::vector<int>{0, 1, 2});
    CHECK(d[0].id == 0);
    CHECK(d[2].id == 2);
    CHECK(d[1].features == std::vector<double>{-2.0, 0.03});
}

TEST_CASE("a row missing one of 512 features is a dimension mismatch") {
    std::string text = "# n_classes=2\nid";
    for (int j = 0; j < 512; ++j) text += ",f" + std::to_string(j);
    text += ",label\n0";
    for (int j = 0; j < 512; ++j) text += ",1";
    text += ",0\n1";
    for (int j = 0; j < 511; ++j) text += ",1";
    text += ",1\n";
    CHECK_ERROR(parse(text), ErrorCode::DimensionMismatch);
}

TEST_CASE("csv without a label column yields unlabeled instances") {
    const Dataset d = parse("# n_classes=2\nid,f0\n0,1.5\n1,2.5\n");
    CHECK(d.size() == 2);
    for (const auto& inst : d) CHECK_FALSE(inst.label.has_value());
}

TEST_CASE("csv error reporting") {
    CHECK_ERROR(parse("# n_classes=2\nid,f0,label\n0,abc,1\n"), ErrorCode::ParseError);
    CHECK_ERROR(parse("# n_classes=2\nid,f0,label\n0,1,2\n"), ErrorCode::LabelOutOfRange);
    CHECK_ERROR(parse("id,f0,label\n0,1,1\n"), ErrorCode::ParseError);
    CHECK_ERROR(load_csv("/nonexistent/calibal.csv"), ErrorCode::Io);
    try {
        parse("# n_classes=2\nid,f0,label\n0,1,1\n1,2,7\n");
        FAIL("expected LabelOutOfRange");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("csv round trip preserves values and partial labels") {
    const Dataset d({{0, {0.1, -3.25e-7}, 1}, {1, {1.0 / 3.0, 2.0}, std::nullopt}}, 2);
    const auto path = std::filesystem::temp_directory_path() / "calibal_roundtrip.csv";
    write_csv(path, d);
    const Dataset back = load_csv(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].features == d[0].features);
    CHECK(back[1].features == d[1].features);
    CHECK(back[0].label == 1);
    CHECK_FALSE(back[1].label.has_value());
}

TEST_CASE("synthetic counts, determinism and validation") {
    SyntheticConfig cfg;
    cfg.counts = {300, 100, 50};
    cfg.dim = 16;
    cfg.seed = RngSeed{4};
    const Dataset a = gen_synthetic(cfg);
    CHECK(a.class_counts() == std::vector<std::size_t>{300, 100, 50});
    const Dataset b = gen_synthetic(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].features == b[i].features);
        CHECK(a[i].label == b[i].label);
    }
    SyntheticConfig bad = cfg;
    bad.counts = {300, 0, 50};
    CHECK_ERROR(gen_synthetic(bad), ErrorCode::InvalidConfig);
    bad = cfg;
    bad.spread = 0.0;
    CHECK_ERROR(gen_synthetic(bad), ErrorCode::InvalidConfig);
    bad = cfg;
    bad.dim = 0;
    CHECK_ERROR(gen_synthetic(bad), ErrorCode::InvalidConfig);
    const SyntheticConfig uc = SyntheticConfig::use_case(1000, RngSeed{1});
    CHECK(uc.counts == std::vector<int>{850, 100, 50});
}

TEST_CASE("well separated synthetic classes are easy for kNN") {
    SyntheticConfig cfg;
    cfg.counts = {300, 100, 50};
    cfg.dim = 16;
    cfg.separation = 8.0;
    cfg.seed = RngSeed{21};
    CHECK(knn_auc(cfg) > 0.95);
}

TEST_CASE("huge overlap drives AUC to chance") {
    SyntheticConfig cfg;
    cfg.counts = {300, 100, 50};
    cfg.dim = 16;
    cfg.overlap = 1e6;
    cfg.seed = RngSeed{21};
    CHECK(std::fabs(knn_auc(cfg) - 0.5) <= 0.05);
}

TEST_CASE("property: empirical class means approach the configured means") {
    for (int dim : {1, 4, 32}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SyntheticConfig cfg;
            cfg.counts = {400, 150, 60};
            cfg.dim = dim;
            cfg.spread = 1.5;
            cfg.seed = RngSeed{seed};
            const auto means = synthetic_class_means(cfg);
            const Dataset d = gen_synthetic(cfg);
            for (int c = 0; c < 3; ++c) {
                std::vector<double> sum(dim, 0.0);
                for (const auto& inst : d) {
                    if (*inst.label != c) continue;
                    for (int j = 0; j < dim; ++j) sum[j] += inst.features[j];
                }
                double err2 = 0.0;
                for (int j = 0; j < dim; ++j) {
                    const double e = sum[j] / cfg.counts[c] - means[c][j];
                    err2 += e * e;
                }
                // The bound scales with sqrt(dim) because the error is a dim-dimensional norm.
                CHECK(std::sqrt(err2) < 3.0 * cfg.spread * std::sqrt(dim) / std::sqrt(cfg.counts[c]));
            }
        }
    }
}

TEST_CASE("MI of a feature equal to a balanced 3-class label is ln 3") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        y.push_back(i % 3);
        x.push_back(i % 3);
    }
    CHECK(mutual_information(x, y, 3) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("MI of an independent feature is small and matches the plug-in oracle") {
    Rng rng(RngSeed{8});
    std::vector<double> x(10000);
    std::vector<int> y(10000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = static_cast<int>(rng.below(3));
    }
    const double mi = mutual_information(x, y, 16);
    CHECK(mi < 0.01);
    CHECK(mi == doctest::Approx(mi_oracle(x, y, 16)).epsilon(1e-12));
}

TEST_CASE("MI of a constant feature is zero; length mismatch is rejected") {
    const std::vector<double> x(50, 2.0);
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) y[i] = i % 2;
    CHECK(mutual_information(x, y, 16) == 0.0);
    CHECK_ERROR(mutual_information(std::vector<double>{1, 2}, std::vector<int>{0}, 4), ErrorCode::LengthMismatch);
}

TEST_CASE("property: MI matches the oracle, ignores relabeling and monotone transforms") {
    Rng rng(RngSeed{99});
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 20 + rng.below(300);
        const int bins = 2 + static_cast<int>(rng.below(15));
        std::vector<double> x(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.below(3));
            // Rounded values create ties.
            x[i] = std::round((rng.normal() + 0.7 * y[i]) * 4.0) / 4.0;
        }
        const double mi = mutual_information(x, y, bins);
        CHECK(mi >= 0.0);
        CHECK(mi == doctest::Approx(mi_oracle(x, y, bins)).epsilon(1e-10));
        std::vector<int> relabeled(n);
        for (std::size_t i = 0; i < n; ++i) relabeled[i] = (y[i] + 1) % 3;
        CHECK(mutual_information(x, relabeled, bins) == doctest::Approx(mi).epsilon(1e-12));
        std::vector<double> mono(n);
        for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(x[i]) * 3.0 + 1.0;
        CHECK(mutual_information(mono, y, bins) == doctest::Approx(mi).epsilon(1e-12));
    }
}

TEST_CASE("top-K size follows floor(sqrt(N)) clamped to d") {
    CHECK(top_k_size(1759, 512) == 41);
    CHECK(top_k_size(100, 512) == 10);
    CHECK(top_k_size(10000, 8) == 8);
    CHECK(top_k_size(1, 8) == 1);
}

TEST_CASE("feature selection ranks informative features and depends only on train") {
    SyntheticConfig cfg;
    cfg.counts = {120, 60, 40};
    cfg.dim = 30;
    cfg.seed = RngSeed{13};
    const Dataset d = gen_synthetic(cfg);
    const Split s = assemble_split(d, stratified_kfold(d, 10, RngSeed{3}), SplitSpec::rotation(10, 0));
    const FeatureSelection sel = select_top_k(s.train);
    CHECK(sel.selected_indices.size() == top_k_size(s.train.size(), 30));
    CHECK(sel.scores.size() == 30);
    for (std::size_t i = 1; i < sel.selected_indices.size(); ++i) {
        const int a = sel.selected_indices[i - 1], b = sel.selected_indices[i];
        CHECK((sel.scores[a] > sel.scores[b] || (sel.scores[a] == sel.scores[b] && a < b)));
    }

    // Scramble every non-train row; the selection must not move.
    std::vector<Instance> mutated = d.instances();
    std::vector<bool> in_train(d.size(), false);
    for (const auto& inst : s.train) in_train[inst.id] = true;
    for (auto& inst : mutated) {
        if (!in_train[inst.id]) std::fill(inst.features.begin(), inst.features.end(), 1e3);
    }
    const Dataset md(mutated, d.n_classes());
    const Split ms = assemble_split(md, stratified_kfold(md, 10, RngSeed{3}), SplitSpec::rotation(10, 0));
    const FeatureSelection again = select_top_k(ms.train);
    CHECK(again.selected_indices == sel.selected_indices);
    CHECK(again.scores == sel.scores);

    CHECK_ERROR(select_top_k(Dataset({}, 2)), ErrorCode::EmptyTrainSet);
}

TEST_CASE("feature selection ties go to the lower index") {
    std::vector<Instance> rows;
    for (int i = 0; i < 16; ++i) rows.push_back({i, {1.0, static_cast<double>(i % 2), static_cast<double>(i % 2)}, i % 2});
    const FeatureSelection sel = select_top_k(Dataset(rows, 2));
    CHECK(sel.selected_indices == std::vector<int>{1, 2, 0});
}
