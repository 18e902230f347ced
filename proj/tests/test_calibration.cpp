#include "calibal/calibration.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>

using namespace calibal;

namespace {

double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

std::vector<double> normalized(std::vector<double> v) {
    const double s = sum_of(v);
    for (double& x : v) x /= s;
    return v;
}

// Random 3-class posteriors, labels drawn from them, and scores = posteriors cubed.
struct Overconfident {
    ScoreMatrix scores;
    std::vector<int> labels;
};

Overconfident overconfident(std::size_t n, std::uint64_t seed) {
    Rng rng(RngSeed{seed});
    Overconfident out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p(3);
        for (double& v : p) v = std::exp(1.2 * rng.normal());
        p = normalized(p);
        const double u = rng.uniform();
        out.labels.push_back(u < p[0] ? 0 : u < p[0] + p[1] ? 1 : 2);
        for (double& v : p) v = v * v * v;
        out.scores.push_back(normalized(p));
    }
    return out;
}

ScoreMatrix random_scores(std::size_t n, std::size_t classes, Rng& rng) {
    ScoreMatrix m;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(classes);
        for (double& v : row) v = rng.uniform() + 1e-3;
        m.push_back(normalized(row));
    }
    return m;
}

void check_simplex(const ScoreVector& s) {
    for (double v : s) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(std::fabs(sum_of(s) - 1.0) <= 1e-9);
}

} // namespace

TEST_CASE("zero Platt parameters give one half") {
    const PlattMap m{{0.0, 0.0}, {0.0, 0.0}};
    for (double f : {0.0, 0.3, 1.0}) {
        const auto out = calibrate_unnormalized(m, std::vector<double>{f, 1.0 - f});
        CHECK(out[0] == 0.5);
        CHECK(out[1] == 0.5);
    }
}

TEST_CASE("Platt target smoothing arithmetic") {
    CHECK(platt_targets(3, 8).first == doctest::Approx(0.8));
    CHECK(platt_targets(3, 8).second == doctest::Approx(0.1));
}

TEST_CASE("Platt recovers a known sigmoid") {
    Rng rng(RngSeed{17});
    std::vector<double> f(5000);
    std::vector<int> y(5000);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = rng.uniform();
        y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-4.0 * f[i] + 2.0))) ? 1 : 0;
    }
    const SigmoidParams p = fit_sigmoid(f, y);
    CHECK(std::fabs(p.a + 4.0) <= 0.15);
    CHECK(std::fabs(p.b - 2.0) <= 0.15);
    CHECK(p.iterations < 200);
}

TEST_CASE("Platt on separable data has negative slopes and is monotone") {
    ScoreMatrix scores;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        const double s = 0.55 + 0.4 * i / 100.0;
        const int c = i % 2;
        scores.push_back(c == 0 ? std::vector<double>{s, 1 - s} : std::vector<double>{1 - s, s});
        labels.push_back(c);
    }
    const PlattMap m = fit_platt(scores, labels);
    CHECK(m.a[0] < 0.0);
    CHECK(m.a[1] < 0.0);
    for (int i = 1; i < 50; ++i) {
        const double s1 = i / 50.0, s2 = (i + 1) / 50.0;
        const auto lo = calibrate_unnormalized(m, std::vector<double>{s1, 1 - s1});
        const auto hi = calibrate_unnormalized(m, std::vector<double>{s2, 1 - s2});
        CHECK(lo[0] < hi[0]);
        CHECK(lo[1] > hi[1]);
    }
}

TEST_CASE("Platt needs every class in the calibration labels") {
    const ScoreMatrix scores{{0.7, 0.2, 0.1}, {0.2, 0.7, 0.1}};
    CHECK_ERROR(fit_platt(scores, std::vector<int>{0, 1}), ErrorCode::MissingClass);
}

TEST_CASE("temperature one is the identity up to renormalization") {
    const TemperatureMap t{1.0, 1e-6};
    const std::vector<double> raw{0.2, 0.5, 0.3};
    const auto out = calibrate(t, raw);
    for (int c = 0; c < 3; ++c) CHECK(out[c] == doctest::Approx(raw[c]).epsilon(1e-12));
    const std::vector<double> unnormalized{0.1, 0.4, 0.3};
    const auto renorm = calibrate(t, unnormalized);
    for (int c = 0; c < 3; ++c) CHECK(renorm[c] == doctest::Approx(unnormalized[c] / 0.8).epsilon(1e-12));
}

TEST_CASE("huge temperature flattens to the uniform vector") {
    const auto out = calibrate(TemperatureMap{1e12, 1e-6}, std::vector<double>{0.9, 0.07, 0.03});
    for (double v : out) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("overconfident scores yield T > 1 at the NLL minimum") {
    const auto data = overconfident(3000, 5);
    const TemperatureMap t = fit_temperature(data.scores, data.labels);
    CHECK(t.temperature > 1.0);
    const double at_fit = temperature_nll(data.scores, data.labels, t.temperature);
    CHECK(at_fit <= temperature_nll(data.scores, data.labels, 1.0));
    // Grid scan over log T in [-4, 4].
    double best = INFINITY;
    for (int i = 0; i <= 800; ++i) best = std::min(best, temperature_nll(data.scores, data.labels, std::exp(-4.0 + i * 0.01)));
    CHECK(at_fit <= best + 1e-6);
    CHECK(t.temperature == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("property: temperature scaling preserves argmax and per-class order") {
    Rng rng(RngSeed{6});
    const ScoreMatrix scores = random_scores(300, 4, rng);
    for (double T : {0.05, 0.5, 1.0, 2.0, 30.0}) {
        const TemperatureMap m{T, 1e-6};
        for (const auto& row : scores) {
            const auto out = calibrate(m, row);
            check_simplex(out);
            CHECK(predicted_class(out) == predicted_class(row));
            const auto un = calibrate_unnormalized(m, row);
            for (std::size_t a = 0; a < row.size(); ++a) {
                for (std::size_t b = 0; b < row.size(); ++b) {
                    if (row[a] < row[b]) CHECK(un[a] < un[b]);
                }
            }
        }
    }
}

TEST_CASE("histogram calibration smoothing, midpoint fallback and lookup") {
    ScoreMatrix scores;
    std::vector<int> labels;
    // Ten class-0 scores in [0.6, 0.7), seven of them truly class 0.
    for (int i = 0; i < 10; ++i) {
        scores.push_back({0.65, 0.35});
        labels.push_back(i < 7 ? 0 : 1);
    }
    const HistogramGtMap m = fit_histogram_gt(scores, labels, 10);
    CHECK(m.value[0][6] == doctest::Approx(2.0 / 3.0));
    CHECK(m.support[0][6] == 10);
    CHECK(m.value[0][4] == doctest::Approx(0.45));
    const auto un = calibrate_unnormalized(m, std::vector<double>{0.73, 0.27});
    CHECK(un[0] == m.value[0][7]);
    CHECK(un[1] == m.value[1][2]);
    CHECK(bin_index(0.73, 10) == 7);
    CHECK(bin_index(1.0, 10) == 9);
    CHECK(bin_index(0.0, 10) == 0);
}

TEST_CASE("histogram calibration on perfectly separable scores") {
    ScoreMatrix scores;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        scores.push_back({0.95, 0.05});
        labels.push_back(0);
    }
    for (int i = 0; i < 50; ++i) {
        scores.push_back({0.02, 0.98});
        labels.push_back(1);
    }
    const HistogramGtMap m = fit_histogram_gt(scores, labels, 10);
    CHECK(m.value[0][9] == doctest::Approx(31.0 / 32.0));
    CHECK(m.value[0][0] == doctest::Approx(1.0 / 52.0));
}

TEST_CASE("property: histogram calibration reproduces exact smoothed frequencies") {
    Rng rng(RngSeed{12});
    for (int trial = 0; trial < 20; ++trial) {
        const int bins = 2 + static_cast<int>(rng.below(12));
        ScoreMatrix scores;
        std::vector<int> labels;
        std::vector<std::vector<int>> pos(2, std::vector<int>(bins, 0)), cnt(2, std::vector<int>(bins, 0));
        for (int i = 0; i < 400; ++i) {
            // Bin centres avoid any boundary ambiguity.
            const int b = static_cast<int>(rng.below(bins));
            const double s = (b + 0.5) / bins;
            const int y = rng.bernoulli(0.3) ? 0 : 1;
            scores.push_back({s, 1.0 - s});
            labels.push_back(y);
            ++cnt[0][b];
            pos[0][b] += y == 0;
            const int b1 = bins - 1 - b;
            ++cnt[1][b1];
            pos[1][b1] += y == 1;
        }
        const HistogramGtMap m = fit_histogram_gt(scores, labels, bins);
        for (int c = 0; c < 2; ++c) {
            for (int b = 0; b < bins; ++b) {
                const double expect = cnt[c][b] ? (pos[c][b] + 1.0) / (cnt[c][b] + 2.0) : (b + 0.5) / bins;
                CHECK(std::fabs(m.value[c][b] - expect) <= 1e-12);
            }
        }
    }
}

TEST_CASE("AHPC digests follow the model's own predictions") {
    const ScoreMatrix all_zero{{0.8, 0.1, 0.1}, {0.5, 0.3, 0.2}, {0.6, 0.35, 0.05}};
    const AhpcState s = fit_ahpc(all_zero, 10);
    CHECK(s.predicted[0].total_weight() == s.all[0].total_weight());
    CHECK(s.predicted[1].empty());
    CHECK(s.predicted[2].empty());
    Rng rng(RngSeed{2});
    const AhpcState r = fit_ahpc(random_scores(500, 3, rng), 10);
    for (int c = 0; c < 3; ++c) CHECK(r.predicted[c].total_weight() <= r.all[c].total_weight());
    CHECK_ERROR(fit_ahpc(ScoreMatrix{{1.2, -0.2}}, 10), ErrorCode::OutOfRange);
}

TEST_CASE("an AHPC bin fully predicted as class c maps to 1") {
    const ScoreMatrix scores{{0.85, 0.15}, {0.86, 0.14}, {0.3, 0.7}};
    const AhpcState s = fit_ahpc(scores, 10);
    const auto un = calibrate_unnormalized(s, std::vector<double>{0.87, 0.13});
    CHECK(un[0] == 1.0);
    CHECK(un[1] == 0.0);
    // Bins outside [min, max] of the class digest carry no mass and fall back to the midpoint.
    CHECK(ahpc_table(s)[0][0] == doctest::Approx(0.05));
    CHECK(ahpc_table(s)[0][9] == doctest::Approx(0.95));
}

TEST_CASE("fixed AHPC state depends only on the calibration scores") {
    Rng rng(RngSeed{4});
    const ScoreMatrix cal = random_scores(200, 3, rng);
    const AhpcState a = fit_ahpc(cal, 10);
    const ScoreMatrix pool_a = random_scores(100, 3, rng);
    const ScoreMatrix pool_b = random_scores(300, 3, rng);
    // Calibrating different pools never touches the state.
    (void)calibrate(a, pool_a);
    const std::string before = to_json(a).dump();
    (void)calibrate(a, pool_b);
    CHECK(to_json(a).dump() == before);
    CHECK(to_json(fit_ahpc(cal, 10)).dump() == before);
    CHECK(calibrate(a, pool_a[0]) == calibrate(a, pool_a[0]));
    CHECK_ERROR(ahpc_update(a, pool_a), ErrorCode::FixedModeUpdate);
}

TEST_CASE("adaptive AHPC updates") {
    Rng rng(RngSeed{8});
    const ScoreMatrix cal = random_scores(2000, 3, rng);
    const AhpcState s = fit_ahpc(cal, 10, AhpcMode::Adaptive);
    CHECK(to_json(ahpc_update(s, {})).dump() == to_json(s).dump());
    const AhpcState doubled = ahpc_update(s, cal);
    for (int c = 0; c < 3; ++c) CHECK(doubled.all[c].total_weight() > s.all[c].total_weight());

    // Doubling the multiset keeps each bin ratio at the exact-count ratio within digest tolerance.
    const auto t1 = ahpc_table(s), t2 = ahpc_table(doubled);
    for (int c = 0; c < 3; ++c) {
        for (int b = 0; b < 10; ++b) {
            double all = 0, pred = 0;
            for (const auto& row : cal) {
                if (bin_index(row[c], 10) != b) continue;
                all += 1;
                pred += predicted_class(row) == c;
            }
            if (all < 50) continue;
            const double exact = pred / all;
            // Bin masses carry at most 2% rank error of each digest's total weight.
            const double e_all = 0.02 * s.all[c].total_weight();
            const double e_pred = 0.02 * s.predicted[c].total_weight();
            const double bound = (e_pred + exact * e_all) / std::max(all - e_all, 1.0);
            CHECK(std::fabs(t1[c][b] - exact) <= bound);
            CHECK(std::fabs(t2[c][b] - exact) <= bound);
        }
    }
}

TEST_CASE("identity map and simplex outputs for every technique") {
    const std::vector<double> raw{0.2, 0.5, 0.3};
    CHECK(calibrate(IdentityMap{}, raw) == raw);
    Rng rng(RngSeed{9});
    const ScoreMatrix cal = random_scores(300, 3, rng);
    std::vector<int> labels;
    for (const auto& row : cal) labels.push_back(rng.bernoulli(0.7) ? predicted_class(row) : static_cast<int>(rng.below(3)));
    const ScoreMatrix probe = random_scores(200, 3, rng);
    for (Technique t : {Technique::None, Technique::Platt, Technique::Temperature, Technique::HistogramGt,
                        Technique::AhpcFixed, Technique::AhpcAdaptive}) {
        CAPTURE(to_string(t));
        const CalibrationMap map = fit_calibration(t, cal, labels);
        for (const auto& row : calibrate(map, probe)) check_simplex(row);
        const CalibrationMap back = calibration_map_from_json(to_json(map));
        CHECK(calibrate(back, probe) == calibrate(map, probe));
        CHECK(parse_technique(to_string(t)) == t);
    }
    CHECK_ERROR(calibrate(PlattMap{}, raw), ErrorCode::UnfittedMap);
    CHECK_ERROR(calibrate(HistogramGtMap{}, raw), ErrorCode::UnfittedMap);
    CHECK_ERROR(calibrate(AhpcState{}, raw), ErrorCode::UnfittedMap);
    CHECK_ERROR(parse_technique("isotonic"), ErrorCode::InvalidConfig);
}

TEST_CASE("NaN scores are rejected before fitting") {
    const ScoreMatrix scores{{0.7, 0.3}, {NAN, 0.5}, {0.2, 0.8}};
    const std::vector<int> labels{0, 0, 1};
    for (Technique t : {Technique::Platt, Technique::Temperature, Technique::HistogramGt, Technique::AhpcFixed}) {
        CHECK_ERROR(fit_calibration(t, scores, labels), ErrorCode::NonFiniteValue);
    }
}
