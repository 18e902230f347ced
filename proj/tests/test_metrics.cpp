#include "calibal/metrics.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace calibal;
using calibal::testing::auc_pair_count;
using calibal::testing::transport_oracle;

namespace {

Histogram random_histogram(int bins, Rng& rng) {
    Histogram h{std::vector<double>(bins)};
    double sum = 0.0;
    for (double& m : h.mass) {
        m = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
        sum += m;
    }
    if (sum == 0.0) {
        h.mass[0] = 1.0;
        sum = 1.0;
    }
    for (double& m : h.mass) m /= sum;
    return h;
}

Histogram point(int bin, int bins) {
    Histogram h{std::vector<double>(bins, 0.0)};
    h.mass[bin] = 1.0;
    return h;
}

// (1 - t) * a + t * b; W1 against `a` is then exactly t * W1(a, b).
Histogram mix(const Histogram& a, const Histogram& b, double t) {
    Histogram h = a;
    for (std::size_t i = 0; i < h.mass.size(); ++i) h.mass[i] = (1 - t) * a.mass[i] + t * b.mass[i];
    return h;
}

} // namespace

TEST_CASE("binary AUC examples") {
    CHECK(auc_binary(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
    CHECK(auc_pair_count({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
    CHECK(auc_binary(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc_binary(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{0, 1, 0, 1}) == 0.5);
    CHECK_ERROR(auc_binary(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ErrorCode::SingleClass);
    CHECK_ERROR(auc_binary(std::vector<double>{0.1, NAN, 0.3}, std::vector<int>{0, 1, 1}), ErrorCode::NonFiniteValue);
}

TEST_CASE("property: AUC matches pair counting and ignores monotone transforms") {
    Rng rng(RngSeed{31});
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 10) / 10;
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 0;
        y[1] = 1;
        const double auc = auc_binary(s, y);
        CHECK(std::fabs(auc - auc_pair_count(s, y)) <= 1e-12);
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
        CHECK(auc_binary(t, y) == auc);
    }
}

TEST_CASE("weighted one-vs-rest AUC") {
    Rng rng(RngSeed{32});
    ScoreMatrix two;
    std::vector<int> y;
    std::vector<double> col1;
    for (int i = 0; i < 40; ++i) {
        const double p = rng.uniform();
        two.push_back({1 - p, p});
        col1.push_back(p);
        y.push_back(i % 2);
    }
    CHECK(auc_ovr_weighted(two, y) == doctest::Approx(auc_binary(col1, y)).epsilon(1e-12));

    ScoreMatrix perfect;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        const int c = i < 25 ? 0 : i < 28 ? 1 : 2;
        std::vector<double> row(3, 0.05);
        row[c] = 0.9;
        perfect.push_back(row);
        labels.push_back(c);
    }
    CHECK(auc_ovr_weighted(perfect, labels) == 1.0);
    CHECK_ERROR(auc_ovr_weighted(ScoreMatrix{{0.6, 0.4}, {0.7, 0.3}}, std::vector<int>{0, 0}),
                ErrorCode::DegenerateLabels);
    // Weighted mean arithmetic with supports 70/20/10.
    CHECK(0.7 * 0.9 + 0.2 * 0.8 + 0.1 * 0.7 == doctest::Approx(0.86));
}

TEST_CASE("weighted AUC over 70/20/10 supports is the support-weighted mean") {
    Rng rng(RngSeed{33});
    ScoreMatrix m;
    std::vector<int> y;
    for (int i = 0; i < 100; ++i) {
        const int c = i < 70 ? 0 : i < 90 ? 1 : 2;
        std::vector<double> row(3);
        for (int k = 0; k < 3; ++k) row[k] = rng.uniform() + (k == c ? 0.5 : 0.0);
        m.push_back(row);
        y.push_back(c);
    }
    double expect = 0.0;
    const double support[3] = {0.7, 0.2, 0.1};
    for (int c = 0; c < 3; ++c) {
        std::vector<double> col;
        std::vector<int> bin;
        for (int i = 0; i < 100; ++i) {
            col.push_back(m[i][c]);
            bin.push_back(y[i] == c);
        }
        expect += support[c] * auc_pair_count(col, bin);
    }
    CHECK(auc_ovr_weighted(m, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ECE examples") {
    CHECK(ece(ScoreMatrix{{1.0, 0.0}, {0.0, 1.0}}, std::vector<int>{0, 1}) == 0.0);
    ScoreMatrix s;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
        s.push_back({0.8, 0.2});
        y.push_back(i < 5 ? 0 : 1);
    }
    CHECK(ece(s, y) == doctest::Approx(0.3));

    Rng rng(RngSeed{34});
    ScoreMatrix calibrated;
    std::vector<int> labels;
    for (int i = 0; i < 10000; ++i) {
        const double conf = 0.5 + 0.5 * rng.uniform();
        calibrated.push_back({conf, 1 - conf});
        labels.push_back(rng.bernoulli(conf) ? 0 : 1);
    }
    CHECK(ece(calibrated, labels) < 0.01);
    const auto bins = reliability_bins(calibrated, labels);
    CHECK(bins.size() == 10);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    CHECK(total == 10000);
}

TEST_CASE("density histograms") {
    const Histogram zeros = density_histogram(std::vector<double>(7, 0.0), 10);
    CHECK(zeros.mass[0] == 1.0);
    CHECK(density_histogram(std::vector<double>{1.0}, 10).mass[9] == 1.0);
    Rng rng(RngSeed{35});
    std::vector<double> u(10000);
    for (double& v : u) v = rng.uniform();
    const Histogram h = density_histogram(u, 10);
    double sum = 0.0;
    for (double m : h.mass) {
        CHECK(std::fabs(m - 0.1) <= 0.01);
        sum += m;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_ERROR(density_histogram(std::vector<double>{}, 10), ErrorCode::EmptyInput);
    CHECK_ERROR(density_histogram(std::vector<double>{1.5}, 10), ErrorCode::OutOfRange);
}

TEST_CASE("Wasserstein examples") {
    Rng rng(RngSeed{36});
    const Histogram h = random_histogram(10, rng);
    CHECK(wasserstein1(h, h) == 0.0);
    CHECK(wasserstein1(point(0, 10), point(9, 10)) == doctest::Approx(0.9).epsilon(1e-12));
    const Histogram half{{0.5, 0.5}}, left{{1.0, 0.0}};
    CHECK(wasserstein1(half, left) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(transport_oracle(half.mass, left.mass) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_ERROR(wasserstein1(half, point(0, 3)), ErrorCode::BinCountMismatch);
}

TEST_CASE("property: Wasserstein matches the transport oracle for B <= 4") {
    Rng rng(RngSeed{37});
    for (int trial = 0; trial < 200; ++trial) {
        const int bins = 2 + static_cast<int>(rng.below(3));
        const Histogram a = random_histogram(bins, rng), b = random_histogram(bins, rng);
        CHECK(std::fabs(wasserstein1(a, b) - transport_oracle(a.mass, b.mass)) <= 1e-9);
    }
}

TEST_CASE("property: Wasserstein is a bounded metric") {
    Rng rng(RngSeed{38});
    for (int trial = 0; trial < 2000; ++trial) {
        const Histogram a = random_histogram(10, rng), b = random_histogram(10, rng), c = random_histogram(10, rng);
        const double ab = wasserstein1(a, b);
        CHECK(ab == doctest::Approx(wasserstein1(b, a)).epsilon(1e-14));
        CHECK(ab > 0.0);
        CHECK(ab <= 1.0);
        CHECK(wasserstein1(a, c) <= ab + wasserstein1(b, c) + 1e-12);
    }
}

TEST_CASE("reference histograms") {
    for (double m : reference_histogram(ReferenceKind::Pcm, 3, 10).mass) CHECK(m == doctest::Approx(0.1));
    const Histogram pcpccm = reference_histogram(ReferenceKind::Pcpccm, 3, 10);
    CHECK(pcpccm.mass[0] == doctest::Approx(2.0 / 3.0));
    CHECK(pcpccm.mass[9] == doctest::Approx(1.0 / 3.0));
    for (int b = 1; b < 9; ++b) CHECK(pcpccm.mass[b] == 0.0);
    const Histogram apcm = reference_histogram(ReferenceKind::Apcm, 2, 10);
    for (int b = 0; b < 5; ++b) CHECK(apcm.mass[b] == 0.0);
    for (int b = 5; b < 10; ++b) CHECK(apcm.mass[b] == doctest::Approx(0.2));
    // 1/3 falls inside bin 3, which keeps two thirds of a full bin's weight.
    const Histogram apcm3 = reference_histogram(ReferenceKind::Apcm, 3, 10);
    CHECK(apcm3.mass[3] / apcm3.mass[4] == doctest::Approx(2.0 / 3.0));
    double sum = 0.0;
    for (double m : apcm3.mass) sum += m;
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("APCS and MPCS extremes") {
    const Histogram ref = reference_histogram(ReferenceKind::Pcm, 3, 10);
    const std::vector<Histogram> same(3, ref);
    CHECK(apcs(1.0, same, ref).score == doctest::Approx(1.0));
    CHECK(mpcs(1.0, same, ref).score == doctest::Approx(1.0));
    CHECK(mpcs(0.5, same, ref).score == 0.0);
    const Histogram spike = point(0, 10);
    const Histogram far = point(9, 10);
    const std::vector<Histogram> worst(3, far);
    // W1 = 0.9 at most on bin midpoints, so the similarity term is 0.1 / 2.
    CHECK(apcs(0.5, worst, spike).score == doctest::Approx(0.05));
}

TEST_CASE("decompositions of the reported CART/Platt PCPCCM rows") {
    // A custom reference with enough transport headroom to realise the reported W1 means.
    const Histogram ref = point(0, 10);
    const Histogram far = point(9, 10);
    const double auc = 0.7913;
    const double w_apcs = 1.0 - 2.0 * 0.1688;
    const std::vector<Histogram> ha(3, mix(ref, far, w_apcs / 0.9));
    const CalibrationScore a = apcs(auc, ha, ref);
    CHECK(a.k_term == doctest::Approx(0.2913).epsilon(1e-9));
    CHECK(a.pcs_minus_k == doctest::Approx(0.1688).epsilon(1e-9));
    CHECK(std::fabs(a.score - 0.4601) <= 1e-4);
    CHECK(std::fabs(a.score - (a.k_term + a.pcs_minus_k)) <= 1e-12);

    const double w_mpcs = 1.0 - 0.3377;
    const std::vector<Histogram> hm(3, mix(ref, far, w_mpcs / 0.9));
    const CalibrationScore m = mpcs(auc, hm, ref);
    CHECK(m.k_term == doctest::Approx(0.5826).epsilon(1e-9));
    CHECK(m.pcs_minus_k == doctest::Approx(0.3377).epsilon(1e-9));
    CHECK(std::fabs(m.score - 0.1967) <= 1e-4);
}

TEST_CASE("property: score ranges and exact decompositions") {
    Rng rng(RngSeed{39});
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(4));
        std::vector<Histogram> hs;
        for (int i = 0; i < n; ++i) hs.push_back(random_histogram(10, rng));
        const double auc = rng.uniform();
        for (ReferenceKind kind : kAllReferences) {
            const Histogram ref = reference_histogram(kind, n, 10);
            const auto a = apcs(auc, hs, ref);
            const auto m = mpcs(auc, hs, ref);
            CHECK((a.score >= 0.0 && a.score <= 1.0));
            CHECK((m.score >= 0.0 && m.score <= 1.0));
            CHECK(std::fabs(a.score - (a.k_term + a.pcs_minus_k)) <= 1e-12);
            CHECK(std::fabs(m.score - m.k_term * m.pcs_minus_k) <= 1e-12);
            CHECK(mpcs(0.5, hs, ref).score == 0.0);
        }
    }
}

TEST_CASE("Pearson correlation") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(pearson(x, std::vector<double>{3, 5, 7, 9}) == doctest::Approx(1.0));
    CHECK(pearson(x, std::vector<double>{-1, -2, -3, -4}) == doctest::Approx(-1.0));
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
    CHECK_ERROR(pearson(x, std::vector<double>{1, 1, 1, 1}), ErrorCode::ZeroVariance);
    CHECK_ERROR(pearson(x, std::vector<double>{1, 2}), ErrorCode::LengthMismatch);
}

TEST_CASE("score_references covers the three reference kinds") {
    const ScoreMatrix s{{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}};
    const auto refs = score_references(0.9, s);
    REQUIRE(refs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(refs[i].kind == kAllReferences[i]);
        const auto expect = apcs(0.9, class_histograms(s), reference_histogram(kAllReferences[i], 3, 10));
        CHECK(refs[i].apcs.score == expect.score);
    }
}
