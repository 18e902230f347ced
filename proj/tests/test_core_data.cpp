#include "calibal/core_data.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <set>

using namespace calibal;
using calibal::testing::blocks;

namespace {

std::vector<std::vector<int>> per_fold_class_counts(const Dataset& d, const FoldPlan& plan) {
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(plan.k), std::vector<int>(d.n_classes(), 0));
    for (std::size_t i = 0; i < d.size(); ++i) ++counts[plan.assignment[i]][*d[i].label];
    return counts;
}

} // namespace

TEST_CASE("dataset construction validates ids, dimensions and labels") {
    CHECK_ERROR(Dataset({{0, {1.0}, 0}, {0, {2.0}, 1}}, 2), ErrorCode::InvalidArgument);
    CHECK_ERROR(Dataset({{0, {1.0}, 0}, {1, {2.0, 3.0}, 1}}, 2), ErrorCode::DimensionMismatch);
    CHECK_ERROR(Dataset({{0, {1.0}, 2}}, 2), ErrorCode::LabelOutOfRange);
    CHECK_ERROR(Dataset({}, 1), ErrorCode::InvalidArgument);
    const Dataset d({{5, {1.0}, 0}, {7, {2.0}, std::nullopt}}, 3);
    CHECK(d.dim() == 1);
    CHECK_FALSE(d.fully_labeled());
    CHECK_ERROR(d.labels(), ErrorCode::UnlabeledInstance);
    CHECK(d.class_counts() == std::vector<std::size_t>{1, 0, 0});
    CHECK_FALSE(blocks({2, 2}).without_labels().fully_labeled());
}

TEST_CASE("70/20/10 over ten folds gives exactly 7/2/1 per fold") {
    const Dataset d = blocks({70, 20, 10});
    const FoldPlan plan = stratified_kfold(d, 10, RngSeed{3});
    for (const auto& fold : per_fold_class_counts(d, plan)) CHECK(fold == std::vector<int>{7, 2, 1});
}

TEST_CASE("3518 instances split into folds of 351 or 352") {
    // Three imbalanced classes whose sizes are not multiples of ten.
    const Dataset d = blocks({2991, 352, 175}, 1);
    REQUIRE(d.size() == 3518);
    const FoldPlan plan = stratified_kfold(d, 10, RngSeed{11});
    for (int f = 0; f < 10; ++f) {
        const auto n = plan.members(f).size();
        CHECK((n == 351 || n == 352));
    }
}

TEST_CASE("fold plans are deterministic per seed") {
    const Dataset d = blocks({40, 30, 12});
    CHECK(stratified_kfold(d, 5, RngSeed{9}).assignment == stratified_kfold(d, 5, RngSeed{9}).assignment);
    CHECK(stratified_kfold(d, 5, RngSeed{9}).assignment != stratified_kfold(d, 5, RngSeed{10}).assignment);
}

TEST_CASE("stratified_kfold error cases") {
    CHECK_ERROR(stratified_kfold(blocks({20, 4}), 5, RngSeed{1}), ErrorCode::ClassTooSmall);
    CHECK_ERROR(stratified_kfold(blocks({20, 20}).without_labels(), 5, RngSeed{1}), ErrorCode::UnlabeledInstance);
}

TEST_CASE("property: per-class fold counts differ by at most one") {
    Rng rng(RngSeed{77});
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(9));
        const int n_classes = 2 + static_cast<int>(rng.below(3));
        std::vector<int> counts;
        for (int c = 0; c < n_classes; ++c) counts.push_back(k + static_cast<int>(rng.below(60)));
        const Dataset d = blocks(counts, 1, trial);
        const FoldPlan plan = stratified_kfold(d, k, RngSeed{rng.next()});
        const auto per_fold = per_fold_class_counts(d, plan);
        for (int c = 0; c < n_classes; ++c) {
            int lo = 1 << 30, hi = 0;
            for (const auto& f : per_fold) {
                lo = std::min(lo, f[c]);
                hi = std::max(hi, f[c]);
            }
            CHECK(hi - lo <= 1);
        }
        std::size_t lo = d.size(), hi = 0;
        for (int f = 0; f < k; ++f) {
            lo = std::min(lo, plan.members(f).size());
            hi = std::max(hi, plan.members(f).size());
        }
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("the explicit 1/1/3/5 spec puts three folds in the pool") {
    const Dataset d = blocks({70, 20, 10});
    const FoldPlan plan = stratified_kfold(d, 10, RngSeed{5});
    const SplitSpec spec{{0}, {1}, {2, 3, 4}, {5, 6, 7, 8, 9}};
    const Split s = assemble_split(d, plan, spec);
    CHECK(s.pool.size() == 30);
    CHECK(s.train.size() == 50);
    CHECK(s.test.size() == 10);
    CHECK(s.calibration.size() == 10);
}

TEST_CASE("rotation template matches the 5/1/1/3 geometry for every offset") {
    for (int offset = 0; offset < 10; ++offset) {
        const SplitSpec spec = SplitSpec::rotation(10, offset);
        spec.validate(10);
        CHECK(spec.test_folds == std::vector<int>{offset});
        CHECK(spec.calibration_folds == std::vector<int>{(offset + 1) % 10});
        CHECK(spec.pool_folds.size() == 3);
        CHECK(spec.train_folds.size() == 5);
    }
    CHECK_ERROR(SplitSpec::rotation(3, 0), ErrorCode::InvalidSpec);
}

TEST_CASE("overlapping or incomplete specs are rejected") {
    const SplitSpec overlap{{0}, {1}, {2, 3, 4}, {0, 5, 6, 7, 8, 9}};
    CHECK_ERROR(overlap.validate(10), ErrorCode::InvalidSpec);
    const SplitSpec missing{{0}, {1}, {2, 3, 4}, {5, 6, 7, 8}};
    CHECK_ERROR(missing.validate(10), ErrorCode::InvalidSpec);
    const Dataset d = blocks({30, 30});
    CHECK_ERROR(assemble_split(d, stratified_kfold(d, 10, RngSeed{1}), overlap), ErrorCode::InvalidSpec);
}

TEST_CASE("property: assemble_split partitions the dataset ids") {
    const Dataset d = blocks({61, 23, 17});
    for (int offset = 0; offset < 10; ++offset) {
        const Split s = assemble_split(d, stratified_kfold(d, 10, RngSeed{offset + 1u}), SplitSpec::rotation(10, offset));
        std::multiset<std::int64_t> ids;
        for (const Dataset* part : {&s.train, &s.test, &s.calibration, &s.pool}) {
            for (const auto& inst : *part) ids.insert(inst.id);
        }
        CHECK(ids.size() == d.size());
        std::set<std::int64_t> unique(ids.begin(), ids.end());
        CHECK(unique.size() == d.size());
        for (const auto& inst : d) CHECK(unique.count(inst.id) == 1);
    }
}

TEST_CASE("derived seeds are stable and tag-sensitive") {
    const RngSeed base{42};
    CHECK(derive_seed(base, {1, 2}) == derive_seed(base, {1, 2}));
    CHECK_FALSE(derive_seed(base, {1, 2}) == derive_seed(base, {2, 1}));
    Rng a(base), b(base);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng r(RngSeed{5});
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
    }
}
