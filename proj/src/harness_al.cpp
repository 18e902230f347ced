#include "calibal/errors.hpp"
#include "calibal/harness.hpp"
#include "harness_internal.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <map>
#include <tuple>

namespace calibal {

namespace {

constexpr std::uint64_t kAlTag = 2;

struct AlUnit {
    int fold;
    int experiment;
    std::size_t threshold_index;
    std::size_t model_index;
};

AlRun run_unit(const ExperimentConfig& config, const Dataset& dataset, const FoldPlan& plan, const AlUnit& unit) {
    const NamedModel& named = config.models[unit.model_index];
    AlRun run;
    run.row.experiment = unit.experiment;
    run.row.threshold = config.thresholds[unit.threshold_index];
    run.row.model = named.name;
    run.row.fold = unit.fold;
    try {
        const Split split = assemble_split(dataset, plan, SplitSpec::rotation(config.folds, unit.fold));
        const RngSeed seed = derive_seed(config.seed, {kAlTag, static_cast<std::uint64_t>(unit.fold),
                                                       static_cast<std::uint64_t>(unit.experiment), unit.model_index,
                                                       unit.threshold_index});
        AlConfig al = AlConfig::experiment(unit.experiment, run.row.threshold, named.spec, seed);
        al.model.seed = derive_seed(seed, {0x6d6f64ULL});
        al.stream_keep_prob = config.stream_keep_prob;
        al.retrain_every = config.retrain_every;
        al.calibration = config.al_calibration;
        al.use_soft_labels_in_training = config.use_soft_labels_in_training;
        al.bins = config.bins;
        al.mi_bins = config.mi_bins;
        run.result = run_active_learning(al, split);
        run.row.quartiles = quartile_summary(run.result);
        run.row.savings = savings_report(run.result);
    } catch (const std::exception& e) {
        run.row.ok = false;
        run.row.error = e.what();
    }
    return run;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sem_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

} // namespace

std::size_t AlSuiteResult::error_rows() const {
    std::size_t n = 0;
    for (const auto& run : runs) n += run.row.ok ? 0 : 1;
    return n;
}

AlSuiteResult run_al_suite(const ExperimentConfig& config) {
    config.validate();
    return run_al_suite(config, load_dataset(config));
}

AlSuiteResult run_al_suite(const ExperimentConfig& config, const Dataset& dataset) {
    config.validate();
    if (config.experiments.empty() || config.thresholds.empty()) {
        throw Error(ErrorCode::InvalidConfig, "the active-learning suite needs experiments and thresholds");
    }
    const FoldPlan plan = suite_fold_plan(config, dataset);
    std::vector<AlUnit> units;
    for (int e : config.experiments) {
        for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
            for (std::size_t m = 0; m < config.models.size(); ++m) {
                for (int fold : config.active_rotations()) units.push_back({fold, e, t, m});
            }
        }
    }
    AlSuiteResult result;
    result.runs.resize(units.size());
    detail::parallel_for(units.size(), config.jobs,
                         [&](std::size_t i) { result.runs[i] = run_unit(config, dataset, plan, units[i]); });

    std::vector<AlRunRow> rows;
    rows.reserve(result.runs.size());
    for (const auto& run : result.runs) rows.push_back(run.row);
    result.quartiles = quartile_table(rows, false, config.alpha);
    result.per_model = quartile_table(rows, true, config.alpha);
    result.savings = savings_table(rows);
    result.alpha = config.alpha;
    return result;
}

std::vector<QuartileTableRow> quartile_table(std::span<const AlRunRow> rows, bool per_model, double alpha) {
    using Key = std::tuple<int, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& row : rows) {
        Key key{row.experiment, row.threshold, per_model ? row.model : std::string()};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        if (!row.ok) continue;
        it->second.first.push_back(row.quartiles.q1_auc_mean);
        it->second.second.push_back(row.quartiles.q4_auc_mean);
    }
    std::vector<QuartileTableRow> out;
    for (const auto& key : order) {
        const auto& [q1, q4] = groups.at(key);
        QuartileTableRow t;
        t.experiment = std::get<0>(key);
        t.threshold = std::get<1>(key);
        t.model = std::get<2>(key);
        t.runs = q1.size();
        if (!q1.empty()) {
            t.q1_mean = mean_of(q1);
            t.q4_mean = mean_of(q4);
            t.q1_sem = sem_of(q1);
            t.q4_sem = sem_of(q4);
        }
        if (q1.size() >= 2) t.significant = paired_significance(q1, q4, alpha);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<SavingsTableRow> savings_table(std::span<const AlRunRow> rows) {
    struct Acc {
        std::size_t total = 0, machine = 0, soft_correct = 0, model_correct = 0, similarity_correct = 0;
    };
    using Key = std::pair<int, double>;
    std::vector<Key> order;
    std::map<Key, Acc> groups;
    for (const auto& row : rows) {
        auto [it, inserted] = groups.try_emplace({row.experiment, row.threshold});
        if (inserted) order.push_back(it->first);
        if (!row.ok) continue;
        Acc& a = it->second;
        a.total += row.savings.total;
        a.machine += row.savings.machine;
        a.soft_correct += row.savings.soft_correct;
        a.model_correct += row.savings.model_correct;
        a.similarity_correct += row.savings.similarity_correct;
    }
    std::vector<SavingsTableRow> out;
    for (const auto& key : order) {
        const Acc& a = groups.at(key);
        const OracleKind oracle = AlConfig::experiment(key.first, 0.5, ModelSpec{}, RngSeed{}).oracle;
        SavingsTableRow r;
        r.experiment = key.first;
        r.threshold = key.second;
        r.decisions = a.total;
        const double total = static_cast<double>(a.total);
        if (a.total > 0) {
            r.soft_labeled = static_cast<double>(a.machine) / total;
            if (oracle != OracleKind::A) r.model_ok = static_cast<double>(a.model_correct) / total;
            if (oracle == OracleKind::C) r.similarity_ok = static_cast<double>(a.similarity_correct) / total;
        }
        if (a.machine > 0) r.soft_labeled_ok = static_cast<double>(a.soft_correct) / static_cast<double>(a.machine);
        out.push_back(r);
    }
    return out;
}

bool paired_significance(std::span<const double> before, std::span<const double> after, double alpha) {
    if (before.size() != after.size() || before.size() < 2) {
        throw Error(ErrorCode::LengthMismatch, "paired samples need equal lengths >= 2, got " +
                                                   std::to_string(before.size()) + " and " +
                                                   std::to_string(after.size()));
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    }
    const std::size_t n = before.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = after[i] - before[i];
    const double m = mean_of(d);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return m != 0.0;
    const double t = m / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return p < alpha;
}

} // namespace calibal
