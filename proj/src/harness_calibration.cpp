#include "calibal/errors.hpp"
#include "calibal/harness.hpp"
#include "harness_internal.hpp"

#include <map>

namespace calibal {

namespace {

constexpr std::uint64_t kCalibrationTag = 1;

struct Evaluation {
    CalibrationRow row;
    std::vector<ReliabilityBin> reliability;
};

struct CalibrationFixture {
    ScoreMatrix cal, test, pool;
    std::vector<int> cal_labels, test_labels, pool_labels;
};

Evaluation evaluate(const CalibrationMap& map, const CalibrationFixture& fx, int bins) {
    Evaluation ev;
    const ScoreMatrix test = calibrate(map, fx.test);
    const ScoreMatrix pool = calibrate(map, fx.pool);
    ev.row.test_auc_roc = auc_ovr_weighted(test, fx.test_labels);
    ev.row.auc_roc = auc_ovr_weighted(pool, fx.pool_labels);
    ev.row.ece = ece(pool, fx.pool_labels, bins);
    const auto refs = score_references(ev.row.test_auc_roc, pool, bins);
    for (std::size_t i = 0; i < ev.row.references.size(); ++i) ev.row.references[i] = refs[i];
    ev.reliability = reliability_bins(pool, fx.pool_labels, bins);
    return ev;
}

CalibrationRow error_row(const std::string& model, std::string technique, int fold, const std::exception& e) {
    CalibrationRow row;
    row.model = model;
    row.technique = std::move(technique);
    row.fold = fold;
    row.ok = false;
    row.error = e.what();
    return row;
}

std::vector<std::string> technique_labels(Technique t) {
    if (t == Technique::AhpcAdaptive) return {"ahpc_adaptive_start", "ahpc_adaptive_end"};
    return {std::string(to_string(t))};
}

struct UnitResult {
    std::vector<CalibrationRow> rows;
    std::vector<ReliabilityRow> reliability;
};

UnitResult run_unit(const ExperimentConfig& config, const Dataset& dataset, const FoldPlan& plan, int fold,
                    std::size_t model_index) {
    const NamedModel& named = config.models[model_index];
    UnitResult out;
    auto push = [&](Evaluation ev, const std::string& label) {
        ev.row.model = named.name;
        ev.row.technique = label;
        ev.row.fold = fold;
        for (std::size_t b = 0; b < ev.reliability.size(); ++b) {
            out.reliability.push_back({named.name, label, fold, static_cast<int>(b), ev.reliability[b]});
        }
        out.rows.push_back(std::move(ev.row));
    };

    CalibrationFixture fx;
    std::optional<TrainedModel> model;
    try {
        const Split split = assemble_split(dataset, plan, SplitSpec::rotation(config.folds, fold));
        const FeatureSelection selection = select_top_k(split.train, config.mi_bins);
        ModelSpec spec = named.spec;
        spec.seed = derive_seed(config.seed, {kCalibrationTag, static_cast<std::uint64_t>(fold), model_index});
        model.emplace(fit(spec, split.train, selection.selected_indices));
        fx.cal = predict_scores(*model, split.calibration.without_labels());
        fx.test = predict_scores(*model, split.test.without_labels());
        fx.pool = predict_scores(*model, split.pool.without_labels());
        fx.cal_labels = split.calibration.labels();
        fx.test_labels = split.test.labels();
        fx.pool_labels = split.pool.labels();
    } catch (const std::exception& e) {
        for (Technique t : config.techniques) {
            for (auto& label : technique_labels(t)) out.rows.push_back(error_row(named.name, label, fold, e));
        }
        return out;
    }

    for (Technique t : config.techniques) {
        const auto labels = technique_labels(t);
        try {
            CalibrationMap map = fit_calibration(t, fx.cal, fx.cal_labels, config.bins, config.compression);
            push(evaluate(map, fx, config.bins), labels[0]);
            if (t == Technique::AhpcAdaptive) {
                try {
                    AhpcState state = ahpc_update(std::get<AhpcState>(std::move(map)), fx.pool);
                    push(evaluate(state, fx, config.bins), labels[1]);
                } catch (const std::exception& e) {
                    out.rows.push_back(error_row(named.name, labels[1], fold, e));
                }
            }
        } catch (const std::exception& e) {
            for (auto& label : labels) out.rows.push_back(error_row(named.name, label, fold, e));
        }
    }
    return out;
}

} // namespace

std::size_t CalibrationSuiteResult::error_rows() const {
    std::size_t n = 0;
    for (const auto& row : folds) n += row.ok ? 0 : 1;
    return n;
}

CalibrationSuiteResult run_calibration_suite(const ExperimentConfig& config) {
    config.validate();
    return run_calibration_suite(config, load_dataset(config));
}

CalibrationSuiteResult run_calibration_suite(const ExperimentConfig& config, const Dataset& dataset) {
    config.validate();
    const FoldPlan plan = suite_fold_plan(config, dataset);
    const std::vector<int> rotations = config.active_rotations();
    const std::size_t n_models = config.models.size();
    std::vector<UnitResult> units(rotations.size() * n_models);
    detail::parallel_for(units.size(), config.jobs, [&](std::size_t i) {
        units[i] = run_unit(config, dataset, plan, rotations[i / n_models], i % n_models);
    });

    CalibrationSuiteResult result;
    for (auto& unit : units) {
        for (auto& row : unit.rows) result.folds.push_back(std::move(row));
        for (auto& rel : unit.reliability) result.reliability.push_back(std::move(rel));
    }
    result.summary = summarize_calibration(result.folds);
    result.correlations = calibration_correlations(result.summary);
    return result;
}

std::vector<CalibrationRow> summarize_calibration(std::span<const CalibrationRow> folds) {
    std::vector<CalibrationRow> summary;
    std::vector<std::size_t> counts;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& row : folds) {
        auto [it, inserted] = index.try_emplace({row.model, row.technique}, summary.size());
        if (inserted) {
            CalibrationRow s;
            s.model = row.model;
            s.technique = row.technique;
            for (std::size_t r = 0; r < s.references.size(); ++r) s.references[r].kind = kAllReferences[r];
            summary.push_back(std::move(s));
            counts.push_back(0);
        }
        if (!row.ok) continue;
        CalibrationRow& s = summary[it->second];
        ++counts[it->second];
        s.auc_roc += row.auc_roc;
        s.test_auc_roc += row.test_auc_roc;
        s.ece += row.ece;
        for (std::size_t r = 0; r < s.references.size(); ++r) {
            auto& a = s.references[r];
            const auto& b = row.references[r];
            a.apcs.score += b.apcs.score;
            a.apcs.k_term += b.apcs.k_term;
            a.apcs.pcs_minus_k += b.apcs.pcs_minus_k;
            a.mpcs.score += b.mpcs.score;
            a.mpcs.k_term += b.mpcs.k_term;
            a.mpcs.pcs_minus_k += b.mpcs.pcs_minus_k;
        }
    }
    for (std::size_t i = 0; i < summary.size(); ++i) {
        CalibrationRow& s = summary[i];
        s.fold = static_cast<int>(counts[i]);
        if (counts[i] == 0) {
            s.ok = false;
            s.error = "no successful folds";
            continue;
        }
        const double n = static_cast<double>(counts[i]);
        s.auc_roc /= n;
        s.test_auc_roc /= n;
        s.ece /= n;
        for (auto& ref : s.references) {
            for (CalibrationScore* c : {&ref.apcs, &ref.mpcs}) {
                c->score /= n;
                c->k_term /= n;
                c->pcs_minus_k /= n;
            }
        }
    }
    return summary;
}

std::vector<CorrelationRow> calibration_correlations(std::span<const CalibrationRow> summary) {
    std::vector<std::string> scopes{"all"};
    for (const auto& row : summary) {
        if (std::find(scopes.begin(), scopes.end(), row.model) == scopes.end()) scopes.push_back(row.model);
    }
    auto safe = [](const std::vector<double>& x, const std::vector<double>& y) -> std::optional<double> {
        if (x.size() < 2) return std::nullopt;
        try {
            return pearson(x, y);
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    std::vector<CorrelationRow> out;
    for (const auto& scope : scopes) {
        for (std::size_t r = 0; r < std::size(kAllReferences); ++r) {
            std::vector<double> e, a, apk, m, mpk;
            for (const auto& row : summary) {
                if (!row.ok || (scope != "all" && row.model != scope)) continue;
                e.push_back(row.ece);
                a.push_back(row.references[r].apcs.score);
                apk.push_back(row.references[r].apcs.pcs_minus_k);
                m.push_back(row.references[r].mpcs.score);
                mpk.push_back(row.references[r].mpcs.pcs_minus_k);
            }
            out.push_back({scope, kAllReferences[r], safe(e, a), safe(e, apk), safe(e, m), safe(e, mpk)});
        }
    }
    return out;
}

} // namespace calibal
