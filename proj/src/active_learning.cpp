#include "calibal/active_learning.hpp"

#include "calibal/errors.hpp"
#include "calibal/ingest.hpp"
#include "calibal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace calibal {

std::string_view to_string(AlSetting s) noexcept { return s == AlSetting::Pool ? "pool" : "stream"; }
std::string_view to_string(QueryStrategy q) noexcept { return q == QueryStrategy::Random ? "random" : "uncertainty"; }

std::string_view to_string(OracleKind o) noexcept {
    switch (o) {
    case OracleKind::A: return "A";
    case OracleKind::B: return "B";
    case OracleKind::C: return "C";
    }
    return "A";
}

std::string_view to_string(LabelSource s) noexcept {
    switch (s) {
    case LabelSource::Human: return "human";
    case LabelSource::MachineModel: return "machine_model";
    case LabelSource::MachineUnanimous: return "machine_unanimous";
    case LabelSource::Discarded: return "discarded";
    }
    return "human";
}

int similarity_oracle(const Instance& instance, const Dataset& labeled, RngSeed seed, std::span<const int> features) {
    const auto n = static_cast<std::size_t>(labeled.n_classes());
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (labeled[i].label) {
            members[static_cast<std::size_t>(*labeled[i].label)].push_back(i);
        }
    }
    Rng rng(seed);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
        if (members[c].empty()) {
            throw Error(ErrorCode::MissingClassExemplar, "no labeled exemplar for class " + std::to_string(c));
        }
        const Instance& exemplar = labeled[members[c][rng.below(members[c].size())]];
        if (exemplar.features.size() != instance.features.size()) {
            throw Error(ErrorCode::DimensionMismatch, "exemplar and instance dimensions differ");
        }
        double d2 = 0.0;
        auto accumulate = [&](std::size_t j) {
            const double diff = instance.features[j] - exemplar.features[j];
            d2 += diff * diff;
        };
        if (features.empty()) {
            for (std::size_t j = 0; j < instance.features.size(); ++j) accumulate(j);
        } else {
            for (int j : features) accumulate(static_cast<std::size_t>(j));
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(c);
        }
    }
    return best;
}

int ExemplarDistanceOracle::vote(const Instance& instance, const Dataset& labeled, std::span<const int> features,
                                 RngSeed seed) const {
    return similarity_oracle(instance, labeled, seed, features);
}

AlConfig AlConfig::experiment(int id, double threshold, ModelSpec model, RngSeed seed) {
    if (id < 1 || id > 8) {
        throw Error(ErrorCode::InvalidConfig, "experiment id must be in 1..8, got " + std::to_string(id));
    }
    AlConfig config;
    config.setting = id <= 4 ? AlSetting::Pool : AlSetting::Stream;
    const int row = (id - 1) % 4;
    config.query = row == 0 ? QueryStrategy::Random : QueryStrategy::Uncertainty;
    config.oracle = row == 2 ? OracleKind::B : row == 3 ? OracleKind::C : OracleKind::A;
    config.threshold = threshold;
    config.model = std::move(model);
    config.seed = seed;
    return config;
}

void AlConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "threshold must lie in (0, 1)");
    }
    if (!(stream_keep_prob >= 0.0 && stream_keep_prob <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "stream_keep_prob must lie in [0, 1]");
    }
    if (retrain_every < 1) {
        throw Error(ErrorCode::InvalidConfig, "retrain_every must be >= 1");
    }
    if (bins < 2 || mi_bins < 2) {
        throw Error(ErrorCode::InvalidConfig, "bins and mi_bins must be >= 2");
    }
    model.validate();
}

namespace {

// Model, feature selection and in-loop calibration map, rebuilt at every retrain point.
class Learner {
public:
    Learner(const AlConfig& config, const Split& split)
        : config_(config), split_(split), calibration_labels_(split.calibration.labels()),
          test_labels_(split.test.labels()) {}

    void retrain(const std::vector<Instance>& labeled) {
        const Dataset train(labeled, split_.train.n_classes());
        const FeatureSelection selection = select_top_k(train, config_.mi_bins);
        model_.emplace(fit(config_.model, train, selection.selected_indices));
        map_ = fit_calibration(config_.calibration, predict_scores(*model_, split_.calibration), calibration_labels_,
                               config_.bins);
        labeled_ = train;
    }

    ScoreVector score(const Instance& inst) const { return calibrate(map_, model_->score(inst.features)); }

    double test_auc() const {
        return auc_ovr_weighted(calibrate(map_, predict_scores(*model_, split_.test)), test_labels_);
    }

    const TrainedModel& model() const { return *model_; }
    const Dataset& labeled() const { return labeled_; }

private:
    const AlConfig& config_;
    const Split& split_;
    std::vector<int> calibration_labels_;
    std::vector<int> test_labels_;
    std::optional<TrainedModel> model_;
    CalibrationMap map_;
    Dataset labeled_;
};

class Run {
public:
    Run(const AlConfig& config, const Split& split)
        : config_(config), learner_(config, split), rng_(derive_seed(config.seed, {0x71756572ULL})),
          similarity_(config.similarity ? config.similarity : std::make_shared<ExemplarDistanceOracle>()) {
        config_.validate();
        if (split.pool.empty()) {
            throw Error(ErrorCode::EmptyPool, "active learning needs a non-empty pool");
        }
        for (const Instance& inst : split.pool) {
            if (!inst.label) {
                throw Error(ErrorCode::UnlabeledInstance, "pool instance " + std::to_string(inst.id) +
                                                              " has no held ground truth label");
            }
            truth_.emplace(inst.id, *inst.label);
        }
        labeled_ = split.train.instances();
        for (Instance& inst : labeled_) {
            if (!inst.label) {
                throw Error(ErrorCode::UnlabeledInstance, "train instance " + std::to_string(inst.id) + " has no label");
            }
        }
        // The learner only ever sees label-stripped pool rows.
        unlabeled_ = split.pool.without_labels().instances();
        result_.oracle = config.oracle;
        const std::size_t n = unlabeled_.size();
        for (std::size_t q = 1; q <= 4; ++q) {
            boundaries_.push_back((q * n + 3) / 4);
        }
    }

    AlRunResult pool() {
        retrain_and_snapshot(0);
        std::vector<Instance> remaining = unlabeled_;
        const std::size_t total = remaining.size();
        std::size_t acquired = 0;
        for (std::size_t step = 0; step < total; ++step) {
            ScoreMatrix scores;
            scores.reserve(remaining.size());
            for (const Instance& inst : remaining) {
                scores.push_back(learner_.score(inst));
            }
            std::size_t chosen = 0;
            if (config_.query == QueryStrategy::Random) {
                chosen = rng_.below(remaining.size());
            } else {
                for (std::size_t i = 1; i < scores.size(); ++i) {
                    if (max_score(scores[i]) < max_score(scores[chosen])) {
                        chosen = i;
                    }
                }
            }
            if (config_.observer) {
                config_.observer(PoolStepView{remaining, scores, chosen});
            }
            const Instance inst = remaining[chosen];
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
            const OracleDecision& d = decide(step, inst, scores[chosen], false);
            acquired += absorb(inst, d) ? 1 : 0;
            maybe_retrain(step + 1, total, acquired, true);
        }
        return std::move(result_);
    }

    AlRunResult stream() {
        retrain_and_snapshot(0);
        std::vector<Instance> arrivals = unlabeled_;
        Rng order_rng(derive_seed(config_.seed, {0x6172726976ULL}));
        order_rng.shuffle(std::span<Instance>(arrivals));
        const std::size_t total = arrivals.size();
        std::size_t acquired = 0;
        for (std::size_t step = 0; step < total; ++step) {
            const Instance& inst = arrivals[step];
            const ScoreVector scores = learner_.score(inst);
            bool added = false;
            if (config_.query == QueryStrategy::Random) {
                OracleDecision d = base_decision(step, inst, scores);
                if (rng_.bernoulli(config_.stream_keep_prob)) {
                    set_label(d, LabelSource::Human, d.truth);
                } else {
                    d.source = LabelSource::Discarded;
                }
                result_.ledger.push_back(d);
                added = absorb(inst, result_.ledger.back());
            } else {
                added = absorb(inst, decide(step, inst, scores, true));
            }
            acquired += added ? 1 : 0;
            maybe_retrain(step + 1, total, acquired, added);
        }
        return std::move(result_);
    }

private:
    OracleDecision base_decision(std::size_t step, const Instance& inst, const ScoreVector& scores) const {
        OracleDecision d;
        d.step = step;
        d.instance_id = inst.id;
        d.confidence = max_score(scores);
        d.model_label = predicted_class(scores);
        d.truth = truth_.at(inst.id);
        return d;
    }

    static void set_label(OracleDecision& d, LabelSource source, int label) {
        d.source = source;
        d.label = label;
        d.correct = label == d.truth;
    }

    // Routes one queried instance through the configured oracle setting.
    const OracleDecision& decide(std::size_t step, const Instance& inst, const ScoreVector& scores, bool streaming) {
        OracleDecision d = base_decision(step, inst, scores);
        const bool confident = d.confidence >= config_.threshold;
        if (!confident) {
            set_label(d, LabelSource::Human, d.truth);
        } else if (config_.oracle == OracleKind::A) {
            if (streaming) {
                d.source = LabelSource::Discarded;
            } else {
                set_label(d, LabelSource::Human, d.truth);
            }
        } else if (config_.oracle == OracleKind::B) {
            d.machine_candidate = true;
            set_label(d, LabelSource::MachineModel, d.model_label);
        } else {
            d.machine_candidate = true;
            const int vote = similarity_->vote(inst, learner_.labeled(), learner_.model().features(),
                                               derive_seed(config_.seed, {0x73696dULL, step}));
            d.similarity_label = vote;
            if (vote == d.model_label) {
                set_label(d, LabelSource::MachineUnanimous, d.model_label);
            } else {
                set_label(d, LabelSource::Human, d.truth);
            }
        }
        result_.ledger.push_back(d);
        return result_.ledger.back();
    }

    // Adds the instance to the training data when the decision produced a usable label.
    bool absorb(const Instance& inst, const OracleDecision& d) {
        if (!d.label) {
            return false;
        }
        if (d.source != LabelSource::Human && !config_.use_soft_labels_in_training) {
            return false;
        }
        Instance copy = inst;
        copy.label = d.label;
        labeled_.push_back(std::move(copy));
        return true;
    }

    void maybe_retrain(std::size_t consumed, std::size_t total, std::size_t acquired, bool just_added) {
        const bool cadence = just_added && acquired % static_cast<std::size_t>(config_.retrain_every) == 0;
        const bool boundary = std::find(boundaries_.begin(), boundaries_.end(), consumed) != boundaries_.end();
        if (cadence || boundary) {
            retrain_and_snapshot(static_cast<double>(consumed) / static_cast<double>(total));
        }
    }

    void retrain_and_snapshot(double fraction) {
        learner_.retrain(labeled_);
        result_.snapshots.push_back(
            AucSnapshot{fraction, learner_.test_auc(), labeled_.size(), learner_.model().features().size()});
    }

    const AlConfig& config_;
    Learner learner_;
    Rng rng_;
    std::shared_ptr<const SimilarityOracle> similarity_;
    std::unordered_map<std::int64_t, int> truth_;
    std::vector<Instance> labeled_;
    std::vector<Instance> unlabeled_;
    std::vector<std::size_t> boundaries_;
    AlRunResult result_;
};

} // namespace

AlRunResult run_pool(const AlConfig& config, const Split& split) {
    if (config.setting != AlSetting::Pool) {
        throw Error(ErrorCode::SettingMismatch, "run_pool called with a stream configuration");
    }
    return Run(config, split).pool();
}

AlRunResult run_stream(const AlConfig& config, const Split& split) {
    if (config.setting != AlSetting::Stream) {
        throw Error(ErrorCode::SettingMismatch, "run_stream called with a pool configuration");
    }
    return Run(config, split).stream();
}

AlRunResult run_active_learning(const AlConfig& config, const Split& split) {
    return config.setting == AlSetting::Pool ? run_pool(config, split) : run_stream(config, split);
}

QuartileSummary quartile_summary(const AlRunResult& result) {
    double q1 = 0.0, q4 = 0.0;
    std::size_t n1 = 0, n4 = 0;
    for (const AucSnapshot& s : result.snapshots) {
        if (s.fraction >= 0.0 && s.fraction <= 0.25) {
            q1 += s.auc;
            ++n1;
        } else if (s.fraction > 0.75 && s.fraction <= 1.0) {
            q4 += s.auc;
            ++n4;
        }
    }
    if (n1 == 0 || n4 == 0) {
        throw Error(ErrorCode::InsufficientSnapshots, "need AUC snapshots in both the first and last quartile");
    }
    return {q1 / static_cast<double>(n1), q4 / static_cast<double>(n4)};
}

SavingsReport savings_report(const AlRunResult& result) {
    SavingsReport r;
    r.total = result.ledger.size();
    for (const OracleDecision& d : result.ledger) {
        switch (d.source) {
        case LabelSource::Human: ++r.human; break;
        case LabelSource::Discarded: ++r.discarded; break;
        case LabelSource::MachineModel:
        case LabelSource::MachineUnanimous:
            ++r.machine;
            r.soft_correct += d.correct.value_or(false) ? 1 : 0;
            break;
        }
        if (d.machine_candidate) {
            r.model_correct += d.model_label == d.truth ? 1 : 0;
            r.similarity_correct += d.similarity_label && *d.similarity_label == d.truth ? 1 : 0;
        }
    }
    if (r.total == 0) {
        return r;
    }
    const double total = static_cast<double>(r.total);
    r.soft_labeled = static_cast<double>(r.machine) / total;
    if (r.machine > 0) {
        r.soft_labeled_ok = static_cast<double>(r.soft_correct) / static_cast<double>(r.machine);
    }
    if (result.oracle != OracleKind::A) {
        r.model_ok = static_cast<double>(r.model_correct) / total;
    }
    if (result.oracle == OracleKind::C) {
        r.similarity_ok = static_cast<double>(r.similarity_correct) / total;
    }
    return r;
}

} // namespace calibal
