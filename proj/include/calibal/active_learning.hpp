#pragma once

#include "calibal/calibration.hpp"
#include "calibal/classifiers.hpp"
#include "calibal/core_data.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace calibal {

enum class AlSetting { Pool, Stream };
enum class QueryStrategy { Random, Uncertainty };
// A: human only. B: model soft-labels confident instances. C: as B, but only when the
// similarity oracle agrees with the model; disagreements go to the human.
enum class OracleKind { A, B, C };
enum class LabelSource { Human, MachineModel, MachineUnanimous, Discarded };

std::string_view to_string(AlSetting s) noexcept;
std::string_view to_string(QueryStrategy q) noexcept;
std::string_view to_string(OracleKind o) noexcept;
std::string_view to_string(LabelSource s) noexcept;

// Second machine opinion for oracle C. The default compares an instance with one randomly
// drawn labeled exemplar per class; image-based scorers can be slotted in here.
class SimilarityOracle {
public:
    virtual ~SimilarityOracle() = default;
    virtual int vote(const Instance& instance, const Dataset& labeled, std::span<const int> features,
                     RngSeed seed) const = 0;
};

class ExemplarDistanceOracle final : public SimilarityOracle {
public:
    int vote(const Instance& instance, const Dataset& labeled, std::span<const int> features,
             RngSeed seed) const override;
};

// Class of the nearest (Euclidean, over `features`; all when empty) of one seeded random
// exemplar per class. Ties go to the lowest class index.
int similarity_oracle(const Instance& instance, const Dataset& labeled, RngSeed seed,
                      std::span<const int> features = {});

// Called once per pool step with the remaining candidates, their calibrated scores, and
// the position that was selected.
struct PoolStepView {
    std::span<const Instance> remaining;
    const ScoreMatrix& scores;
    std::size_t chosen;
};

struct AlConfig {
    AlSetting setting = AlSetting::Pool;
    QueryStrategy query = QueryStrategy::Uncertainty;
    OracleKind oracle = OracleKind::A;
    double threshold = 0.95;
    double stream_keep_prob = 0.5;
    int retrain_every = 1;
    ModelSpec model{};
    Technique calibration = Technique::Platt;
    bool use_soft_labels_in_training = true;
    int bins = kDefaultBins;
    int mi_bins = 16;
    RngSeed seed{};
    std::shared_ptr<const SimilarityOracle> similarity;
    std::function<void(const PoolStepView&)> observer;

    // The eight scenarios: 1-4 pool-based, 5-8 stream-based; within each block
    // random + human, uncertainty + human, uncertainty + oracle B, uncertainty + oracle C.
    static AlConfig experiment(int id, double threshold, ModelSpec model, RngSeed seed);

    void validate() const;
};

struct OracleDecision {
    std::size_t step = 0;
    std::int64_t instance_id = 0;
    LabelSource source = LabelSource::Human;
    std::optional<int> label;
    // Whether the assigned label matches the held ground truth.
    std::optional<bool> correct;
    // Highest calibrated class score at decision time.
    double confidence = 0.0;
    int model_label = 0;
    // Vote of the similarity oracle when it was consulted.
    std::optional<int> similarity_label;
    // confidence >= threshold while a machine oracle was configured.
    bool machine_candidate = false;
    // Ground truth, held for accounting only.
    int truth = 0;
};

struct AucSnapshot {
    // Fraction of the pool (or stream) consumed when the snapshot was taken.
    double fraction = 0.0;
    double auc = 0.0;
    std::size_t n_labeled = 0;
    std::size_t n_features = 0;
};

struct AlRunResult {
    OracleKind oracle = OracleKind::A;
    std::vector<OracleDecision> ledger;
    std::vector<AucSnapshot> snapshots;
};

AlRunResult run_pool(const AlConfig& config, const Split& split);
AlRunResult run_stream(const AlConfig& config, const Split& split);
// Dispatches on config.setting.
AlRunResult run_active_learning(const AlConfig& config, const Split& split);

struct QuartileSummary {
    double q1_auc_mean = 0.0;
    double q4_auc_mean = 0.0;
};

// Means of the snapshots with fraction in [0, 0.25] and in (0.75, 1].
QuartileSummary quartile_summary(const AlRunResult& result);

struct SavingsReport {
    std::size_t total = 0;
    std::size_t human = 0;
    std::size_t machine = 0;
    std::size_t discarded = 0;
    std::size_t soft_correct = 0;
    std::size_t model_correct = 0;
    std::size_t similarity_correct = 0;
    // Soft-labeled share of all decisions.
    double soft_labeled = 0.0;
    // Correct share among soft labels; empty when nothing was soft-labeled.
    std::optional<double> soft_labeled_ok;
    // Share of all decisions that were machine candidates with a correct model prediction (B and C).
    std::optional<double> model_ok;
    // Share of all decisions that were machine candidates with a correct similarity vote (C only).
    std::optional<double> similarity_ok;
};

SavingsReport savings_report(const AlRunResult& result);

} // namespace calibal
