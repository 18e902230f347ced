#pragma once

#include "calibal/active_learning.hpp"
#include "calibal/calibration.hpp"
#include "calibal/classifiers.hpp"
#include "calibal/core_data.hpp"
#include "calibal/ingest.hpp"
#include "calibal/metrics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace calibal {

struct NamedModel {
    std::string name;
    ModelSpec spec;
};

struct ExperimentConfig {
    std::optional<std::filesystem::path> csv;
    // Used when no csv path is given.
    SyntheticConfig synthetic = SyntheticConfig::use_case(1000, RngSeed{7});

    int folds = 10;
    // Fold offsets of the role template to run; empty means all `folds` rotations.
    std::vector<int> rotations;
    std::vector<NamedModel> models;
    std::vector<Technique> techniques;
    std::vector<int> experiments;
    std::vector<double> thresholds;

    int bins = kDefaultBins;
    int mi_bins = kDefaultMiBins;
    double compression = TDigest::kDefaultCompression;
    int retrain_every = 1;
    double stream_keep_prob = 0.5;
    bool use_soft_labels_in_training = true;
    Technique al_calibration = Technique::Platt;
    double alpha = 0.05;

    RngSeed seed{42};
    std::filesystem::path out = "out";
    int jobs = 1;

    // Five model families, six techniques, experiments 1-8, thresholds {0.95, 0.99}.
    static ExperimentConfig defaults();

    std::vector<int> active_rotations() const;
    void validate() const;
};

// Reads keys over ExperimentConfig::defaults(); throws InvalidConfig on bad values.
ExperimentConfig parse_config(const nlohmann::json& doc);
// JSON, or TOML when the extension is .toml.
ExperimentConfig load_config(const std::filesystem::path& path);
// The raw document behind load_config, as JSON, for callers that apply overrides first.
nlohmann::json load_config_document(const std::filesystem::path& path);
nlohmann::json toml_to_json(std::string_view toml_text);
ModelSpec parse_model_spec(const nlohmann::json& doc);

Dataset load_dataset(const ExperimentConfig& config);
// The stratified fold plan shared by both suites for a given master seed.
FoldPlan suite_fold_plan(const ExperimentConfig& config, const Dataset& dataset);

// ---- calibration comparison ------------------------------------------------

struct CalibrationRow {
    std::string model;
    // Technique name; the adaptive AHPC variant yields "ahpc_adaptive_start" and "ahpc_adaptive_end".
    std::string technique;
    int fold = 0;
    bool ok = true;
    std::string error;
    // AUC on the unlabeled block, AUC on the test fold (drives the K terms), ECE on the unlabeled block.
    double auc_roc = 0.0;
    double test_auc_roc = 0.0;
    double ece = 0.0;
    std::array<ReferenceScores, 3> references{};
};

struct CorrelationRow {
    // "all" or a model name.
    std::string scope;
    ReferenceKind reference = ReferenceKind::Pcm;
    std::optional<double> ece_apcs;
    std::optional<double> ece_apcs_pcs;
    std::optional<double> ece_mpcs;
    std::optional<double> ece_mpcs_pcs;
};

struct ReliabilityRow {
    std::string model;
    std::string technique;
    int fold = 0;
    int bin = 0;
    ReliabilityBin data;
};

struct CalibrationSuiteResult {
    std::vector<CalibrationRow> folds;
    std::vector<CalibrationRow> summary;
    std::vector<CorrelationRow> correlations;
    std::vector<ReliabilityRow> reliability;

    std::size_t error_rows() const;
};

CalibrationSuiteResult run_calibration_suite(const ExperimentConfig& config);
CalibrationSuiteResult run_calibration_suite(const ExperimentConfig& config, const Dataset& dataset);

// Fold means per (model, technique) over successful rows, in first-seen order. The
// `fold` field of a summary row holds the number of folds averaged.
std::vector<CalibrationRow> summarize_calibration(std::span<const CalibrationRow> folds);
std::vector<CorrelationRow> calibration_correlations(std::span<const CalibrationRow> summary);

// ---- active learning -------------------------------------------------------

struct AlRunRow {
    int experiment = 0;
    double threshold = 0.0;
    std::string model;
    int fold = 0;
    bool ok = true;
    std::string error;
    QuartileSummary quartiles;
    SavingsReport savings;
};

struct AlRun {
    AlRunRow row;
    AlRunResult result;
};

struct QuartileTableRow {
    int experiment = 0;
    double threshold = 0.0;
    // Set for per-model rows; empty for the across-model table.
    std::string model;
    std::size_t runs = 0;
    double q1_mean = 0.0;
    double q4_mean = 0.0;
    double q1_sem = 0.0;
    double q4_sem = 0.0;
    std::optional<bool> significant;
};

struct SavingsTableRow {
    int experiment = 0;
    double threshold = 0.0;
    std::size_t decisions = 0;
    double soft_labeled = 0.0;
    std::optional<double> soft_labeled_ok;
    std::optional<double> model_ok;
    std::optional<double> similarity_ok;
};

struct AlSuiteResult {
    std::vector<AlRun> runs;
    std::vector<QuartileTableRow> quartiles;
    std::vector<QuartileTableRow> per_model;
    std::vector<SavingsTableRow> savings;
    // Significance level used for the paired tests in the quartile tables.
    double alpha = 0.05;

    std::size_t error_rows() const;
};

AlSuiteResult run_al_suite(const ExperimentConfig& config);
AlSuiteResult run_al_suite(const ExperimentConfig& config, const Dataset& dataset);

std::vector<QuartileTableRow> quartile_table(std::span<const AlRunRow> rows, bool per_model, double alpha);
std::vector<SavingsTableRow> savings_table(std::span<const AlRunRow> rows);

// Two-sided paired t-test on the per-fold differences (after - before). A zero-variance
// difference vector is significant exactly when its mean is non-zero.
bool paired_significance(std::span<const double> before, std::span<const double> after, double alpha = 0.05);

// ---- outputs ---------------------------------------------------------------

void write_fold_plan(std::ostream& out, const Dataset& dataset, const FoldPlan& plan);
void write_calibration_outputs(const CalibrationSuiteResult& result, const std::filesystem::path& dir);
void write_al_outputs(const AlSuiteResult& result, const std::filesystem::path& dir);
void write_ledger(std::ostream& out, const AlRunResult& result);
void write_snapshots(std::ostream& out, const AlRunResult& result);

std::vector<CalibrationRow> read_calibration_folds(const std::filesystem::path& csv);
std::vector<AlRunRow> read_al_runs(const std::filesystem::path& csv);

// Re-aggregates whichever suite outputs exist in `dir`, rewrites the summary tables and
// prints them to `log`. Returns the number of error rows found.
std::size_t report(const std::filesystem::path& dir, std::ostream& log);

} // namespace calibal
