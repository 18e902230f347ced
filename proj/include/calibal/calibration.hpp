#pragma once

#include "calibal/classifiers.hpp"
#include "calibal/tdigest.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace calibal {

enum class Technique { None, Platt, Temperature, HistogramGt, AhpcFixed, AhpcAdaptive };

std::string_view to_string(Technique t) noexcept;
Technique parse_technique(std::string_view name);

inline constexpr int kDefaultBins = 10;

// Bin index on fixed-width bins over [0, 1]; 1.0 falls in the last bin.
int bin_index(double score, int bins) noexcept;

struct IdentityMap {};

// One sigmoid per class (one-vs-rest): P(y = c | f) = 1 / (1 + exp(a[c] * f + b[c])).
struct PlattMap {
    std::vector<double> a;
    std::vector<double> b;
};

struct TemperatureMap {
    double temperature = 1.0;
    double epsilon = 1e-6;
};

struct HistogramGtMap {
    int bins = kDefaultBins;
    // [class][bin] smoothed positive frequency, midpoint for empty bins.
    std::vector<std::vector<double>> value;
    std::vector<std::vector<int>> support;
    std::vector<std::vector<int>> positives;
};

enum class AhpcMode { Fixed, Adaptive };

// Label-free histogram calibration. For class c, `all[c]` sketches every class-c score and
// `predicted[c]` only those from instances whose argmax is c; the model's own prediction
// stands in for ground truth.
struct AhpcState {
    int bins = kDefaultBins;
    AhpcMode mode = AhpcMode::Fixed;
    std::vector<TDigest> all;
    std::vector<TDigest> predicted;
};

using CalibrationMap = std::variant<IdentityMap, PlattMap, TemperatureMap, HistogramGtMap, AhpcState>;

struct SigmoidParams {
    double a = 0.0;
    double b = 0.0;
    int iterations = 0;
};

// Platt's smoothed targets: positives (N+ + 1) / (N+ + 2), negatives 1 / (N- + 2).
std::pair<double, double> platt_targets(std::size_t n_pos, std::size_t n_neg) noexcept;

// Binary sigmoid fit by damped Newton iterations; stops once the gradient norm is below
// 1e-8 or after 200 iterations.
SigmoidParams fit_sigmoid(std::span<const double> scores, std::span<const int> is_positive);

PlattMap fit_platt(const ScoreMatrix& scores, std::span<const int> labels);

double temperature_nll(const ScoreMatrix& scores, std::span<const int> labels, double temperature,
                       double epsilon = 1e-6);
// Golden-section search on log T over [-4, 4] down to a bracket width of 1e-4.
TemperatureMap fit_temperature(const ScoreMatrix& scores, std::span<const int> labels);

HistogramGtMap fit_histogram_gt(const ScoreMatrix& scores, std::span<const int> labels, int bins = kDefaultBins);

AhpcState fit_ahpc(const ScoreMatrix& scores, int bins = kDefaultBins, AhpcMode mode = AhpcMode::Fixed,
                   double compression = TDigest::kDefaultCompression);
// Feeds new unlabeled predictions into an adaptive state. Throws FixedModeUpdate for fixed states.
AhpcState ahpc_update(AhpcState state, const ScoreMatrix& new_scores);

// [class][bin] calibrated value of an AHPC state before renormalisation.
std::vector<std::vector<double>> ahpc_table(const AhpcState& state);

// Fits `technique`; AHPC ignores the labels. `labels` may be empty for label-free techniques.
CalibrationMap fit_calibration(Technique technique, const ScoreMatrix& scores, std::span<const int> labels,
                               int bins = kDefaultBins, double compression = TDigest::kDefaultCompression);

ScoreVector calibrate(const CalibrationMap& map, std::span<const double> raw);
ScoreMatrix calibrate(const CalibrationMap& map, const ScoreMatrix& raw);

// Per-class outputs before the simplex renormalisation step.
std::vector<double> calibrate_unnormalized(const CalibrationMap& map, std::span<const double> raw);

nlohmann::json to_json(const CalibrationMap& map);
CalibrationMap calibration_map_from_json(const nlohmann::json& doc);

} // namespace calibal
