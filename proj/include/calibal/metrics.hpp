#pragma once

#include "calibal/classifiers.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace calibal {

// Unit-mass histogram over B fixed-width bins on [0, 1].
struct Histogram {
    std::vector<double> mass;

    int bins() const noexcept { return static_cast<int>(mass.size()); }
};

enum class ReferenceKind { Pcpccm, Pcm, Apcm };

std::string_view to_string(ReferenceKind kind) noexcept;
inline constexpr ReferenceKind kAllReferences[] = {ReferenceKind::Pcpccm, ReferenceKind::Pcm, ReferenceKind::Apcm};

// Mann-Whitney statistic; tied pairs count one half.
double auc_binary(std::span<const double> scores, std::span<const int> labels);

// One-vs-rest AUC weighted by class support; classes absent from `labels` get weight 0.
double auc_ovr_weighted(const ScoreMatrix& scores, std::span<const int> labels);

// Top-1 confidence ECE over `bins` fixed-width bins.
double ece(const ScoreMatrix& calibrated, std::span<const int> labels, int bins = 10);

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

// Per-bin data behind a reliability diagram (top-1 confidence vs accuracy).
std::vector<ReliabilityBin> reliability_bins(const ScoreMatrix& calibrated, std::span<const int> labels, int bins = 10);

Histogram density_histogram(std::span<const double> values, int bins = 10);

// 1-Wasserstein distance with each bin's mass placed at its midpoint.
double wasserstein1(const Histogram& a, const Histogram& b);

// Ideal score histograms: PCM is uniform; APCM is uniform above 1/n (the boundary bin
// weighted by its overlap with (1/n, 1]); PCPCCM puts (n-1)/n in the first bin and 1/n in the last.
Histogram reference_histogram(ReferenceKind kind, int n_classes, int bins = 10);

struct CalibrationScore {
    double score = 0.0;
    double k_term = 0.0;
    double pcs_minus_k = 0.0;
};

// Additive score: |0.5 - auc| + sum_i (1 - W1(h_i, ref)) / (2n).
CalibrationScore apcs(double auc, std::span<const Histogram> class_histograms, const Histogram& ref);
// Multiplicative score: 2|0.5 - auc| * sum_i (1 - W1(h_i, ref)) / n.
CalibrationScore mpcs(double auc, std::span<const Histogram> class_histograms, const Histogram& ref);

// Density histogram of every column of `calibrated` over all rows.
std::vector<Histogram> class_histograms(const ScoreMatrix& calibrated, int bins = 10);

double pearson(std::span<const double> xs, std::span<const double> ys);

struct ReferenceScores {
    ReferenceKind kind;
    CalibrationScore apcs;
    CalibrationScore mpcs;
};

// Label-free calibration quality of `calibrated` against each reference histogram.
// `test_auc` drives the K terms.
std::vector<ReferenceScores> score_references(double test_auc, const ScoreMatrix& calibrated, int bins = 10);

} // namespace calibal
