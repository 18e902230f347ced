#include "calibal/metrics.hpp"

#include "calibal/calibration.hpp"
#include "calibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace calibal {

std::string_view to_string(ReferenceKind kind) noexcept {
    switch (kind) {
    case ReferenceKind::Pcpccm: return "pcpccm";
    case ReferenceKind::Pcm: return "pcm";
    case ReferenceKind::Apcm: return "apcm";
    }
    return "pcm";
}

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    }
    const std::size_t n = scores.size();
    for (double s : scores) {
        if (std::isnan(s)) {
            throw Error(ErrorCode::NonFiniteValue, "AUC scores contain NaN");
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank sum of positives with average ranks for ties (ranks are 1-based).
    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t r = i; r < j; ++r) {
            if (labels[order[r]] != 0) {
                positive_rank_sum += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(ErrorCode::SingleClass, "AUC needs both positive and negative instances");
    }
    const double np = static_cast<double>(n_pos);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc_ovr_weighted(const ScoreMatrix& scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    }
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyInput, "AUC on an empty set");
    }
    const std::size_t n = scores.front().size();
    std::vector<std::size_t> support(n, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n) {
            throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
        }
        ++support[static_cast<std::size_t>(y)];
    }
    if (std::count_if(support.begin(), support.end(), [](std::size_t s) { return s > 0; }) < 2) {
        throw Error(ErrorCode::DegenerateLabels, "weighted AUC needs at least two classes present");
    }
    const double total = static_cast<double>(labels.size());
    std::vector<double> column(scores.size());
    std::vector<int> positive(scores.size());
    double auc = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (support[c] == 0) continue;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            column[i] = scores[i][c];
            positive[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
        }
        auc += static_cast<double>(support[c]) / total * auc_binary(column, positive);
    }
    return auc;
}

std::vector<ReliabilityBin> reliability_bins(const ScoreMatrix& calibrated, std::span<const int> labels, int bins) {
    if (calibrated.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    }
    if (bins < 1) {
        throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
    }
    std::vector<ReliabilityBin> out(static_cast<std::size_t>(bins));
    std::vector<double> correct(out.size(), 0.0);
    std::vector<double> conf_sum(out.size(), 0.0);
    for (std::size_t b = 0; b < out.size(); ++b) {
        out[b].lo = static_cast<double>(b) / bins;
        out[b].hi = static_cast<double>(b + 1) / bins;
    }
    for (std::size_t i = 0; i < calibrated.size(); ++i) {
        const double conf = max_score(calibrated[i]);
        const auto b = static_cast<std::size_t>(bin_index(conf, bins));
        ++out[b].count;
        conf_sum[b] += conf;
        correct[b] += predicted_class(calibrated[i]) == labels[i] ? 1.0 : 0.0;
    }
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (out[b].count > 0) {
            const double n = static_cast<double>(out[b].count);
            out[b].mean_confidence = conf_sum[b] / n;
            out[b].accuracy = correct[b] / n;
        }
    }
    return out;
}

double ece(const ScoreMatrix& calibrated, std::span<const int> labels, int bins) {
    if (calibrated.empty()) {
        throw Error(ErrorCode::EmptyInput, "ECE on an empty set");
    }
    const double total = static_cast<double>(calibrated.size());
    double value = 0.0;
    for (const ReliabilityBin& b : reliability_bins(calibrated, labels, bins)) {
        if (b.count > 0) {
            value += static_cast<double>(b.count) / total * std::abs(b.accuracy - b.mean_confidence);
        }
    }
    return value;
}

Histogram density_histogram(std::span<const double> values, int bins) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptyInput, "density histogram of no values");
    }
    if (bins < 1) {
        throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(ErrorCode::OutOfRange, "density histogram values must lie in [0, 1]");
        }
        ++counts[static_cast<std::size_t>(bin_index(v, bins))];
    }
    Histogram h;
    h.mass.resize(counts.size());
    const double n = static_cast<double>(values.size());
    for (std::size_t b = 0; b < counts.size(); ++b) {
        h.mass[b] = static_cast<double>(counts[b]) / n;
    }
    return h;
}

double wasserstein1(const Histogram& a, const Histogram& b) {
    if (a.mass.size() != b.mass.size()) {
        throw Error(ErrorCode::BinCountMismatch, std::to_string(a.mass.size()) + " vs " + std::to_string(b.mass.size()) +
                                                     " bins");
    }
    const double width = 1.0 / static_cast<double>(a.mass.size());
    double cdf_gap = 0.0;
    double distance = 0.0;
    // The last CDF difference is zero for unit-mass histograms and is skipped.
    for (std::size_t i = 0; i + 1 < a.mass.size(); ++i) {
        cdf_gap += a.mass[i] - b.mass[i];
        distance += std::abs(cdf_gap) * width;
    }
    return distance;
}

Histogram reference_histogram(ReferenceKind kind, int n_classes, int bins) {
    if (n_classes < 2 || bins < 2) {
        throw Error(ErrorCode::InvalidArgument, "reference histograms need n >= 2 and B >= 2");
    }
    const auto nb = static_cast<std::size_t>(bins);
    Histogram h;
    h.mass.assign(nb, 0.0);
    switch (kind) {
    case ReferenceKind::Pcm:
        std::fill(h.mass.begin(), h.mass.end(), 1.0 / bins);
        break;
    case ReferenceKind::Apcm: {
        const double threshold = 1.0 / n_classes;
        double total = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const double lo = static_cast<double>(b) / bins;
            const double hi = static_cast<double>(b + 1) / bins;
            h.mass[b] = std::max(0.0, hi - std::max(lo, threshold));
            total += h.mass[b];
        }
        for (double& m : h.mass) m /= total;
        break;
    }
    case ReferenceKind::Pcpccm:
        h.mass.front() = static_cast<double>(n_classes - 1) / n_classes;
        h.mass.back() = 1.0 / n_classes;
        break;
    }
    return h;
}

namespace {

double mean_similarity(std::span<const Histogram> hs, const Histogram& ref) {
    double sum = 0.0;
    for (const Histogram& h : hs) {
        sum += 1.0 - wasserstein1(h, ref);
    }
    return sum;
}

void check_score_inputs(double auc, std::span<const Histogram> hs) {
    if (!(auc >= 0.0 && auc <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "AUC must lie in [0, 1]");
    }
    if (hs.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "calibration scores need at least two class histograms");
    }
}

} // namespace

CalibrationScore apcs(double auc, std::span<const Histogram> hs, const Histogram& ref) {
    check_score_inputs(auc, hs);
    CalibrationScore s;
    s.k_term = std::abs(0.5 - auc);
    s.pcs_minus_k = mean_similarity(hs, ref) / (2.0 * static_cast<double>(hs.size()));
    s.score = s.k_term + s.pcs_minus_k;
    return s;
}

CalibrationScore mpcs(double auc, std::span<const Histogram> hs, const Histogram& ref) {
    check_score_inputs(auc, hs);
    CalibrationScore s;
    s.k_term = 2.0 * std::abs(0.5 - auc);
    s.pcs_minus_k = mean_similarity(hs, ref) / static_cast<double>(hs.size());
    s.score = s.k_term * s.pcs_minus_k;
    return s;
}

std::vector<Histogram> class_histograms(const ScoreMatrix& calibrated, int bins) {
    if (calibrated.empty()) {
        throw Error(ErrorCode::EmptyInput, "class histograms of no predictions");
    }
    const std::size_t n = calibrated.front().size();
    std::vector<Histogram> out;
    std::vector<double> column(calibrated.size());
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t i = 0; i < calibrated.size(); ++i) {
            column[i] = std::clamp(calibrated[i][c], 0.0, 1.0);
        }
        out.push_back(density_histogram(column, bins));
    }
    return out;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw Error(ErrorCode::LengthMismatch, "pearson inputs differ in length");
    }
    if (xs.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "pearson needs at least two pairs");
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw Error(ErrorCode::ZeroVariance, "pearson input has zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<ReferenceScores> score_references(double test_auc, const ScoreMatrix& calibrated, int bins) {
    const auto hs = class_histograms(calibrated, bins);
    const int n = static_cast<int>(hs.size());
    std::vector<ReferenceScores> out;
    for (ReferenceKind kind : kAllReferences) {
        const Histogram ref = reference_histogram(kind, n, bins);
        out.push_back({kind, apcs(test_auc, hs, ref), mpcs(test_auc, hs, ref)});
    }
    return out;
}

} // namespace calibal
