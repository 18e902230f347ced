#pragma once

#include "calibal/core_data.hpp"
#include "calibal/rng.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace calibal {

// Gaussian class-conditional generator standing in for extracted image embeddings.
struct SyntheticConfig {
    int n_classes = 3;
    std::vector<int> counts;
    int dim = 64;
    // Explicit per-class means (n_classes x dim). When empty, each class mean is a seeded
    // random direction scaled to norm `separation`.
    std::vector<std::vector<double>> means;
    double separation = 3.0;
    double spread = 1.0;
    // Multiplies the spread; large values make the classes indistinguishable.
    double overlap = 1.0;
    RngSeed seed{};

    // Three classes with the 85/10/5 imbalance of the inspection use case.
    static SyntheticConfig use_case(int total, RngSeed seed);

    void validate() const;
};

// Class means actually used by gen_synthetic for this config.
std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& config);

// Rows come out in a seeded shuffled order with ids 0..N-1.
Dataset gen_synthetic(const SyntheticConfig& config);

// CSV layout: a `# n_classes=<n>` comment line, then a header `id,f0,...,f{d-1}[,label]`.
// Instance ids are assigned 0..N-1 in row order; an empty label cell means unlabeled.
Dataset load_csv(const std::filesystem::path& path);
Dataset read_csv(std::istream& in);
void write_csv(std::ostream& out, const Dataset& dataset);
void write_csv(const std::filesystem::path& path, const Dataset& dataset);

struct FeatureSelection {
    // Sorted by descending score, ties by ascending index.
    std::vector<int> selected_indices;
    // Mutual information (nats) for every original feature.
    std::vector<double> scores;
};

inline constexpr int kDefaultMiBins = 16;

// Plug-in MI estimate after equal-frequency discretisation of the feature.
// Equal values always share a bin, so a constant feature scores exactly 0.
double mutual_information(std::span<const double> feature, std::span<const int> labels, int bins = kDefaultMiBins);

// Keeps K = floor(sqrt(N)) features, clamped to [1, d], scored on `train` only.
FeatureSelection select_top_k(const Dataset& train, int bins = kDefaultMiBins);

std::size_t top_k_size(std::size_t n_train, std::size_t dim);

} // namespace calibal
