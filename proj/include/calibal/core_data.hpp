#pragma once

#include "calibal/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace calibal {

struct Instance {
    std::int64_t id = 0;
    std::vector<double> features;
    std::optional<int> label;
};

// Ordered, immutable collection of instances sharing one feature dimension.
// n_classes is declared by the data source rather than inferred from labels.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Instance> instances, int n_classes);

    const std::vector<Instance>& instances() const noexcept { return instances_; }
    const Instance& operator[](std::size_t i) const { return instances_[i]; }
    std::size_t size() const noexcept { return instances_.size(); }
    bool empty() const noexcept { return instances_.empty(); }
    int n_classes() const noexcept { return n_classes_; }
    // 0 for an empty dataset.
    std::size_t dim() const noexcept { return instances_.empty() ? 0 : instances_.front().features.size(); }

    bool fully_labeled() const noexcept;
    // Throws UnlabeledInstance if any label is missing.
    std::vector<int> labels() const;
    std::vector<std::size_t> class_counts() const;

    Dataset subset(std::span<const std::size_t> positions) const;
    // Learner-facing view with ground truth removed.
    Dataset without_labels() const;

    auto begin() const noexcept { return instances_.begin(); }
    auto end() const noexcept { return instances_.end(); }

private:
    std::vector<Instance> instances_;
    int n_classes_ = 2;
};

struct FoldPlan {
    int k = 0;
    // assignment[i] is the fold of dataset position i.
    std::vector<int> assignment;

    std::vector<std::size_t> members(int fold) const;
};

struct SplitSpec {
    std::vector<int> test_folds;
    std::vector<int> calibration_folds;
    std::vector<int> pool_folds;
    std::vector<int> train_folds;

    // Role template rotated by `offset`: for k = 10 this is 1 test, 1 calibration,
    // 3 pool and 5 train folds. Other k keep the same proportions (pool = max(1, 3k/10)).
    static SplitSpec rotation(int k, int offset);

    // Throws InvalidSpec unless the four sets partition {0..k-1}.
    void validate(int k) const;
};

struct Split {
    Dataset train;
    Dataset test;
    Dataset calibration;
    // Active-learning pool, or the "unlabeled" block in calibration experiments.
    Dataset pool;
};

FoldPlan stratified_kfold(const Dataset& dataset, int k, RngSeed seed);

Split assemble_split(const Dataset& dataset, const FoldPlan& plan, const SplitSpec& spec);

} // namespace calibal
