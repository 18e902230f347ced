#include "calibal/core_data.hpp"

#include "calibal/errors.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

namespace calibal {

Dataset::Dataset(std::vector<Instance> instances, int n_classes)
    : instances_(std::move(instances)), n_classes_(n_classes) {
    if (n_classes_ < 2) {
        throw Error(ErrorCode::InvalidArgument, "n_classes must be >= 2, got " + std::to_string(n_classes_));
    }
    std::unordered_set<std::int64_t> seen;
    seen.reserve(instances_.size());
    const std::size_t d = dim();
    for (const Instance& inst : instances_) {
        if (!seen.insert(inst.id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate instance id " + std::to_string(inst.id));
        }
        if (inst.features.size() != d) {
            throw Error(ErrorCode::DimensionMismatch, "instance " + std::to_string(inst.id) + " has " +
                                                          std::to_string(inst.features.size()) +
                                                          " features, expected " + std::to_string(d));
        }
        if (inst.label && (*inst.label < 0 || *inst.label >= n_classes_)) {
            throw Error(ErrorCode::LabelOutOfRange,
                        "instance " + std::to_string(inst.id) + " label " + std::to_string(*inst.label));
        }
    }
}

bool Dataset::fully_labeled() const noexcept {
    return std::all_of(instances_.begin(), instances_.end(), [](const Instance& i) { return i.label.has_value(); });
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(instances_.size());
    for (const Instance& inst : instances_) {
        if (!inst.label) {
            throw Error(ErrorCode::UnlabeledInstance, "instance " + std::to_string(inst.id) + " has no label");
        }
        out.push_back(*inst.label);
    }
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes_), 0);
    for (const Instance& inst : instances_) {
        if (inst.label) {
            ++counts[static_cast<std::size_t>(*inst.label)];
        }
    }
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
    std::vector<Instance> picked;
    picked.reserve(positions.size());
    for (std::size_t p : positions) {
        picked.push_back(instances_.at(p));
    }
    return Dataset(std::move(picked), n_classes_);
}

Dataset Dataset::without_labels() const {
    std::vector<Instance> stripped = instances_;
    for (Instance& inst : stripped) {
        inst.label.reset();
    }
    return Dataset(std::move(stripped), n_classes_);
}

std::vector<std::size_t> FoldPlan::members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) {
            out.push_back(i);
        }
    }
    return out;
}

SplitSpec SplitSpec::rotation(int k, int offset) {
    if (k < 4) {
        throw Error(ErrorCode::InvalidSpec, "role rotation needs k >= 4, got " + std::to_string(k));
    }
    const int pool = std::max(1, (3 * k) / 10);
    SplitSpec spec;
    auto fold = [&](int i) { return ((offset + i) % k + k) % k; };
    spec.test_folds = {fold(0)};
    spec.calibration_folds = {fold(1)};
    for (int i = 0; i < pool; ++i) {
        spec.pool_folds.push_back(fold(2 + i));
    }
    for (int i = 2 + pool; i < k; ++i) {
        spec.train_folds.push_back(fold(i));
    }
    return spec;
}

void SplitSpec::validate(int k) const {
    std::vector<int> owner(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (const auto* set : {&test_folds, &calibration_folds, &pool_folds, &train_folds}) {
        for (int f : *set) {
            if (f < 0 || f >= k) {
                throw Error(ErrorCode::InvalidSpec, "fold index " + std::to_string(f) + " outside 0.." +
                                                        std::to_string(k - 1));
            }
            if (++owner[static_cast<std::size_t>(f)] > 1) {
                throw Error(ErrorCode::InvalidSpec, "fold " + std::to_string(f) + " assigned to two roles");
            }
        }
    }
    for (int f = 0; f < k; ++f) {
        if (owner[static_cast<std::size_t>(f)] == 0) {
            throw Error(ErrorCode::InvalidSpec, "fold " + std::to_string(f) + " not assigned to any role");
        }
    }
    if (train_folds.empty() || test_folds.empty() || calibration_folds.empty()) {
        throw Error(ErrorCode::InvalidSpec, "train, test and calibration roles need at least one fold");
    }
}

FoldPlan stratified_kfold(const Dataset& dataset, int k, RngSeed seed) {
    if (k < 2) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 2, got " + std::to_string(k));
    }
    const std::vector<int> labels = dataset.labels();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.n_classes()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(k)) {
            throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has " +
                                                      std::to_string(by_class[c].size()) + " members, k = " +
                                                      std::to_string(k));
        }
    }

    FoldPlan plan{k, std::vector<int>(labels.size(), 0)};
    Rng rng(seed);
    // The fold cursor carries over between classes, so per-class remainders land on
    // different folds and overall fold sizes also stay within one of each other.
    std::size_t cursor = 0;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t pos : members) {
            plan.assignment[pos] = static_cast<int>(cursor % static_cast<std::size_t>(k));
            ++cursor;
        }
    }
    return plan;
}

Split assemble_split(const Dataset& dataset, const FoldPlan& plan, const SplitSpec& spec) {
    spec.validate(plan.k);
    if (plan.assignment.size() != dataset.size()) {
        throw Error(ErrorCode::LengthMismatch, "fold plan covers " + std::to_string(plan.assignment.size()) +
                                                   " instances, dataset has " + std::to_string(dataset.size()));
    }
    std::vector<int> role(static_cast<std::size_t>(plan.k), -1);
    const std::vector<int>* sets[] = {&spec.train_folds, &spec.test_folds, &spec.calibration_folds, &spec.pool_folds};
    for (int r = 0; r < 4; ++r) {
        for (int f : *sets[r]) {
            role[static_cast<std::size_t>(f)] = r;
        }
    }
    std::vector<std::size_t> positions[4];
    for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
        positions[role[static_cast<std::size_t>(plan.assignment[i])]].push_back(i);
    }
    return Split{dataset.subset(positions[0]), dataset.subset(positions[1]), dataset.subset(positions[2]),
                 dataset.subset(positions[3])};
}

} // namespace calibal
