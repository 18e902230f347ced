#pragma once

#include "calibal/core_data.hpp"
#include "calibal/rng.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace calibal {

// Per-class scores on the probability simplex.
using ScoreVector = std::vector<double>;
using ScoreMatrix = std::vector<ScoreVector>;

struct GaussianNbParams {
    double variance_floor = 1e-9;
};

struct KnnParams {
    int k = 5;
};

struct CartParams {
    int max_depth = 6;
    int min_leaf = 2;
};

// One-vs-rest linear SVM trained with hinge loss by seeded SGD.
struct LinearParams {
    int epochs = 30;
    double learning_rate = 0.01;
    double regularization = 1e-3;
};

// One hidden tanh layer, softmax output, full-batch gradient descent.
struct MlpParams {
    int hidden_width = 32;
    int epochs = 300;
    double learning_rate = 0.1;
};

using ModelParams = std::variant<GaussianNbParams, KnnParams, CartParams, LinearParams, MlpParams>;

struct ModelSpec {
    ModelParams params = KnnParams{};
    RngSeed seed{};

    // Short family name: nb, knn, cart, svm, mlp.
    std::string family() const;
    void validate() const;
};

namespace model_detail {

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
};

struct NbModel {
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> variances;
    std::vector<double> log_priors;
};

struct KnnModel {
    int k = 5;
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
};

struct CartNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> counts;
};

struct CartModel {
    std::vector<CartNode> nodes; // nodes[0] is the root
};

struct LinearModel {
    Standardizer standardizer;
    std::vector<std::vector<double>> weights; // [class][feature]
    std::vector<double> bias;
};

struct MlpModel {
    Standardizer standardizer;
    std::vector<std::vector<double>> w1; // [hidden][input]
    std::vector<double> b1;
    std::vector<std::vector<double>> w2; // [class][hidden]
    std::vector<double> b2;
    std::vector<double> loss_history;
};

} // namespace model_detail

class TrainedModel {
public:
    using Params = std::variant<model_detail::NbModel, model_detail::KnnModel, model_detail::CartModel,
                                model_detail::LinearModel, model_detail::MlpModel>;

    TrainedModel(Params params, int n_classes, std::size_t input_dim, std::vector<int> features, bool degenerate)
        : params_(std::move(params)), n_classes_(n_classes), input_dim_(input_dim), features_(std::move(features)),
          degenerate_(degenerate) {}

    const Params& params() const noexcept { return params_; }
    int n_classes() const noexcept { return n_classes_; }
    // Dimension of the full (unselected) feature vectors the model accepts.
    std::size_t input_dim() const noexcept { return input_dim_; }
    const std::vector<int>& features() const noexcept { return features_; }
    // Set when every selected feature was constant on the training data.
    bool degenerate() const noexcept { return degenerate_; }

    ScoreVector score(std::span<const double> full_features) const;

private:
    Params params_;
    int n_classes_;
    std::size_t input_dim_;
    std::vector<int> features_;
    bool degenerate_;
};

// Fits on the given feature indices of `train` (all features when `features` is empty).
TrainedModel fit(const ModelSpec& spec, const Dataset& train, std::vector<int> features = {});

ScoreMatrix predict_scores(const TrainedModel& model, const Dataset& instances);

// Argmax; ties go to the lowest class index.
int predicted_class(std::span<const double> scores);

double max_score(std::span<const double> scores);

// Selected-feature copy of an instance's features, in model order.
std::vector<double> project(std::span<const double> full, std::span<const int> features);

} // namespace calibal
