#include "calibal/classifiers.hpp"

#include "calibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace calibal {

using namespace model_detail;

std::string ModelSpec::family() const {
    struct Namer {
        std::string operator()(const GaussianNbParams&) const { return "nb"; }
        std::string operator()(const KnnParams&) const { return "knn"; }
        std::string operator()(const CartParams&) const { return "cart"; }
        std::string operator()(const LinearParams&) const { return "svm"; }
        std::string operator()(const MlpParams&) const { return "mlp"; }
    };
    return std::visit(Namer{}, params);
}

void ModelSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw Error(ErrorCode::InvalidConfig, what);
        }
    };
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, GaussianNbParams>) {
                require(p.variance_floor > 0.0, "nb variance_floor must be > 0");
            } else if constexpr (std::is_same_v<P, KnnParams>) {
                require(p.k > 0, "knn k must be > 0");
            } else if constexpr (std::is_same_v<P, CartParams>) {
                require(p.max_depth > 0 && p.min_leaf > 0, "cart max_depth and min_leaf must be > 0");
            } else if constexpr (std::is_same_v<P, LinearParams>) {
                require(p.epochs > 0 && p.learning_rate > 0.0 && p.regularization >= 0.0,
                        "svm epochs, learning_rate must be > 0 and regularization >= 0");
            } else {
                require(p.hidden_width > 0 && p.epochs > 0 && p.learning_rate > 0.0,
                        "mlp hidden_width, epochs, learning_rate must be > 0");
            }
        },
        params);
}

std::vector<double> project(std::span<const double> full, std::span<const int> features) {
    std::vector<double> out(features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
        out[j] = full[static_cast<std::size_t>(features[j])];
    }
    return out;
}

int predicted_class(std::span<const double> scores) {
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(c);
        }
    }
    return best;
}

double max_score(std::span<const double> scores) {
    return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
}

namespace {

void softmax_inplace(std::vector<double>& z) {
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : z) {
        v /= sum;
    }
}

std::vector<double> laplace(const std::vector<double>& counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> out(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        out[c] = (counts[c] + 1.0) / (total + static_cast<double>(counts.size()));
    }
    return out;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& x) {
    const std::size_t d = x.empty() ? 0 : x.front().size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const double n = static_cast<double>(x.size());
    for (const auto& row : x) {
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j] / n;
    }
    for (std::size_t j = 0; j < d; ++j) {
        double var = 0.0;
        for (const auto& row : x) var += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
        const double sd = std::sqrt(var / n);
        s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

std::vector<double> standardize(const Standardizer& s, std::vector<double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = (row[j] - s.mean[j]) / s.scale[j];
    }
    return row;
}

NbModel fit_nb(const GaussianNbParams& p, const std::vector<std::vector<double>>& x, const std::vector<int>& y,
               int n_classes) {
    const std::size_t d = x.front().size();
    NbModel m;
    m.means.assign(static_cast<std::size_t>(n_classes), std::vector<double>(d, 0.0));
    m.variances.assign(static_cast<std::size_t>(n_classes), std::vector<double>(d, 0.0));
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        counts[static_cast<std::size_t>(y[i])] += 1.0;
        for (std::size_t j = 0; j < d; ++j) m.means[static_cast<std::size_t>(y[i])][j] += x[i][j];
    }
    for (int c = 0; c < n_classes; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0.0) {
            throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no training instances");
        }
        for (double& v : m.means[static_cast<std::size_t>(c)]) v /= counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto c = static_cast<std::size_t>(y[i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = x[i][j] - m.means[c][j];
            m.variances[c][j] += diff * diff;
        }
    }
    const double n = static_cast<double>(x.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (double& v : m.variances[c]) v = std::max(v / counts[c], p.variance_floor);
        m.log_priors.push_back(std::log(counts[c] / n));
    }
    return m;
}

ScoreVector score_nb(const NbModel& m, const std::vector<double>& x) {
    std::vector<double> logp(m.means.size());
    for (std::size_t c = 0; c < m.means.size(); ++c) {
        double lp = m.log_priors[c];
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double var = m.variances[c][j];
            const double diff = x[j] - m.means[c][j];
            lp -= 0.5 * std::log(2.0 * std::numbers::pi * var) + diff * diff / (2.0 * var);
        }
        logp[c] = lp;
    }
    softmax_inplace(logp);
    return logp;
}

ScoreVector score_knn(const KnnModel& m, const std::vector<double>& x, int n_classes) {
    std::vector<std::pair<double, std::size_t>> dist(m.points.size());
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - m.points[i][j];
            d2 += diff * diff;
        }
        dist[i] = {d2, i};
    }
    const std::size_t k = std::min(static_cast<std::size_t>(m.k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        counts[static_cast<std::size_t>(m.labels[dist[i].second])] += 1.0;
    }
    return laplace(counts);
}

double gini(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double g = 1.0;
    for (double c : counts) g -= (c / total) * (c / total);
    return g;
}

class CartBuilder {
public:
    CartBuilder(const CartParams& p, const std::vector<std::vector<double>>& x, const std::vector<int>& y, int n_classes)
        : p_(p), x_(x), y_(y), n_classes_(static_cast<std::size_t>(n_classes)) {}

    CartModel build() {
        std::vector<std::size_t> all(x_.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        grow(all, 0);
        return CartModel{std::move(nodes_)};
    }

private:
    int grow(const std::vector<std::size_t>& idx, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(CartNode{});
        std::vector<double> counts(n_classes_, 0.0);
        for (std::size_t i : idx) counts[static_cast<std::size_t>(y_[i])] += 1.0;
        nodes_[static_cast<std::size_t>(id)].counts = counts;

        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        const auto min_leaf = static_cast<std::size_t>(p_.min_leaf);
        if (pure || depth >= p_.max_depth || idx.size() < 2 * min_leaf) {
            return id;
        }

        // Best split by weighted child Gini; zero-gain splits are allowed so that
        // interaction patterns such as XOR can be resolved one level further down.
        double best_impurity = INFINITY;
        int best_feature = -1;
        double best_threshold = 0.0;
        const std::size_t d = x_.front().size();
        std::vector<std::size_t> order = idx;
        for (std::size_t j = 0; j < d; ++j) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x_[a][j] < x_[b][j] || (x_[a][j] == x_[b][j] && a < b);
            });
            std::vector<double> left(n_classes_, 0.0);
            std::vector<double> right = counts;
            const double total = static_cast<double>(order.size());
            for (std::size_t r = 0; r + 1 < order.size(); ++r) {
                const auto cls = static_cast<std::size_t>(y_[order[r]]);
                left[cls] += 1.0;
                right[cls] -= 1.0;
                const double lo = x_[order[r]][j];
                const double hi = x_[order[r + 1]][j];
                const std::size_t n_left = r + 1;
                if (lo == hi || n_left < min_leaf || order.size() - n_left < min_leaf) {
                    continue;
                }
                const double nl = static_cast<double>(n_left);
                const double impurity = (nl * gini(left, nl) + (total - nl) * gini(right, total - nl)) / total;
                if (impurity < best_impurity - 1e-15) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(j);
                    best_threshold = 0.5 * (lo + hi);
                }
            }
        }
        if (best_feature < 0) {
            return id;
        }
        std::vector<std::size_t> left_idx;
        std::vector<std::size_t> right_idx;
        for (std::size_t i : idx) {
            (x_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        const int l = grow(left_idx, depth + 1);
        const int r = grow(right_idx, depth + 1);
        CartNode& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const CartParams& p_;
    const std::vector<std::vector<double>>& x_;
    const std::vector<int>& y_;
    std::size_t n_classes_;
    std::vector<CartNode> nodes_;
};

ScoreVector score_cart(const CartModel& m, const std::vector<double>& x) {
    std::size_t node = 0;
    while (m.nodes[node].feature >= 0) {
        const CartNode& n = m.nodes[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return laplace(m.nodes[node].counts);
}

LinearModel fit_linear(const LinearParams& p, const std::vector<std::vector<double>>& raw, const std::vector<int>& y,
                       int n_classes, Rng& rng) {
    LinearModel m;
    m.standardizer = fit_standardizer(raw);
    std::vector<std::vector<double>> x;
    x.reserve(raw.size());
    for (const auto& row : raw) x.push_back(standardize(m.standardizer, row));
    const std::size_t d = x.front().size();
    m.weights.assign(static_cast<std::size_t>(n_classes), std::vector<double>(d, 0.0));
    m.bias.assign(static_cast<std::size_t>(n_classes), 0.0);

    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double eta = p.learning_rate;
    const double shrink = 1.0 - eta * p.regularization;
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i : order) {
            for (std::size_t c = 0; c < m.weights.size(); ++c) {
                const double target = y[i] == static_cast<int>(c) ? 1.0 : -1.0;
                auto& w = m.weights[c];
                double f = m.bias[c];
                for (std::size_t j = 0; j < d; ++j) f += w[j] * x[i][j];
                for (double& wj : w) wj *= shrink;
                if (target * f < 1.0) {
                    for (std::size_t j = 0; j < d; ++j) w[j] += eta * target * x[i][j];
                    m.bias[c] += eta * target;
                }
            }
        }
    }
    return m;
}

ScoreVector score_linear(const LinearModel& m, const std::vector<double>& raw) {
    const auto x = standardize(m.standardizer, raw);
    std::vector<double> z(m.weights.size());
    for (std::size_t c = 0; c < z.size(); ++c) {
        z[c] = m.bias[c] + std::inner_product(x.begin(), x.end(), m.weights[c].begin(), 0.0);
    }
    softmax_inplace(z);
    return z;
}

struct MlpForward {
    std::vector<double> hidden;
    std::vector<double> probs;
};

MlpForward mlp_forward(const MlpModel& m, const std::vector<double>& x) {
    MlpForward f;
    f.hidden.resize(m.w1.size());
    for (std::size_t h = 0; h < m.w1.size(); ++h) {
        f.hidden[h] = std::tanh(m.b1[h] + std::inner_product(x.begin(), x.end(), m.w1[h].begin(), 0.0));
    }
    f.probs.resize(m.w2.size());
    for (std::size_t c = 0; c < m.w2.size(); ++c) {
        f.probs[c] = m.b2[c] + std::inner_product(f.hidden.begin(), f.hidden.end(), m.w2[c].begin(), 0.0);
    }
    softmax_inplace(f.probs);
    return f;
}

MlpModel fit_mlp(const MlpParams& p, const std::vector<std::vector<double>>& raw, const std::vector<int>& y,
                 int n_classes, Rng& rng) {
    MlpModel m;
    m.standardizer = fit_standardizer(raw);
    std::vector<std::vector<double>> x;
    x.reserve(raw.size());
    for (const auto& row : raw) x.push_back(standardize(m.standardizer, row));
    const std::size_t d = x.front().size();
    const auto width = static_cast<std::size_t>(p.hidden_width);
    const auto n_out = static_cast<std::size_t>(n_classes);

    m.w1.assign(width, std::vector<double>(d));
    m.b1.assign(width, 0.0);
    m.w2.assign(n_out, std::vector<double>(width));
    m.b2.assign(n_out, 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(width));
    for (auto& row : m.w1) for (double& v : row) v = s1 * rng.normal();
    for (auto& row : m.w2) for (double& v : row) v = s2 * rng.normal();

    const double n = static_cast<double>(x.size());
    for (int epoch = 0; epoch <= p.epochs; ++epoch) {
        std::vector<std::vector<double>> g1(width, std::vector<double>(d, 0.0));
        std::vector<double> gb1(width, 0.0);
        std::vector<std::vector<double>> g2(n_out, std::vector<double>(width, 0.0));
        std::vector<double> gb2(n_out, 0.0);
        double loss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const MlpForward f = mlp_forward(m, x[i]);
            const auto yi = static_cast<std::size_t>(y[i]);
            loss -= std::log(std::max(f.probs[yi], 1e-300));
            std::vector<double> delta_out = f.probs;
            delta_out[yi] -= 1.0;
            std::vector<double> delta_hidden(width, 0.0);
            for (std::size_t c = 0; c < n_out; ++c) {
                gb2[c] += delta_out[c];
                for (std::size_t h = 0; h < width; ++h) {
                    g2[c][h] += delta_out[c] * f.hidden[h];
                    delta_hidden[h] += delta_out[c] * m.w2[c][h];
                }
            }
            for (std::size_t h = 0; h < width; ++h) {
                const double dh = delta_hidden[h] * (1.0 - f.hidden[h] * f.hidden[h]);
                gb1[h] += dh;
                for (std::size_t j = 0; j < d; ++j) g1[h][j] += dh * x[i][j];
            }
        }
        m.loss_history.push_back(loss / n);
        if (epoch == p.epochs) {
            break;
        }
        const double step = p.learning_rate / n;
        for (std::size_t h = 0; h < width; ++h) {
            m.b1[h] -= step * gb1[h];
            for (std::size_t j = 0; j < d; ++j) m.w1[h][j] -= step * g1[h][j];
        }
        for (std::size_t c = 0; c < n_out; ++c) {
            m.b2[c] -= step * gb2[c];
            for (std::size_t h = 0; h < width; ++h) m.w2[c][h] -= step * g2[c][h];
        }
    }
    return m;
}

} // namespace

TrainedModel fit(const ModelSpec& spec, const Dataset& train, std::vector<int> features) {
    spec.validate();
    if (train.empty()) {
        throw Error(ErrorCode::EmptyTrainSet, "cannot fit a model on an empty train set");
    }
    const std::vector<int> y = train.labels();
    const std::size_t dim = train.dim();
    if (features.empty()) {
        features.resize(dim);
        std::iota(features.begin(), features.end(), 0);
    }
    for (int f : features) {
        if (f < 0 || static_cast<std::size_t>(f) >= dim) {
            throw Error(ErrorCode::DimensionMismatch, "feature index " + std::to_string(f) + " out of range");
        }
    }
    std::vector<std::vector<double>> x;
    x.reserve(train.size());
    for (const Instance& inst : train) {
        x.push_back(project(inst.features, features));
    }
    bool degenerate = true;
    for (std::size_t j = 0; j < features.size() && degenerate; ++j) {
        for (const auto& row : x) {
            if (row[j] != x.front()[j]) {
                degenerate = false;
                break;
            }
        }
    }

    Rng rng(spec.seed);
    const int n = train.n_classes();
    TrainedModel::Params params = std::visit(
        [&](const auto& p) -> TrainedModel::Params {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, GaussianNbParams>) {
                return fit_nb(p, x, y, n);
            } else if constexpr (std::is_same_v<P, KnnParams>) {
                return KnnModel{p.k, x, y};
            } else if constexpr (std::is_same_v<P, CartParams>) {
                return CartBuilder(p, x, y, n).build();
            } else if constexpr (std::is_same_v<P, LinearParams>) {
                return fit_linear(p, x, y, n, rng);
            } else {
                return fit_mlp(p, x, y, n, rng);
            }
        },
        spec.params);
    return TrainedModel(std::move(params), n, dim, std::move(features), degenerate);
}

ScoreVector TrainedModel::score(std::span<const double> full_features) const {
    if (full_features.size() != input_dim_) {
        throw Error(ErrorCode::DimensionMismatch, "instance has " + std::to_string(full_features.size()) +
                                                      " features, model expects " + std::to_string(input_dim_));
    }
    const std::vector<double> x = project(full_features, features_);
    return std::visit(
        [&](const auto& m) -> ScoreVector {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, NbModel>) {
                return score_nb(m, x);
            } else if constexpr (std::is_same_v<M, KnnModel>) {
                return score_knn(m, x, n_classes_);
            } else if constexpr (std::is_same_v<M, CartModel>) {
                return score_cart(m, x);
            } else if constexpr (std::is_same_v<M, LinearModel>) {
                return score_linear(m, x);
            } else {
                return mlp_forward(m, standardize(m.standardizer, x)).probs;
            }
        },
        params_);
}

ScoreMatrix predict_scores(const TrainedModel& model, const Dataset& instances) {
    ScoreMatrix out;
    out.reserve(instances.size());
    for (const Instance& inst : instances) {
        out.push_back(model.score(inst.features));
    }
    return out;
}

} // namespace calibal
