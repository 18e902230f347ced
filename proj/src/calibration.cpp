#include "calibal/calibration.hpp"

#include "calibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace calibal {

std::string_view to_string(Technique t) noexcept {
    switch (t) {
    case Technique::None: return "none";
    case Technique::Platt: return "platt";
    case Technique::Temperature: return "temperature";
    case Technique::HistogramGt: return "histogram_gt";
    case Technique::AhpcFixed: return "ahpc_fixed";
    case Technique::AhpcAdaptive: return "ahpc_adaptive";
    }
    return "none";
}

Technique parse_technique(std::string_view name) {
    for (Technique t : {Technique::None, Technique::Platt, Technique::Temperature, Technique::HistogramGt,
                        Technique::AhpcFixed, Technique::AhpcAdaptive}) {
        if (to_string(t) == name) {
            return t;
        }
    }
    throw Error(ErrorCode::InvalidConfig, "unknown calibration technique '" + std::string(name) + "'");
}

int bin_index(double score, int bins) noexcept {
    const int b = static_cast<int>(std::floor(score * bins));
    return std::clamp(b, 0, bins - 1);
}

namespace {

void check_scores(const ScoreMatrix& scores, std::span<const int> labels, bool need_labels) {
    if (need_labels && scores.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " score rows vs " +
                                                   std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = scores.empty() ? 0 : scores.front().size();
    for (const auto& row : scores) {
        if (row.size() != n) {
            throw Error(ErrorCode::DimensionMismatch, "score rows have different lengths");
        }
        for (double v : row) {
            if (std::isnan(v)) {
                throw Error(ErrorCode::NonFiniteValue, "calibration scores contain NaN");
            }
        }
    }
    if (need_labels) {
        for (int y : labels) {
            if (y < 0 || static_cast<std::size_t>(y) >= n) {
                throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
            }
        }
    }
}

// Numerically stable pieces of the Platt objective for z = a * f + b.
double sigmoid_loss(double target, double z) {
    return z >= 0.0 ? target * z + std::log1p(std::exp(-z)) : (target - 1.0) * z + std::log1p(std::exp(z));
}

double sigmoid_of(double z) { // 1 / (1 + exp(z))
    return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

std::vector<double> renormalize(std::vector<double> p, std::span<const double> fallback) {
    double sum = 0.0;
    for (double v : p) sum += v;
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        // Every class mapped to zero mass; keep the raw scores.
        p.assign(fallback.begin(), fallback.end());
        sum = std::accumulate(p.begin(), p.end(), 0.0);
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> temperature_probs(std::span<const double> raw, double temperature, double epsilon) {
    std::vector<double> z(raw.size());
    for (std::size_t c = 0; c < raw.size(); ++c) {
        z[c] = std::log(std::clamp(raw[c], epsilon, 1.0 - epsilon)) / temperature;
    }
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return z;
}

} // namespace

std::pair<double, double> platt_targets(std::size_t n_pos, std::size_t n_neg) noexcept {
    return {(static_cast<double>(n_pos) + 1.0) / (static_cast<double>(n_pos) + 2.0),
            1.0 / (static_cast<double>(n_neg) + 2.0)};
}

SigmoidParams fit_sigmoid(std::span<const double> f, std::span<const int> is_positive) {
    if (f.size() != is_positive.size()) {
        throw Error(ErrorCode::LengthMismatch, "scores and targets differ in length");
    }
    if (f.empty()) {
        throw Error(ErrorCode::EmptyInput, "sigmoid fit needs at least one score");
    }
    std::size_t n_pos = 0;
    for (int y : is_positive) n_pos += y != 0 ? 1 : 0;
    const std::size_t n_neg = f.size() - n_pos;
    const auto [hi, lo] = platt_targets(n_pos, n_neg);
    std::vector<double> t(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) t[i] = is_positive[i] != 0 ? hi : lo;

    auto objective = [&](double a, double b) {
        double v = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) v += sigmoid_loss(t[i], a * f[i] + b);
        return v;
    };

    SigmoidParams out;
    out.a = 0.0;
    out.b = std::log((static_cast<double>(n_neg) + 1.0) / (static_cast<double>(n_pos) + 1.0));
    double value = objective(out.a, out.b);
    constexpr int kMaxIterations = 200;
    constexpr double kGradTolerance = 1e-8;
    constexpr double kMinStep = 1e-10;
    constexpr double kSigma = 1e-12;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double p = sigmoid_of(out.a * f[i] + out.b);
            const double d2 = p * (1.0 - p);
            h11 += f[i] * f[i] * d2;
            h22 += d2;
            h21 += f[i] * d2;
            const double d1 = t[i] - p;
            g1 += f[i] * d1;
            g2 += d1;
        }
        out.iterations = iter;
        if (std::hypot(g1, g2) < kGradTolerance) {
            break;
        }
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= kMinStep) {
            const double na = out.a + step * da;
            const double nb = out.b + step * db;
            const double nv = objective(na, nb);
            if (nv < value + 1e-4 * step * gd) {
                out.a = na;
                out.b = nb;
                value = nv;
                break;
            }
            step /= 2.0;
        }
        if (step < kMinStep) {
            break;
        }
    }
    return out;
}

PlattMap fit_platt(const ScoreMatrix& scores, std::span<const int> labels) {
    check_scores(scores, labels, true);
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyInput, "Platt calibration needs a non-empty calibration set");
    }
    const std::size_t n = scores.front().size();
    PlattMap map;
    std::vector<double> column(scores.size());
    std::vector<int> positive(scores.size());
    for (std::size_t c = 0; c < n; ++c) {
        bool present = false;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            column[i] = scores[i][c];
            positive[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
            present = present || positive[i] != 0;
        }
        if (!present) {
            throw Error(ErrorCode::MissingClass, "class " + std::to_string(c) + " absent from calibration labels");
        }
        const SigmoidParams p = fit_sigmoid(column, positive);
        map.a.push_back(p.a);
        map.b.push_back(p.b);
    }
    return map;
}

double temperature_nll(const ScoreMatrix& scores, std::span<const int> labels, double temperature, double epsilon) {
    double nll = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto p = temperature_probs(scores[i], temperature, epsilon);
        nll -= std::log(std::max(p[static_cast<std::size_t>(labels[i])], 1e-300));
    }
    return scores.empty() ? 0.0 : nll / static_cast<double>(scores.size());
}

TemperatureMap fit_temperature(const ScoreMatrix& scores, std::span<const int> labels) {
    check_scores(scores, labels, true);
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyInput, "temperature scaling needs a non-empty calibration set");
    }
    TemperatureMap map;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = -4.0;
    double hi = 4.0;
    auto nll_at = [&](double log_t) { return temperature_nll(scores, labels, std::exp(log_t), map.epsilon); };
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = nll_at(x1);
    double f2 = nll_at(x2);
    while (hi - lo > 1e-4) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = nll_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = nll_at(x2);
        }
    }
    map.temperature = std::exp(0.5 * (lo + hi));
    return map;
}

HistogramGtMap fit_histogram_gt(const ScoreMatrix& scores, std::span<const int> labels, int bins) {
    if (bins < 2) {
        throw Error(ErrorCode::InvalidArgument, "histogram calibration needs bins >= 2");
    }
    check_scores(scores, labels, true);
    const std::size_t n = scores.empty() ? 0 : scores.front().size();
    const auto nb = static_cast<std::size_t>(bins);
    HistogramGtMap map;
    map.bins = bins;
    map.support.assign(n, std::vector<int>(nb, 0));
    map.positives.assign(n, std::vector<int>(nb, 0));
    map.value.assign(n, std::vector<double>(nb, 0.0));
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto b = static_cast<std::size_t>(bin_index(scores[i][c], bins));
            ++map.support[c][b];
            if (labels[i] == static_cast<int>(c)) {
                ++map.positives[c][b];
            }
        }
    }
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t b = 0; b < nb; ++b) {
            const int count = map.support[c][b];
            map.value[c][b] = count > 0 ? (map.positives[c][b] + 1.0) / (count + 2.0)
                                        : (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
        }
    }
    return map;
}

namespace {

void ahpc_insert(AhpcState& state, const ScoreMatrix& scores) {
    for (const auto& row : scores) {
        if (row.size() != state.all.size()) {
            throw Error(ErrorCode::DimensionMismatch, "score row length differs from the AHPC class count");
        }
        const auto predicted = static_cast<std::size_t>(predicted_class(row));
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double s = row[c];
            if (!(s >= 0.0 && s <= 1.0)) {
                throw Error(ErrorCode::OutOfRange, "AHPC scores must lie in [0, 1]");
            }
            state.all[c].add(s);
            if (predicted == c) {
                state.predicted[c].add(s);
            }
        }
    }
    for (std::size_t c = 0; c < state.all.size(); ++c) {
        state.all[c].compress();
        state.predicted[c].compress();
    }
}

} // namespace

AhpcState fit_ahpc(const ScoreMatrix& scores, int bins, AhpcMode mode, double compression) {
    if (bins < 2) {
        throw Error(ErrorCode::InvalidArgument, "AHPC needs bins >= 2");
    }
    check_scores(scores, {}, false);
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyInput, "AHPC needs at least one score row to fix the class count");
    }
    const std::size_t n = scores.front().size();
    AhpcState state;
    state.bins = bins;
    state.mode = mode;
    state.all.assign(n, TDigest(compression));
    state.predicted.assign(n, TDigest(compression));
    ahpc_insert(state, scores);
    return state;
}

AhpcState ahpc_update(AhpcState state, const ScoreMatrix& new_scores) {
    if (state.mode != AhpcMode::Adaptive) {
        throw Error(ErrorCode::FixedModeUpdate, "a fixed AHPC state cannot absorb new predictions");
    }
    ahpc_insert(state, new_scores);
    return state;
}

std::vector<std::vector<double>> ahpc_table(const AhpcState& state) {
    if (state.all.empty()) {
        throw Error(ErrorCode::UnfittedMap, "AHPC state has no classes");
    }
    const auto nb = static_cast<std::size_t>(state.bins);
    std::vector<std::vector<double>> table(state.all.size(), std::vector<double>(nb, 0.0));
    for (std::size_t c = 0; c < state.all.size(); ++c) {
        for (std::size_t b = 0; b < nb; ++b) {
            const double lo = static_cast<double>(b) / static_cast<double>(nb);
            const double hi = static_cast<double>(b + 1) / static_cast<double>(nb);
            const double denom = state.all[c].empty() ? 0.0 : state.all[c].bin_mass(lo, hi);
            if (denom <= 1e-12) {
                table[c][b] = 0.5 * (lo + hi);
                continue;
            }
            const double numer = state.predicted[c].empty() ? 0.0 : state.predicted[c].bin_mass(lo, hi);
            table[c][b] = std::clamp(numer / denom, 0.0, 1.0);
        }
    }
    return table;
}

CalibrationMap fit_calibration(Technique technique, const ScoreMatrix& scores, std::span<const int> labels, int bins,
                               double compression) {
    switch (technique) {
    case Technique::None: return IdentityMap{};
    case Technique::Platt: return fit_platt(scores, labels);
    case Technique::Temperature: return fit_temperature(scores, labels);
    case Technique::HistogramGt: return fit_histogram_gt(scores, labels, bins);
    case Technique::AhpcFixed: return fit_ahpc(scores, bins, AhpcMode::Fixed, compression);
    case Technique::AhpcAdaptive: return fit_ahpc(scores, bins, AhpcMode::Adaptive, compression);
    }
    return IdentityMap{};
}

namespace {

void require_classes(std::size_t have, std::size_t want, const char* what) {
    if (have == 0) {
        throw Error(ErrorCode::UnfittedMap, std::string(what) + " map has not been fitted");
    }
    if (have != want) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " map covers " + std::to_string(have) +
                                                      " classes, scores have " + std::to_string(want));
    }
}

std::vector<double> table_lookup(const std::vector<std::vector<double>>& table, int bins, std::span<const double> raw) {
    std::vector<double> out(raw.size());
    for (std::size_t c = 0; c < raw.size(); ++c) {
        out[c] = table[c][static_cast<std::size_t>(bin_index(raw[c], bins))];
    }
    return out;
}

} // namespace

std::vector<double> calibrate_unnormalized(const CalibrationMap& map, std::span<const double> raw) {
    return std::visit(
        [&](const auto& m) -> std::vector<double> {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, IdentityMap>) {
                return {raw.begin(), raw.end()};
            } else if constexpr (std::is_same_v<M, PlattMap>) {
                require_classes(m.a.size(), raw.size(), "Platt");
                std::vector<double> out(raw.size());
                for (std::size_t c = 0; c < raw.size(); ++c) out[c] = sigmoid_of(m.a[c] * raw[c] + m.b[c]);
                return out;
            } else if constexpr (std::is_same_v<M, TemperatureMap>) {
                if (!(m.temperature > 0.0)) {
                    throw Error(ErrorCode::UnfittedMap, "temperature must be > 0");
                }
                return temperature_probs(raw, m.temperature, m.epsilon);
            } else if constexpr (std::is_same_v<M, HistogramGtMap>) {
                require_classes(m.value.size(), raw.size(), "histogram");
                return table_lookup(m.value, m.bins, raw);
            } else {
                require_classes(m.all.size(), raw.size(), "AHPC");
                return table_lookup(ahpc_table(m), m.bins, raw);
            }
        },
        map);
}

ScoreVector calibrate(const CalibrationMap& map, std::span<const double> raw) {
    if (std::holds_alternative<IdentityMap>(map)) {
        return {raw.begin(), raw.end()};
    }
    return renormalize(calibrate_unnormalized(map, raw), raw);
}

ScoreMatrix calibrate(const CalibrationMap& map, const ScoreMatrix& raw) {
    ScoreMatrix out;
    out.reserve(raw.size());
    if (const auto* ahpc = std::get_if<AhpcState>(&map)) {
        const auto table = ahpc_table(*ahpc);
        for (const auto& row : raw) {
            require_classes(ahpc->all.size(), row.size(), "AHPC");
            out.push_back(renormalize(table_lookup(table, ahpc->bins, row), row));
        }
        return out;
    }
    for (const auto& row : raw) {
        out.push_back(calibrate(map, row));
    }
    return out;
}

namespace {

nlohmann::json digest_to_json(const TDigest& d) {
    nlohmann::json centroids = nlohmann::json::array();
    for (const Centroid& c : d.centroids()) {
        centroids.push_back({c.mean, c.weight});
    }
    return {{"compression", d.compression()}, {"min", d.min()}, {"max", d.max()}, {"centroids", centroids}};
}

TDigest digest_from_json(const nlohmann::json& j) {
    std::vector<Centroid> cs;
    for (const auto& pair : j.at("centroids")) {
        cs.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
    }
    return TDigest::from_parts(j.at("compression").get<double>(), std::move(cs), j.at("min").get<double>(),
                               j.at("max").get<double>());
}

} // namespace

nlohmann::json to_json(const CalibrationMap& map) {
    return std::visit(
        [](const auto& m) -> nlohmann::json {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, IdentityMap>) {
                return {{"technique", "none"}};
            } else if constexpr (std::is_same_v<M, PlattMap>) {
                return {{"technique", "platt"}, {"a", m.a}, {"b", m.b}};
            } else if constexpr (std::is_same_v<M, TemperatureMap>) {
                return {{"technique", "temperature"}, {"temperature", m.temperature}, {"epsilon", m.epsilon}};
            } else if constexpr (std::is_same_v<M, HistogramGtMap>) {
                return {{"technique", "histogram_gt"}, {"bins", m.bins},          {"value", m.value},
                        {"support", m.support},        {"positives", m.positives}};
            } else {
                nlohmann::json all = nlohmann::json::array();
                nlohmann::json predicted = nlohmann::json::array();
                for (const auto& d : m.all) all.push_back(digest_to_json(d));
                for (const auto& d : m.predicted) predicted.push_back(digest_to_json(d));
                return {{"technique", m.mode == AhpcMode::Fixed ? "ahpc_fixed" : "ahpc_adaptive"},
                        {"bins", m.bins},
                        {"all", all},
                        {"predicted", predicted}};
            }
        },
        map);
}

CalibrationMap calibration_map_from_json(const nlohmann::json& doc) {
    try {
        const Technique t = parse_technique(doc.at("technique").get<std::string>());
        switch (t) {
        case Technique::None: return IdentityMap{};
        case Technique::Platt:
            return PlattMap{doc.at("a").get<std::vector<double>>(), doc.at("b").get<std::vector<double>>()};
        case Technique::Temperature:
            return TemperatureMap{doc.at("temperature").get<double>(), doc.value("epsilon", 1e-6)};
        case Technique::HistogramGt:
            return HistogramGtMap{doc.at("bins").get<int>(), doc.at("value").get<std::vector<std::vector<double>>>(),
                                  doc.at("support").get<std::vector<std::vector<int>>>(),
                                  doc.at("positives").get<std::vector<std::vector<int>>>()};
        case Technique::AhpcFixed:
        case Technique::AhpcAdaptive: {
            AhpcState s;
            s.bins = doc.at("bins").get<int>();
            s.mode = t == Technique::AhpcFixed ? AhpcMode::Fixed : AhpcMode::Adaptive;
            for (const auto& d : doc.at("all")) s.all.push_back(digest_from_json(d));
            for (const auto& d : doc.at("predicted")) s.predicted.push_back(digest_from_json(d));
            if (s.all.size() != s.predicted.size()) {
                throw Error(ErrorCode::ParseError, "AHPC digest lists differ in length");
            }
            return s;
        }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("calibration map JSON: ") + e.what());
    }
    return IdentityMap{};
}

} // namespace calibal
