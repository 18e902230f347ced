#include "calibal/errors.hpp"
#include "calibal/harness.hpp"

#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace calibal {

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.models = {{"nb", ModelSpec{GaussianNbParams{}}}, {"knn", ModelSpec{KnnParams{}}}, {"cart", ModelSpec{CartParams{}}},
                {"svm", ModelSpec{LinearParams{}}},   {"mlp", ModelSpec{MlpParams{}}}};
    c.techniques = {Technique::None,        Technique::Platt,     Technique::Temperature,
                    Technique::HistogramGt, Technique::AhpcFixed, Technique::AhpcAdaptive};
    c.experiments = {1, 2, 3, 4, 5, 6, 7, 8};
    c.thresholds = {0.95, 0.99};
    return c;
}

std::vector<int> ExperimentConfig::active_rotations() const {
    if (!rotations.empty()) {
        return rotations;
    }
    std::vector<int> all(static_cast<std::size_t>(folds));
    for (int i = 0; i < folds; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::InvalidConfig, what);
    };
    require(folds >= 4, "folds must be >= 4");
    for (int r : rotations) require(r >= 0 && r < folds, "rotation " + std::to_string(r) + " outside 0..folds-1");
    require(!models.empty(), "at least one model is required");
    require(!techniques.empty(), "at least one calibration technique is required");
    for (std::size_t i = 0; i < models.size(); ++i) {
        models[i].spec.validate();
        for (std::size_t j = 0; j < i; ++j) require(models[i].name != models[j].name, "duplicate model name " + models[i].name);
    }
    for (int e : experiments) require(e >= 1 && e <= 8, "experiment ids must lie in 1..8");
    for (double p : thresholds) require(p > 0.0 && p < 1.0, "thresholds must lie in (0, 1)");
    require(bins >= 2 && mi_bins >= 2, "bins and mi_bins must be >= 2");
    require(compression > 0.0, "compression must be > 0");
    require(retrain_every >= 1, "retrain_every must be >= 1");
    require(stream_keep_prob >= 0.0 && stream_keep_prob <= 1.0, "stream_keep_prob must lie in [0, 1]");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(jobs >= 1, "jobs must be >= 1");
    if (!csv) {
        synthetic.validate();
    }
}

ModelSpec parse_model_spec(const nlohmann::json& doc) {
    const std::string family = doc.at("family").get<std::string>();
    ModelSpec spec;
    if (family == "nb" || family == "gaussian_nb") {
        GaussianNbParams p;
        p.variance_floor = doc.value("variance_floor", p.variance_floor);
        spec.params = p;
    } else if (family == "knn") {
        KnnParams p;
        p.k = doc.value("k", p.k);
        spec.params = p;
    } else if (family == "cart") {
        CartParams p;
        p.max_depth = doc.value("max_depth", p.max_depth);
        p.min_leaf = doc.value("min_leaf", p.min_leaf);
        spec.params = p;
    } else if (family == "svm" || family == "linear") {
        LinearParams p;
        p.epochs = doc.value("epochs", p.epochs);
        p.learning_rate = doc.value("learning_rate", p.learning_rate);
        p.regularization = doc.value("regularization", p.regularization);
        spec.params = p;
    } else if (family == "mlp") {
        MlpParams p;
        p.hidden_width = doc.value("hidden_width", p.hidden_width);
        p.epochs = doc.value("epochs", p.epochs);
        p.learning_rate = doc.value("learning_rate", p.learning_rate);
        spec.params = p;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown model family '" + family + "'");
    }
    spec.validate();
    return spec;
}

namespace {

SyntheticConfig parse_synthetic(const nlohmann::json& j, RngSeed master) {
    const int total = j.value("total", 1000);
    SyntheticConfig s = SyntheticConfig::use_case(total, derive_seed(master, {0x73796eULL}));
    s.n_classes = j.value("n_classes", s.n_classes);
    if (j.contains("counts")) {
        s.counts = j.at("counts").get<std::vector<int>>();
    } else if (s.n_classes != 3) {
        throw Error(ErrorCode::InvalidConfig, "synthetic counts are required when n_classes != 3");
    }
    s.dim = j.value("dim", s.dim);
    s.separation = j.value("separation", s.separation);
    s.spread = j.value("spread", s.spread);
    s.overlap = j.value("overlap", s.overlap);
    if (j.contains("means")) {
        s.means = j.at("means").get<std::vector<std::vector<double>>>();
    }
    if (j.contains("seed")) {
        s.seed = RngSeed{j.at("seed").get<std::uint64_t>()};
    }
    s.validate();
    return s;
}

} // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
    ExperimentConfig c = ExperimentConfig::defaults();
    try {
        if (!doc.is_object()) {
            throw Error(ErrorCode::InvalidConfig, "config root must be an object");
        }
        if (doc.contains("seed")) c.seed = RngSeed{doc.at("seed").get<std::uint64_t>()};
        if (doc.contains("data")) {
            const auto& data = doc.at("data");
            if (data.contains("csv")) {
                c.csv = std::filesystem::path(data.at("csv").get<std::string>());
            } else if (data.contains("synthetic")) {
                c.synthetic = parse_synthetic(data.at("synthetic"), c.seed);
            } else {
                throw Error(ErrorCode::InvalidConfig, "data needs a 'csv' or 'synthetic' entry");
            }
        } else {
            c.synthetic = parse_synthetic(nlohmann::json::object(), c.seed);
        }
        c.folds = doc.value("folds", c.folds);
        if (doc.contains("rotations")) c.rotations = doc.at("rotations").get<std::vector<int>>();
        if (doc.contains("models")) {
            c.models.clear();
            for (const auto& m : doc.at("models")) {
                ModelSpec spec = parse_model_spec(m);
                std::string name = m.value("name", spec.family());
                c.models.push_back({std::move(name), std::move(spec)});
            }
        }
        if (doc.contains("techniques")) {
            c.techniques.clear();
            for (const auto& t : doc.at("techniques")) c.techniques.push_back(parse_technique(t.get<std::string>()));
        }
        if (doc.contains("experiments")) c.experiments = doc.at("experiments").get<std::vector<int>>();
        if (doc.contains("thresholds")) c.thresholds = doc.at("thresholds").get<std::vector<double>>();
        c.bins = doc.value("bins", c.bins);
        c.mi_bins = doc.value("mi_bins", c.mi_bins);
        c.compression = doc.value("compression", c.compression);
        c.retrain_every = doc.value("retrain_every", c.retrain_every);
        c.stream_keep_prob = doc.value("stream_keep_prob", c.stream_keep_prob);
        c.use_soft_labels_in_training = doc.value("use_soft_labels_in_training", c.use_soft_labels_in_training);
        if (doc.contains("al_calibration")) c.al_calibration = parse_technique(doc.at("al_calibration").get<std::string>());
        c.alpha = doc.value("alpha", c.alpha);
        if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
        c.jobs = doc.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

namespace {

nlohmann::json node_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, value] : *t) out[std::string(key.str())] = node_to_json(value);
        return out;
    }
    if (const auto* a = node.as_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& value : *a) out.push_back(node_to_json(value));
        return out;
    }
    if (const auto* v = node.as_string()) return v->get();
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    throw Error(ErrorCode::InvalidConfig, "unsupported TOML value type (dates are not accepted)");
}

} // namespace

nlohmann::json toml_to_json(std::string_view text) {
    try {
        const toml::table table = toml::parse(text);
        return node_to_json(table);
    } catch (const toml::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("TOML: ") + std::string(e.description()));
    }
}

nlohmann::json load_config_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (path.extension() == ".toml") {
        return toml_to_json(text);
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(load_config_document(path)); }

Dataset load_dataset(const ExperimentConfig& config) {
    return config.csv ? load_csv(*config.csv) : gen_synthetic(config.synthetic);
}

FoldPlan suite_fold_plan(const ExperimentConfig& config, const Dataset& dataset) {
    return stratified_kfold(dataset, config.folds, derive_seed(config.seed, {0xF01DULL}));
}

} // namespace calibal
