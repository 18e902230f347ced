#include "calibal/ingest.hpp"

#include "calibal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

namespace calibal {

SyntheticConfig SyntheticConfig::use_case(int total, RngSeed seed) {
    SyntheticConfig config;
    const int minority = std::max(1, total * 5 / 100);
    const int middle = std::max(1, total * 10 / 100);
    config.counts = {total - middle - minority, middle, minority};
    config.seed = seed;
    return config;
}

void SyntheticConfig::validate() const {
    if (n_classes < 2) {
        throw Error(ErrorCode::InvalidConfig, "synthetic n_classes must be >= 2");
    }
    if (counts.size() != static_cast<std::size_t>(n_classes)) {
        throw Error(ErrorCode::InvalidConfig, "synthetic counts must list one entry per class");
    }
    if (std::any_of(counts.begin(), counts.end(), [](int c) { return c <= 0; })) {
        throw Error(ErrorCode::InvalidConfig, "synthetic class counts must be positive");
    }
    if (dim < 1) {
        throw Error(ErrorCode::InvalidConfig, "synthetic dim must be >= 1");
    }
    if (!(spread > 0.0) || !(overlap > 0.0) || !std::isfinite(spread * overlap)) {
        throw Error(ErrorCode::InvalidConfig, "synthetic spread and overlap must be positive and finite");
    }
    if (!means.empty()) {
        if (means.size() != static_cast<std::size_t>(n_classes)) {
            throw Error(ErrorCode::InvalidConfig, "synthetic means must list one vector per class");
        }
        for (const auto& m : means) {
            if (m.size() != static_cast<std::size_t>(dim)) {
                throw Error(ErrorCode::InvalidConfig, "synthetic mean vector has wrong dimension");
            }
        }
    }
}

std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& config) {
    config.validate();
    if (!config.means.empty()) {
        return config.means;
    }
    Rng rng(derive_seed(config.seed, {0x6d65616e73ULL}));
    std::vector<std::vector<double>> means(static_cast<std::size_t>(config.n_classes));
    for (auto& mean : means) {
        mean.resize(static_cast<std::size_t>(config.dim));
        double norm = 0.0;
        for (double& v : mean) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : mean) {
            v *= config.separation / norm;
        }
    }
    return means;
}

Dataset gen_synthetic(const SyntheticConfig& config) {
    const auto means = synthetic_class_means(config);
    const double sigma = config.spread * config.overlap;
    Rng rng(derive_seed(config.seed, {0x73616d706c65ULL}));

    std::vector<int> labels;
    for (int c = 0; c < config.n_classes; ++c) {
        labels.insert(labels.end(), static_cast<std::size_t>(config.counts[static_cast<std::size_t>(c)]), c);
    }
    rng.shuffle(std::span<int>(labels));

    std::vector<Instance> rows;
    rows.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& mean = means[static_cast<std::size_t>(labels[i])];
        Instance inst{static_cast<std::int64_t>(i), std::vector<double>(mean.size()), labels[i]};
        for (std::size_t j = 0; j < mean.size(); ++j) {
            inst.features[j] = mean[j] + sigma * rng.normal();
        }
        rows.push_back(std::move(inst));
    }
    return Dataset(std::move(rows), config.n_classes);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) {
        return false;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

[[noreturn]] void fail_at(ErrorCode code, std::size_t line, const std::string& what) {
    throw Error(code, "line " + std::to_string(line) + ": " + what);
}

} // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    int n_classes = -1;
    std::vector<std::string_view> header;
    std::string header_line;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) {
            view.remove_prefix(3);
        }
        if (view.empty() || view.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        if (view.front() == '#') {
            const auto key = view.find("n_classes=");
            if (key != std::string_view::npos) {
                std::string_view rest = view.substr(key + 10);
                while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.remove_suffix(1);
                if (!parse_number(rest, n_classes)) {
                    fail_at(ErrorCode::ParseError, line_no, "bad n_classes declaration");
                }
            }
            continue;
        }
        header_line = std::string(view);
        break;
    }
    if (header_line.empty()) {
        throw Error(ErrorCode::ParseError, "missing header row");
    }
    if (n_classes < 2) {
        throw Error(ErrorCode::ParseError, "missing or invalid '# n_classes=<n>' declaration");
    }
    header = split_fields(header_line);
    if (header.empty() || header.front() != "id") {
        fail_at(ErrorCode::ParseError, line_no, "header must start with 'id'");
    }
    const bool has_label = header.back() == "label";
    const std::size_t dim = header.size() - 1 - (has_label ? 1 : 0);
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[j + 1] != "f" + std::to_string(j)) {
            fail_at(ErrorCode::ParseError, line_no, "expected column f" + std::to_string(j));
        }
    }

    std::vector<Instance> rows;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (view.empty() || view.find_first_not_of(" \t\r") == std::string_view::npos || view.front() == '#') {
            continue;
        }
        const auto fields = split_fields(view);
        if (fields.size() != header.size()) {
            fail_at(ErrorCode::DimensionMismatch, line_no,
                    "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        std::int64_t file_id = 0;
        if (!parse_number(fields[0], file_id)) {
            fail_at(ErrorCode::ParseError, line_no, "id is not an integer");
        }
        Instance inst{static_cast<std::int64_t>(rows.size()), std::vector<double>(dim), std::nullopt};
        for (std::size_t j = 0; j < dim; ++j) {
            if (!parse_number(fields[j + 1], inst.features[j]) || !std::isfinite(inst.features[j])) {
                fail_at(ErrorCode::ParseError, line_no, "bad value in column f" + std::to_string(j));
            }
        }
        if (has_label && !fields.back().empty()) {
            int label = 0;
            if (!parse_number(fields.back(), label)) {
                fail_at(ErrorCode::ParseError, line_no, "label is not an integer");
            }
            if (label < 0 || label >= n_classes) {
                fail_at(ErrorCode::LabelOutOfRange, line_no, "label " + std::to_string(label));
            }
            inst.label = label;
        }
        rows.push_back(std::move(inst));
    }
    return Dataset(std::move(rows), n_classes);
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& dataset) {
    const bool labeled = std::any_of(dataset.begin(), dataset.end(), [](const Instance& i) { return i.label.has_value(); });
    out << "# n_classes=" << dataset.n_classes() << '\n' << "id";
    for (std::size_t j = 0; j < dataset.dim(); ++j) {
        out << ",f" << j;
    }
    if (labeled) {
        out << ",label";
    }
    out << '\n';
    char buf[32];
    for (const Instance& inst : dataset) {
        out << inst.id;
        for (double v : inst.features) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        if (labeled) {
            out << ',';
            if (inst.label) {
                out << *inst.label;
            }
        }
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    write_csv(out, dataset);
}

double mutual_information(std::span<const double> feature, std::span<const int> labels, int bins) {
    if (feature.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "feature has " + std::to_string(feature.size()) + " values, labels " +
                                                   std::to_string(labels.size()));
    }
    if (bins < 2) {
        throw Error(ErrorCode::InvalidArgument, "bins must be >= 2");
    }
    const std::size_t n = feature.size();
    if (n == 0) {
        return 0.0;
    }
    const int n_labels = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return feature[a] < feature[b]; });

    // A run of equal values takes the bin of its first rank.
    std::vector<int> bin_of(n);
    std::size_t run_start = 0;
    int run_bin = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (r == 0 || feature[order[r]] != feature[order[run_start]]) {
            run_start = r;
            run_bin = static_cast<int>((r * static_cast<std::size_t>(bins)) / n);
        }
        bin_of[order[r]] = run_bin;
    }

    std::vector<double> joint(static_cast<std::size_t>(bins * n_labels), 0.0);
    std::vector<double> px(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> py(static_cast<std::size_t>(n_labels), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        joint[static_cast<std::size_t>(bin_of[i] * n_labels + labels[i])] += 1.0;
        px[static_cast<std::size_t>(bin_of[i])] += 1.0;
        py[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    const double total = static_cast<double>(n);
    double mi = 0.0;
    for (int b = 0; b < bins; ++b) {
        for (int y = 0; y < n_labels; ++y) {
            const double nxy = joint[static_cast<std::size_t>(b * n_labels + y)];
            if (nxy > 0.0) {
                mi += (nxy / total) * std::log(nxy * total / (px[static_cast<std::size_t>(b)] * py[static_cast<std::size_t>(y)]));
            }
        }
    }
    return std::max(0.0, mi);
}

std::size_t top_k_size(std::size_t n_train, std::size_t dim) {
    const auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_train))));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(dim, 1));
}

FeatureSelection select_top_k(const Dataset& train, int bins) {
    if (train.empty()) {
        throw Error(ErrorCode::EmptyTrainSet, "feature selection needs a non-empty train set");
    }
    if (train.dim() == 0) {
        throw Error(ErrorCode::InvalidArgument, "feature selection needs d >= 1");
    }
    const std::vector<int> labels = train.labels();
    const std::size_t d = train.dim();
    FeatureSelection sel;
    sel.scores.resize(d);
    std::vector<double> column(train.size());
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            column[i] = train[i].features[j];
        }
        sel.scores[j] = mutual_information(column, labels, bins);
    }
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return sel.scores[static_cast<std::size_t>(a)] > sel.scores[static_cast<std::size_t>(b)];
    });
    order.resize(top_k_size(train.size(), d));
    sel.selected_indices = std::move(order);
    return sel;
}

} // namespace calibal
