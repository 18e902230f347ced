#include "calibal/errors.hpp"
#include "calibal/harness.hpp"
#include "harness_internal.hpp"

#include <charconv>
#include <fstream>
#include <cctype>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace calibal {

namespace fs = std::filesystem;
using detail::csv_cell;
using detail::fmt;

namespace detail {

std::vector<std::vector<std::string>> read_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n') {
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else if (c != '\r') {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted CSV cell");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

namespace {

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

double to_double(const std::string& s) {
    if (s == "NA") return 0.0;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
    return v;
}

std::optional<double> to_opt(const std::string& s) {
    if (s == "NA") return std::nullopt;
    return to_double(s);
}

long long to_int(const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::ParseError, "bad integer '" + s + "'");
    return v;
}

// Header-indexed access to the rows of a CSV table.
class Table {
public:
    explicit Table(const fs::path& path) {
        rows_ = detail::read_csv_rows(slurp(path));
        if (rows_.empty()) throw Error(ErrorCode::ParseError, path.string() + " has no header");
        for (std::size_t i = 0; i < rows_[0].size(); ++i) columns_[rows_[0][i]] = i;
        for (std::size_t r = 1; r < rows_.size(); ++r) {
            if (rows_[r].size() != rows_[0].size()) {
                throw Error(ErrorCode::ParseError,
                            path.string() + ": row " + std::to_string(r + 1) + " has the wrong number of cells");
            }
        }
    }

    std::size_t size() const { return rows_.size() - 1; }

    const std::string& at(std::size_t row, const std::string& column) const {
        auto it = columns_.find(column);
        if (it == columns_.end()) throw Error(ErrorCode::ParseError, "missing column '" + column + "'");
        return rows_[row + 1][it->second];
    }

private:
    std::vector<std::vector<std::string>> rows_;
    std::map<std::string, std::size_t> columns_;
};

const char* const kScoreColumns[] = {"apcs", "apcs_k", "apcs_pcs_minus_k", "mpcs", "mpcs_k", "mpcs_pcs_minus_k"};

void write_calibration_header(std::ostream& out, const char* fold_column) {
    out << "model,technique," << fold_column << ",ok,error,auc_roc,test_auc_roc,ece";
    for (ReferenceKind kind : kAllReferences) {
        for (const char* col : kScoreColumns) out << ',' << to_string(kind) << '_' << col;
    }
    out << '\n';
}

void write_calibration_row(std::ostream& out, const CalibrationRow& row) {
    out << csv_cell(row.model) << ',' << csv_cell(row.technique) << ',' << row.fold << ',' << (row.ok ? 1 : 0) << ','
        << csv_cell(row.error);
    if (!row.ok) {
        for (int i = 0; i < 3 + 3 * 6; ++i) out << ",NA";
        out << '\n';
        return;
    }
    out << ',' << fmt(row.auc_roc) << ',' << fmt(row.test_auc_roc) << ',' << fmt(row.ece);
    for (const auto& ref : row.references) {
        out << ',' << fmt(ref.apcs.score) << ',' << fmt(ref.apcs.k_term) << ',' << fmt(ref.apcs.pcs_minus_k) << ','
            << fmt(ref.mpcs.score) << ',' << fmt(ref.mpcs.k_term) << ',' << fmt(ref.mpcs.pcs_minus_k);
    }
    out << '\n';
}

void write_calibration_table(const fs::path& path, std::span<const CalibrationRow> rows, const char* fold_column) {
    auto out = open_out(path);
    write_calibration_header(out, fold_column);
    for (const auto& row : rows) write_calibration_row(out, row);
}

void write_correlations(const fs::path& path, std::span<const CorrelationRow> rows) {
    auto out = open_out(path);
    out << "scope,reference,ece_apcs,ece_apcs_pcs_minus_k,ece_mpcs,ece_mpcs_pcs_minus_k\n";
    for (const auto& r : rows) {
        out << csv_cell(r.scope) << ',' << to_string(r.reference) << ',' << opt(r.ece_apcs) << ','
            << opt(r.ece_apcs_pcs) << ',' << opt(r.ece_mpcs) << ',' << opt(r.ece_mpcs_pcs) << '\n';
    }
}

void write_quartiles(const fs::path& path, std::span<const QuartileTableRow> rows, bool per_model) {
    auto out = open_out(path);
    out << "experiment,threshold," << (per_model ? "model," : "") << "runs,q1_mean,q1_sem,q4_mean,q4_sem,significant\n";
    for (const auto& r : rows) {
        out << r.experiment << ',' << fmt(r.threshold) << ',';
        if (per_model) out << csv_cell(r.model) << ',';
        out << r.runs << ',' << fmt(r.q1_mean) << ',' << fmt(r.q1_sem) << ',' << fmt(r.q4_mean) << ','
            << fmt(r.q4_sem) << ',' << (r.significant ? (*r.significant ? "1" : "0") : "NA") << '\n';
    }
}

void write_savings(const fs::path& path, std::span<const SavingsTableRow> rows) {
    auto out = open_out(path);
    out << "experiment,threshold,decisions,soft_labeled,soft_labeled_ok,model_ok,similarity_ok\n";
    for (const auto& r : rows) {
        out << r.experiment << ',' << fmt(r.threshold) << ',' << r.decisions << ',' << fmt(r.soft_labeled) << ','
            << opt(r.soft_labeled_ok) << ',' << opt(r.model_ok) << ',' << opt(r.similarity_ok) << '\n';
    }
}

void write_al_runs(const fs::path& path, std::span<const AlRunRow> rows) {
    auto out = open_out(path);
    out << "experiment,threshold,model,fold,ok,error,q1_auc,q4_auc,total,human,machine,discarded,soft_correct,"
           "model_correct,similarity_correct,soft_labeled,soft_labeled_ok,model_ok,similarity_ok\n";
    for (const auto& r : rows) {
        out << r.experiment << ',' << fmt(r.threshold) << ',' << csv_cell(r.model) << ',' << r.fold << ','
            << (r.ok ? 1 : 0) << ',' << csv_cell(r.error);
        if (!r.ok) {
            for (int i = 0; i < 13; ++i) out << ",NA";
            out << '\n';
            continue;
        }
        const SavingsReport& s = r.savings;
        out << ',' << fmt(r.quartiles.q1_auc_mean) << ',' << fmt(r.quartiles.q4_auc_mean) << ',' << s.total << ','
            << s.human << ',' << s.machine << ',' << s.discarded << ',' << s.soft_correct << ',' << s.model_correct
            << ',' << s.similarity_correct << ',' << fmt(s.soft_labeled) << ',' << opt(s.soft_labeled_ok) << ','
            << opt(s.model_ok) << ',' << opt(s.similarity_ok) << '\n';
    }
}

nlohmann::json calibration_json(std::span<const CalibrationRow> summary, std::span<const CorrelationRow> corr,
                                std::size_t errors) {
    nlohmann::json j;
    j["error_rows"] = errors;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : summary) {
        nlohmann::json row{{"model", r.model}, {"technique", r.technique}, {"folds", r.fold}, {"ok", r.ok}};
        if (r.ok) {
            row["auc_roc"] = r.auc_roc;
            row["test_auc_roc"] = r.test_auc_roc;
            row["ece"] = r.ece;
            for (const auto& ref : r.references) {
                row[std::string(to_string(ref.kind))] = {{"apcs", ref.apcs.score},
                                                         {"apcs_k", ref.apcs.k_term},
                                                         {"mpcs", ref.mpcs.score},
                                                         {"mpcs_k", ref.mpcs.k_term}};
            }
        }
        rows.push_back(std::move(row));
    }
    j["summary"] = std::move(rows);
    nlohmann::json c = nlohmann::json::array();
    for (const auto& r : corr) {
        auto v = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
        c.push_back({{"scope", r.scope},
                     {"reference", std::string(to_string(r.reference))},
                     {"ece_apcs", v(r.ece_apcs)},
                     {"ece_apcs_pcs_minus_k", v(r.ece_apcs_pcs)},
                     {"ece_mpcs", v(r.ece_mpcs)},
                     {"ece_mpcs_pcs_minus_k", v(r.ece_mpcs_pcs)}});
    }
    j["correlations"] = std::move(c);
    return j;
}

nlohmann::json al_json(std::span<const QuartileTableRow> quartiles, std::span<const SavingsTableRow> savings,
                       double alpha, std::size_t errors) {
    nlohmann::json j;
    j["error_rows"] = errors;
    j["significance"] = {{"test", "paired two-sided t-test on per-run (Q4 - Q1)"}, {"alpha", alpha}};
    nlohmann::json q = nlohmann::json::array();
    for (const auto& r : quartiles) {
        q.push_back({{"experiment", r.experiment},
                     {"threshold", r.threshold},
                     {"runs", r.runs},
                     {"q1_mean", r.q1_mean},
                     {"q4_mean", r.q4_mean},
                     {"significant", r.significant ? nlohmann::json(*r.significant) : nlohmann::json(nullptr)}});
    }
    j["quartiles"] = std::move(q);
    nlohmann::json s = nlohmann::json::array();
    for (const auto& r : savings) {
        auto v = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
        s.push_back({{"experiment", r.experiment},
                     {"threshold", r.threshold},
                     {"decisions", r.decisions},
                     {"soft_labeled", r.soft_labeled},
                     {"soft_labeled_ok", v(r.soft_labeled_ok)},
                     {"model_ok", v(r.model_ok)},
                     {"similarity_ok", v(r.similarity_ok)}});
    }
    j["savings"] = std::move(s);
    return j;
}

// Replaces one top-level section of summary.json, keeping the others.
void update_summary(const fs::path& dir, const std::string& section, nlohmann::json value) {
    const fs::path path = dir / "summary.json";
    nlohmann::json doc = nlohmann::json::object();
    if (fs::exists(path)) {
        try {
            doc = nlohmann::json::parse(slurp(path));
        } catch (const nlohmann::json::exception&) {
            doc = nlohmann::json::object();
        }
    }
    doc[section] = std::move(value);
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

std::string run_stem(const AlRunRow& row) {
    std::string model;
    for (char c : row.model) model += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
    return "e" + std::to_string(row.experiment) + "_p" + fmt(row.threshold) + "_" + model + "_f" +
           std::to_string(row.fold);
}

} // namespace

void write_fold_plan(std::ostream& out, const Dataset& dataset, const FoldPlan& plan) {
    out << "id,fold,label\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset[i].id << ',' << plan.assignment[i] << ',';
        if (dataset[i].label) out << *dataset[i].label;
        out << '\n';
    }
}

void write_calibration_outputs(const CalibrationSuiteResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    write_calibration_table(dir / "calibration_folds.csv", result.folds, "fold");
    write_calibration_table(dir / "calibration_summary.csv", result.summary, "n_folds");
    write_correlations(dir / "calibration_correlations.csv", result.correlations);
    auto out = open_out(dir / "reliability.csv");
    out << "model,technique,fold,bin,lo,hi,count,mean_confidence,accuracy\n";
    for (const auto& r : result.reliability) {
        out << csv_cell(r.model) << ',' << csv_cell(r.technique) << ',' << r.fold << ',' << r.bin << ','
            << fmt(r.data.lo) << ',' << fmt(r.data.hi) << ',' << r.data.count << ',' << fmt(r.data.mean_confidence)
            << ',' << fmt(r.data.accuracy) << '\n';
    }
    update_summary(dir, "calibration", calibration_json(result.summary, result.correlations, result.error_rows()));
}

void write_ledger(std::ostream& out, const AlRunResult& result) {
    out << "step,instance_id,source,label,correct,confidence,model_label,similarity_label,machine_candidate,truth\n";
    for (const auto& d : result.ledger) {
        out << d.step << ',' << d.instance_id << ',' << to_string(d.source) << ',';
        if (d.label) out << *d.label;
        out << ',';
        if (d.correct) out << (*d.correct ? 1 : 0);
        out << ',' << fmt(d.confidence) << ',' << d.model_label << ',';
        if (d.similarity_label) out << *d.similarity_label;
        out << ',' << (d.machine_candidate ? 1 : 0) << ',' << d.truth << '\n';
    }
}

void write_snapshots(std::ostream& out, const AlRunResult& result) {
    out << "fraction,auc,n_labeled,n_features\n";
    for (const auto& s : result.snapshots) {
        out << fmt(s.fraction) << ',' << fmt(s.auc) << ',' << s.n_labeled << ',' << s.n_features << '\n';
    }
}

void write_al_outputs(const AlSuiteResult& result, const fs::path& dir) {
    fs::create_directories(dir / "ledgers");
    fs::create_directories(dir / "snapshots");
    std::vector<AlRunRow> rows;
    for (const auto& run : result.runs) {
        rows.push_back(run.row);
        if (!run.row.ok) continue;
        const std::string stem = run_stem(run.row);
        auto ledger = open_out(dir / "ledgers" / (stem + ".csv"));
        write_ledger(ledger, run.result);
        auto snapshots = open_out(dir / "snapshots" / (stem + ".csv"));
        write_snapshots(snapshots, run.result);
    }
    write_al_runs(dir / "al_runs.csv", rows);
    write_quartiles(dir / "al_quartiles.csv", result.quartiles, false);
    write_quartiles(dir / "al_models.csv", result.per_model, true);
    write_savings(dir / "al_savings.csv", result.savings);
    update_summary(dir, "al", al_json(result.quartiles, result.savings, result.alpha, result.error_rows()));
}

std::vector<CalibrationRow> read_calibration_folds(const fs::path& csv) {
    const Table t(csv);
    std::vector<CalibrationRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        CalibrationRow r;
        r.model = t.at(i, "model");
        r.technique = t.at(i, "technique");
        r.fold = static_cast<int>(to_int(t.at(i, "fold")));
        r.ok = t.at(i, "ok") == "1";
        r.error = t.at(i, "error");
        if (r.ok) {
            r.auc_roc = to_double(t.at(i, "auc_roc"));
            r.test_auc_roc = to_double(t.at(i, "test_auc_roc"));
            r.ece = to_double(t.at(i, "ece"));
        }
        for (std::size_t k = 0; k < r.references.size(); ++k) {
            auto& ref = r.references[k];
            ref.kind = kAllReferences[k];
            if (!r.ok) continue;
            const std::string prefix = std::string(to_string(ref.kind)) + "_";
            ref.apcs.score = to_double(t.at(i, prefix + "apcs"));
            ref.apcs.k_term = to_double(t.at(i, prefix + "apcs_k"));
            ref.apcs.pcs_minus_k = to_double(t.at(i, prefix + "apcs_pcs_minus_k"));
            ref.mpcs.score = to_double(t.at(i, prefix + "mpcs"));
            ref.mpcs.k_term = to_double(t.at(i, prefix + "mpcs_k"));
            ref.mpcs.pcs_minus_k = to_double(t.at(i, prefix + "mpcs_pcs_minus_k"));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<AlRunRow> read_al_runs(const fs::path& csv) {
    const Table t(csv);
    std::vector<AlRunRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        AlRunRow r;
        r.experiment = static_cast<int>(to_int(t.at(i, "experiment")));
        r.threshold = to_double(t.at(i, "threshold"));
        r.model = t.at(i, "model");
        r.fold = static_cast<int>(to_int(t.at(i, "fold")));
        r.ok = t.at(i, "ok") == "1";
        r.error = t.at(i, "error");
        if (r.ok) {
            r.quartiles.q1_auc_mean = to_double(t.at(i, "q1_auc"));
            r.quartiles.q4_auc_mean = to_double(t.at(i, "q4_auc"));
            SavingsReport& s = r.savings;
            s.total = static_cast<std::size_t>(to_int(t.at(i, "total")));
            s.human = static_cast<std::size_t>(to_int(t.at(i, "human")));
            s.machine = static_cast<std::size_t>(to_int(t.at(i, "machine")));
            s.discarded = static_cast<std::size_t>(to_int(t.at(i, "discarded")));
            s.soft_correct = static_cast<std::size_t>(to_int(t.at(i, "soft_correct")));
            s.model_correct = static_cast<std::size_t>(to_int(t.at(i, "model_correct")));
            s.similarity_correct = static_cast<std::size_t>(to_int(t.at(i, "similarity_correct")));
            s.soft_labeled = to_double(t.at(i, "soft_labeled"));
            s.soft_labeled_ok = to_opt(t.at(i, "soft_labeled_ok"));
            s.model_ok = to_opt(t.at(i, "model_ok"));
            s.similarity_ok = to_opt(t.at(i, "similarity_ok"));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::size_t report(const fs::path& dir, std::ostream& log) {
    const fs::path calib = dir / "calibration_folds.csv";
    const fs::path al = dir / "al_runs.csv";
    if (!fs::exists(calib) && !fs::exists(al)) {
        throw Error(ErrorCode::Io, "no calibration_folds.csv or al_runs.csv in " + dir.string());
    }
    std::size_t errors = 0;
    log << std::fixed << std::setprecision(4);
    if (fs::exists(calib)) {
        const auto folds = read_calibration_folds(calib);
        std::size_t bad = 0;
        for (const auto& r : folds) bad += r.ok ? 0 : 1;
        errors += bad;
        const auto summary = summarize_calibration(folds);
        const auto corr = calibration_correlations(summary);
        write_calibration_table(dir / "calibration_summary.csv", summary, "n_folds");
        write_correlations(dir / "calibration_correlations.csv", corr);
        update_summary(dir, "calibration", calibration_json(summary, corr, bad));
        log << "calibration: " << folds.size() << " fold rows, " << bad << " errors\n";
        log << "model\ttechnique\tauc\tece\tapcs[pcpccm,pcm,apcm]\tmpcs[pcpccm,pcm,apcm]\n";
        for (const auto& r : summary) {
            log << r.model << '\t' << r.technique << '\t';
            if (!r.ok) {
                log << r.error << '\n';
                continue;
            }
            log << r.auc_roc << '\t' << r.ece << '\t';
            for (const auto& ref : r.references) log << ref.apcs.score << ' ';
            log << '\t';
            for (const auto& ref : r.references) log << ref.mpcs.score << ' ';
            log << '\n';
        }
    }
    if (fs::exists(al)) {
        const auto rows = read_al_runs(al);
        std::size_t bad = 0;
        for (const auto& r : rows) bad += r.ok ? 0 : 1;
        errors += bad;
        double alpha = 0.05;
        if (fs::exists(dir / "summary.json")) {
            try {
                alpha = nlohmann::json::parse(slurp(dir / "summary.json")).at("al").at("significance").at("alpha");
            } catch (const nlohmann::json::exception&) {
            }
        }
        const auto quartiles = quartile_table(rows, false, alpha);
        const auto per_model = quartile_table(rows, true, alpha);
        const auto savings = savings_table(rows);
        write_quartiles(dir / "al_quartiles.csv", quartiles, false);
        write_quartiles(dir / "al_models.csv", per_model, true);
        write_savings(dir / "al_savings.csv", savings);
        update_summary(dir, "al", al_json(quartiles, savings, alpha, bad));
        log << "active learning: " << rows.size() << " runs, " << bad << " errors\n";
        log << "exp\tp\truns\tQ1\tQ4\tsignificant\n";
        for (const auto& q : quartiles) {
            log << q.experiment << '\t' << q.threshold << '\t' << q.runs << '\t' << q.q1_mean << '\t' << q.q4_mean
                << '\t' << (q.significant ? (*q.significant ? "yes" : "no") : "NA") << '\n';
        }
        log << "exp\tp\tsoft_labeled\tsoft_ok\tmodel_ok\tsimilarity_ok\n";
        for (const auto& s : savings) {
            auto v = [](const std::optional<double>& x) {
                std::ostringstream o;
                o << std::fixed << std::setprecision(4);
                if (x) o << *x; else o << "NA";
                return o.str();
            };
            log << s.experiment << '\t' << s.threshold << '\t' << s.soft_labeled << '\t' << v(s.soft_labeled_ok)
                << '\t' << v(s.model_ok) << '\t' << v(s.similarity_ok) << '\n';
        }
    }
    return errors;
}

} // namespace calibal
