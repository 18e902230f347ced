#include "calibal/errors.hpp"
#include "calibal/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
};

calibal::ExperimentConfig resolve(const Options& opts) {
    nlohmann::json doc = opts.config.empty() ? nlohmann::json::object() : calibal::load_config_document(opts.config);
    if (!doc.is_object()) {
        throw calibal::Error(calibal::ErrorCode::InvalidConfig, "config root must be an object");
    }
    if (opts.seed) doc["seed"] = *opts.seed;
    if (opts.out) doc["out"] = *opts.out;
    if (opts.jobs) doc["jobs"] = *opts.jobs;
    return calibal::parse_config(doc);
}

int partial(std::size_t errors) {
    if (errors == 0) return 0;
    std::cerr << errors << " combination(s) failed; see the error column\n";
    return 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration and active-learning experiment runner"};
    app.require_subcommand(1);
    Options opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "JSON or TOML experiment config")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "master seed (u64)");
        sub->add_option("--out", opts.out, "output directory");
        sub->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    CLI::App* synth = app.add_subcommand("synth", "write the synthetic dataset as CSV");
    CLI::App* split = app.add_subcommand("split", "write the stratified fold plan");
    CLI::App* calib = app.add_subcommand("calib", "run the calibration comparison suite");
    CLI::App* al = app.add_subcommand("al", "run the active-learning experiment suite");
    CLI::App* rep = app.add_subcommand("report", "re-aggregate suite CSVs in --out");
    for (CLI::App* sub : {synth, split, calib, al, rep}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const calibal::ExperimentConfig config = resolve(opts);
        std::filesystem::create_directories(config.out);
        if (synth->parsed()) {
            const calibal::Dataset data = calibal::gen_synthetic(config.synthetic);
            calibal::write_csv(config.out / "dataset.csv", data);
            std::cout << "wrote " << data.size() << " instances to " << (config.out / "dataset.csv").string() << '\n';
        } else if (split->parsed()) {
            const calibal::Dataset data = calibal::load_dataset(config);
            const calibal::FoldPlan plan = calibal::suite_fold_plan(config, data);
            std::ofstream out(config.out / "fold_plan.csv", std::ios::binary);
            if (!out) throw calibal::Error(calibal::ErrorCode::Io, "cannot write fold_plan.csv");
            calibal::write_fold_plan(out, data, plan);
            std::cout << "wrote " << plan.k << "-fold plan to " << (config.out / "fold_plan.csv").string() << '\n';
        } else if (calib->parsed()) {
            const auto result = calibal::run_calibration_suite(config);
            calibal::write_calibration_outputs(result, config.out);
            std::cout << result.folds.size() << " calibration rows written to " << config.out.string() << '\n';
            return partial(result.error_rows());
        } else if (al->parsed()) {
            const auto result = calibal::run_al_suite(config);
            calibal::write_al_outputs(result, config.out);
            std::cout << result.runs.size() << " active-learning runs written to " << config.out.string() << '\n';
            return partial(result.error_rows());
        } else if (rep->parsed()) {
            return partial(calibal::report(config.out, std::cout));
        }
    } catch (const calibal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.category() == calibal::ErrorCategory::Config ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
