#include "calibal/errors.hpp"
#include "calibal/harness.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace calibal;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& features, const std::vector<std::optional<int>>& labels,
                     int n_classes, const std::optional<std::vector<std::int64_t>>& ids) {
    if (!labels.empty() && labels.size() != features.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    if (ids && ids->size() != features.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and ids differ in length");
    }
    std::vector<Instance> rows;
    rows.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        rows.push_back({ids ? (*ids)[i] : static_cast<std::int64_t>(i), features[i],
                        labels.empty() ? std::nullopt : labels[i]});
    }
    return Dataset(std::move(rows), n_classes);
}

ModelSpec model_spec(const std::string& family, std::uint64_t seed, const py::dict& params) {
    nlohmann::json doc = {{"family", family}};
    for (const auto& [key, value] : params) {
        const std::string k = py::str(key);
        if (py::isinstance<py::bool_>(value)) {
            throw Error(ErrorCode::InvalidConfig, "model parameter '" + k + "' must be numeric");
        } else if (py::isinstance<py::int_>(value)) {
            doc[k] = value.cast<long long>();
        } else {
            doc[k] = value.cast<double>();
        }
    }
    ModelSpec spec = parse_model_spec(doc);
    spec.seed = RngSeed{seed};
    return spec;
}

py::dict score_dict(const CalibrationScore& s) {
    py::dict d;
    d["score"] = s.score;
    d["k_term"] = s.k_term;
    d["pcs_minus_k"] = s.pcs_minus_k;
    return d;
}

py::list reference_list(std::span<const ReferenceScores> refs) {
    py::list out;
    for (const auto& r : refs) {
        py::dict d;
        d["reference"] = std::string(to_string(r.kind));
        d["apcs"] = score_dict(r.apcs);
        d["mpcs"] = score_dict(r.mpcs);
        out.append(d);
    }
    return out;
}

py::dict reliability_dict(const ReliabilityBin& b) {
    py::dict d;
    d["lo"] = b.lo;
    d["hi"] = b.hi;
    d["count"] = b.count;
    d["mean_confidence"] = b.mean_confidence;
    d["accuracy"] = b.accuracy;
    return d;
}

py::dict savings_dict(const SavingsReport& s) {
    py::dict d;
    d["total"] = s.total;
    d["human"] = s.human;
    d["machine"] = s.machine;
    d["discarded"] = s.discarded;
    d["soft_labeled"] = s.soft_labeled;
    d["soft_labeled_ok"] = s.soft_labeled_ok;
    d["model_ok"] = s.model_ok;
    d["similarity_ok"] = s.similarity_ok;
    return d;
}

py::dict quartile_dict(const QuartileSummary& q) {
    py::dict d;
    d["q1_auc"] = q.q1_auc_mean;
    d["q4_auc"] = q.q4_auc_mean;
    return d;
}

py::dict run_dict(const AlRunResult& r) {
    py::list ledger;
    for (const auto& e : r.ledger) {
        py::dict d;
        d["step"] = e.step;
        d["instance_id"] = e.instance_id;
        d["source"] = std::string(to_string(e.source));
        d["label"] = e.label;
        d["correct"] = e.correct;
        d["confidence"] = e.confidence;
        d["model_label"] = e.model_label;
        d["similarity_label"] = e.similarity_label;
        d["machine_candidate"] = e.machine_candidate;
        d["truth"] = e.truth;
        ledger.append(d);
    }
    py::list snapshots;
    for (const auto& s : r.snapshots) {
        py::dict d;
        d["fraction"] = s.fraction;
        d["auc"] = s.auc;
        d["n_labeled"] = s.n_labeled;
        d["n_features"] = s.n_features;
        snapshots.append(d);
    }
    py::dict out;
    out["oracle"] = std::string(to_string(r.oracle));
    out["ledger"] = ledger;
    out["snapshots"] = snapshots;
    out["savings"] = savings_dict(savings_report(r));
    out["quartiles"] = r.snapshots.empty() ? py::object(py::none()) : py::object(quartile_dict(quartile_summary(r)));
    return out;
}

py::dict calibration_row_dict(const CalibrationRow& r) {
    py::dict d;
    d["model"] = r.model;
    d["technique"] = r.technique;
    d["fold"] = r.fold;
    d["ok"] = r.ok;
    d["error"] = r.error;
    d["auc_roc"] = r.auc_roc;
    d["test_auc_roc"] = r.test_auc_roc;
    d["ece"] = r.ece;
    d["references"] = reference_list(r.references);
    return d;
}

py::dict quartile_row_dict(const QuartileTableRow& r) {
    py::dict d;
    d["experiment"] = r.experiment;
    d["threshold"] = r.threshold;
    d["model"] = r.model;
    d["runs"] = r.runs;
    d["q1_mean"] = r.q1_mean;
    d["q4_mean"] = r.q4_mean;
    d["q1_sem"] = r.q1_sem;
    d["q4_sem"] = r.q4_sem;
    d["significant"] = r.significant;
    return d;
}

// Held by value so the variant is not converted element-wise by the STL casters.
struct MapHandle {
    CalibrationMap map;
};

ExperimentConfig config_from(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    return parse_config(doc);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Calibration and active-learning experiment toolkit";

    static py::exception<Error> error_type(m, "CalibalError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("features"), py::arg("labels") = std::vector<std::optional<int>>{},
             py::arg("n_classes") = 2, py::arg("ids") = std::nullopt)
        .def_property_readonly("n_classes", &Dataset::n_classes)
        .def_property_readonly("dim", &Dataset::dim)
        .def("__len__", &Dataset::size)
        .def_property_readonly("features",
                               [](const Dataset& d) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& inst : d) out.push_back(inst.features);
                                   return out;
                               })
        .def_property_readonly("labels",
                               [](const Dataset& d) {
                                   std::vector<std::optional<int>> out;
                                   for (const auto& inst : d) out.push_back(inst.label);
                                   return out;
                               })
        .def_property_readonly("ids",
                               [](const Dataset& d) {
                                   std::vector<std::int64_t> out;
                                   for (const auto& inst : d) out.push_back(inst.id);
                                   return out;
                               })
        .def("class_counts", &Dataset::class_counts)
        .def("without_labels", &Dataset::without_labels)
        .def("subset", [](const Dataset& d, const std::vector<std::size_t>& positions) { return d.subset(positions); })
        .def_static("from_csv", [](const std::filesystem::path& p) { return load_csv(p); })
        .def("to_csv", [](const Dataset& d, const std::filesystem::path& p) { write_csv(p, d); });

    py::class_<FoldPlan>(m, "FoldPlan")
        .def_readonly("k", &FoldPlan::k)
        .def_readonly("assignment", &FoldPlan::assignment)
        .def("members", &FoldPlan::members);

    py::class_<SplitSpec>(m, "SplitSpec")
        .def(py::init([](std::vector<int> test, std::vector<int> calibration, std::vector<int> pool,
                         std::vector<int> train) {
                 return SplitSpec{std::move(test), std::move(calibration), std::move(pool), std::move(train)};
             }),
             py::arg("test"), py::arg("calibration"), py::arg("pool"), py::arg("train"))
        .def_static("rotation", &SplitSpec::rotation, py::arg("k"), py::arg("offset"))
        .def_readonly("test_folds", &SplitSpec::test_folds)
        .def_readonly("calibration_folds", &SplitSpec::calibration_folds)
        .def_readonly("pool_folds", &SplitSpec::pool_folds)
        .def_readonly("train_folds", &SplitSpec::train_folds);

    py::class_<Split>(m, "Split")
        .def_readonly("train", &Split::train)
        .def_readonly("test", &Split::test)
        .def_readonly("calibration", &Split::calibration)
        .def_readonly("pool", &Split::pool);

    m.def("gen_synthetic",
          [](int total, std::uint64_t seed, int n_classes, std::optional<std::vector<int>> counts, int dim,
             double separation, double spread, double overlap) {
              SyntheticConfig cfg = SyntheticConfig::use_case(total, RngSeed{seed});
              cfg.n_classes = n_classes;
              if (counts) cfg.counts = *counts;
              cfg.dim = dim;
              cfg.separation = separation;
              cfg.spread = spread;
              cfg.overlap = overlap;
              return gen_synthetic(cfg);
          },
          py::arg("total") = 1000, py::arg("seed") = 0, py::arg("n_classes") = 3, py::arg("counts") = std::nullopt,
          py::arg("dim") = 64, py::arg("separation") = 3.0, py::arg("spread") = 1.0, py::arg("overlap") = 1.0);
    m.def("stratified_kfold",
          [](const Dataset& d, int k, std::uint64_t seed) { return stratified_kfold(d, k, RngSeed{seed}); },
          py::arg("dataset"), py::arg("k") = 10, py::arg("seed") = 0);
    m.def("assemble_split", &assemble_split, py::arg("dataset"), py::arg("plan"), py::arg("spec"));
    m.def("mutual_information",
          [](const std::vector<double>& f, const std::vector<int>& y, int bins) { return mutual_information(f, y, bins); },
          py::arg("feature"), py::arg("labels"), py::arg("bins") = kDefaultMiBins);
    m.def("select_top_k",
          [](const Dataset& train, int bins) {
              const FeatureSelection s = select_top_k(train, bins);
              return py::make_tuple(s.selected_indices, s.scores);
          },
          py::arg("train"), py::arg("bins") = kDefaultMiBins);

    py::class_<TrainedModel>(m, "Model")
        .def_property_readonly("n_classes", &TrainedModel::n_classes)
        .def_property_readonly("features", &TrainedModel::features)
        .def_property_readonly("degenerate", &TrainedModel::degenerate)
        .def("score", [](const TrainedModel& model, const std::vector<double>& x) { return model.score(x); })
        .def("predict_scores", &predict_scores);
    m.def("fit",
          [](const std::string& family, const Dataset& train, std::vector<int> features, std::uint64_t seed,
             const py::kwargs& params) { return fit(model_spec(family, seed, params), train, std::move(features)); },
          py::arg("family"), py::arg("train"), py::arg("features") = std::vector<int>{}, py::arg("seed") = 0);
    m.def("predicted_class", [](const std::vector<double>& s) { return predicted_class(s); });

    py::class_<TDigest>(m, "TDigest")
        .def(py::init<double>(), py::arg("compression") = TDigest::kDefaultCompression)
        .def("add", &TDigest::add, py::arg("value"), py::arg("weight") = 1.0)
        .def("merge_from", &TDigest::merge_from)
        .def("compress", &TDigest::compress)
        .def("quantile", &TDigest::quantile)
        .def("cdf", &TDigest::cdf)
        .def("bin_mass", &TDigest::bin_mass, py::arg("lo"), py::arg("hi"))
        .def_property_readonly("total_weight", &TDigest::total_weight)
        .def_property_readonly("compression", &TDigest::compression)
        .def_property_readonly("min", &TDigest::min)
        .def_property_readonly("max", &TDigest::max)
        .def("centroids", [](const TDigest& d) {
            std::vector<std::pair<double, double>> out;
            for (const auto& c : d.centroids()) out.emplace_back(c.mean, c.weight);
            return out;
        });
    m.def("merge_digests", &merge);

    // Calibration maps are opaque; the JSON form is available for inspection.
    py::class_<MapHandle>(m, "CalibrationMap")
        .def("to_json", [](const MapHandle& h) { return to_json(h.map).dump(); })
        .def_static("from_json",
                    [](const std::string& text) {
                        return MapHandle{calibration_map_from_json(nlohmann::json::parse(text))};
                    })
        .def_property_readonly("technique", [](const MapHandle& h) {
            if (const auto* ahpc = std::get_if<AhpcState>(&h.map)) {
                return std::string(ahpc->mode == AhpcMode::Fixed ? "ahpc_fixed" : "ahpc_adaptive");
            }
            static const char* names[] = {"none", "platt", "temperature", "histogram_gt"};
            return std::string(names[h.map.index()]);
        });
    m.def("fit_calibration",
          [](const std::string& technique, const ScoreMatrix& scores, const std::vector<int>& labels, int bins,
             double compression) {
              return MapHandle{fit_calibration(parse_technique(technique), scores, labels, bins, compression)};
          },
          py::arg("technique"), py::arg("scores"), py::arg("labels") = std::vector<int>{},
          py::arg("bins") = kDefaultBins, py::arg("compression") = TDigest::kDefaultCompression);
    m.def("calibrate", [](const MapHandle& h, const ScoreMatrix& scores) { return calibrate(h.map, scores); },
          py::arg("map"), py::arg("scores"));
    m.def("ahpc_update",
          [](const MapHandle& h, const ScoreMatrix& scores) {
              const auto* ahpc = std::get_if<AhpcState>(&h.map);
              if (!ahpc) throw Error(ErrorCode::FixedModeUpdate, "only AHPC maps absorb new predictions");
              return MapHandle{ahpc_update(*ahpc, scores)};
          },
          py::arg("map"), py::arg("scores"));
    m.def("ahpc_table", [](const MapHandle& h) {
        const auto* ahpc = std::get_if<AhpcState>(&h.map);
        if (!ahpc) throw Error(ErrorCode::UnfittedMap, "not an AHPC map");
        return ahpc_table(*ahpc);
    });

    m.def("auc_binary",
          [](const std::vector<double>& s, const std::vector<int>& y) { return auc_binary(s, y); },
          py::arg("scores"), py::arg("labels"));
    m.def("auc_ovr_weighted",
          [](const ScoreMatrix& s, const std::vector<int>& y) { return auc_ovr_weighted(s, y); }, py::arg("scores"),
          py::arg("labels"));
    m.def("ece", [](const ScoreMatrix& s, const std::vector<int>& y, int bins) { return ece(s, y, bins); },
          py::arg("scores"), py::arg("labels"), py::arg("bins") = 10);
    m.def("reliability_bins",
          [](const ScoreMatrix& s, const std::vector<int>& y, int bins) {
              py::list out;
              for (const auto& b : reliability_bins(s, y, bins)) out.append(reliability_dict(b));
              return out;
          },
          py::arg("scores"), py::arg("labels"), py::arg("bins") = 10);
    m.def("density_histogram",
          [](const std::vector<double>& v, int bins) { return density_histogram(v, bins).mass; }, py::arg("values"),
          py::arg("bins") = 10);
    m.def("wasserstein1",
          [](std::vector<double> a, std::vector<double> b) { return wasserstein1({std::move(a)}, {std::move(b)}); });
    m.def("reference_histogram",
          [](const std::string& kind, int n_classes, int bins) {
              for (ReferenceKind k : kAllReferences) {
                  if (to_string(k) == kind) return reference_histogram(k, n_classes, bins).mass;
              }
              throw Error(ErrorCode::InvalidArgument, "unknown reference '" + kind + "'");
          },
          py::arg("kind"), py::arg("n_classes"), py::arg("bins") = 10);
    auto histograms = [](const std::vector<std::vector<double>>& hs) {
        std::vector<Histogram> out;
        for (const auto& h : hs) out.push_back({h});
        return out;
    };
    m.def("apcs",
          [histograms](double auc, const std::vector<std::vector<double>>& hs, std::vector<double> ref) {
              return score_dict(apcs(auc, histograms(hs), {std::move(ref)}));
          },
          py::arg("auc"), py::arg("class_histograms"), py::arg("reference"));
    m.def("mpcs",
          [histograms](double auc, const std::vector<std::vector<double>>& hs, std::vector<double> ref) {
              return score_dict(mpcs(auc, histograms(hs), {std::move(ref)}));
          },
          py::arg("auc"), py::arg("class_histograms"), py::arg("reference"));
    m.def("score_references",
          [](double test_auc, const ScoreMatrix& s, int bins) { return reference_list(score_references(test_auc, s, bins)); },
          py::arg("test_auc"), py::arg("scores"), py::arg("bins") = 10);
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });

    m.def("run_experiment",
          [](int experiment, const Split& split, const std::string& family, double threshold, std::uint64_t seed,
             int retrain_every, const std::string& calibration, double stream_keep_prob,
             bool use_soft_labels_in_training, const py::dict& model_params) {
              AlConfig c = AlConfig::experiment(experiment, threshold, model_spec(family, seed, model_params),
                                                RngSeed{seed});
              c.retrain_every = retrain_every;
              c.calibration = parse_technique(calibration);
              c.stream_keep_prob = stream_keep_prob;
              c.use_soft_labels_in_training = use_soft_labels_in_training;
              AlRunResult r;
              {
                  py::gil_scoped_release release;
                  r = run_active_learning(c, split);
              }
              return run_dict(r);
          },
          py::arg("experiment"), py::arg("split"), py::arg("family") = "nb", py::arg("threshold") = 0.95,
          py::arg("seed") = 0, py::arg("retrain_every") = 1, py::arg("calibration") = "platt",
          py::arg("stream_keep_prob") = 0.5, py::arg("use_soft_labels_in_training") = true,
          py::arg("model_params") = py::dict());
    m.def("similarity_oracle",
          [](const std::vector<double>& x, const Dataset& labeled, std::uint64_t seed, const std::vector<int>& features) {
              return similarity_oracle({0, x, std::nullopt}, labeled, RngSeed{seed}, features);
          },
          py::arg("features"), py::arg("labeled"), py::arg("seed") = 0, py::arg("selected") = std::vector<int>{});
    m.def("paired_significance",
          [](const std::vector<double>& before, const std::vector<double>& after, double alpha) {
              return paired_significance(before, after, alpha);
          },
          py::arg("before"), py::arg("after"), py::arg("alpha") = 0.05);

    m.def("_run_calibration_suite",
          [](const std::string& config_json, bool write) {
              const ExperimentConfig config = config_from(config_json);
              CalibrationSuiteResult r;
              {
                  py::gil_scoped_release release;
                  r = run_calibration_suite(config);
                  if (write) write_calibration_outputs(r, config.out);
              }
              py::list folds, summary;
              for (const auto& row : r.folds) folds.append(calibration_row_dict(row));
              for (const auto& row : r.summary) summary.append(calibration_row_dict(row));
              py::dict out;
              out["folds"] = folds;
              out["summary"] = summary;
              out["errors"] = r.error_rows();
              return out;
          },
          py::arg("config_json"), py::arg("write"));
    m.def("_run_al_suite",
          [](const std::string& config_json, bool write) {
              const ExperimentConfig config = config_from(config_json);
              AlSuiteResult r;
              {
                  py::gil_scoped_release release;
                  r = run_al_suite(config);
                  if (write) write_al_outputs(r, config.out);
              }
              py::list runs, quartiles;
              for (const auto& run : r.runs) {
                  py::dict d;
                  d["experiment"] = run.row.experiment;
                  d["threshold"] = run.row.threshold;
                  d["model"] = run.row.model;
                  d["fold"] = run.row.fold;
                  d["ok"] = run.row.ok;
                  d["error"] = run.row.error;
                  d["quartiles"] = quartile_dict(run.row.quartiles);
                  d["savings"] = savings_dict(run.row.savings);
                  runs.append(d);
              }
              for (const auto& q : r.quartiles) quartiles.append(quartile_row_dict(q));
              py::dict out;
              out["runs"] = runs;
              out["quartiles"] = quartiles;
              out["errors"] = r.error_rows();
              return out;
          },
          py::arg("config_json"), py::arg("write"));
    m.def("_load_config_document",
          [](const std::filesystem::path& path) { return load_config_document(path).dump(); });
    m.def("_report", [](const std::filesystem::path& dir) {
        std::ostringstream log;
        const std::size_t errors = report(dir, log);
        return py::make_tuple(errors, log.str());
    });
}
