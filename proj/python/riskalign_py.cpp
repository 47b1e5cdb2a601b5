#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "riskalign/alignment.hpp"
#include "riskalign/error.hpp"
#include "riskalign/grading.hpp"
#include "riskalign/metrics.hpp"
#include "riskalign/models.hpp"
#include "riskalign/pipeline.hpp"
#include "riskalign/shapley.hpp"
#include "riskalign/smote.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskalign;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
json parse(const std::string& text) { return json::parse(text); }

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(0, cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw Error("rows must all have the same length");
        m.append_row(r);
    }
    return m;
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
    return out;
}

Dataset to_dataset(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   std::vector<std::string> names) {
    Dataset d;
    d.x = to_matrix(x);
    if (y.size() != d.x.rows()) throw Error("x and y differ in length");
    if (names.empty())
        for (std::size_t c = 0; c < d.x.cols(); ++c) names.push_back("x" + std::to_string(c));
    d.feature_names = std::move(names);
    d.labels = y;
    for (std::size_t i = 0; i < y.size(); ++i) {
        d.company_ids.push_back(std::to_string(i));
        d.years.push_back(0);
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "riskalign native core";
    py::register_exception<Error>(m, "RiskalignError", PyExc_ValueError);

    m.def("roc_auc", [](const std::vector<int>& y, const std::vector<double>& s) { return roc_auc(y, s); });
    m.def(
        "evaluate_json",
        [](const std::vector<int>& y, const std::vector<double>& p, double threshold) {
            return json(evaluate(y, p, threshold)).dump();
        },
        py::arg("labels"), py::arg("probabilities"), py::arg("threshold") = 0.5);

    m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); });
    m.def("kendall_tau_b",
          [](const std::vector<double>& a, const std::vector<double>& b) { return kendall_tau_b(a, b); });
    m.def("survey_ranking", [](const fs::path& path) {
        const auto r = aggregate_and_rank(load_survey(path));
        return py::make_tuple(r.features, r.totals, r.ranking);
    });

    m.def("assign_grade", [](double p, const std::vector<double>& bounds) {
        return std::string(1, to_char(assign_grade(p, fixed_intervals(bounds))));
    });

    m.def(
        "smote",
        [](const std::vector<std::vector<double>>& x, const std::vector<int>& y, std::size_t k, double ratio,
           std::uint64_t seed) {
            SmoteConfig cfg{k, ratio, seed};
            cfg.validate();
            const auto r = smote_resample(to_dataset(x, y, {}), cfg);
            return py::make_tuple(to_rows(r.data.x), r.data.labels);
        },
        py::arg("x"), py::arg("y"), py::arg("k") = 10, py::arg("ratio") = 0.5, py::arg("seed") = 0);

    py::class_<FittedModel>(m, "Model")
        .def_property_readonly("kind", [](const FittedModel& f) { return std::string(to_string(f.kind())); })
        .def_property_readonly("feature_names", &FittedModel::feature_names)
        .def("predict_proba",
             [](const FittedModel& f, const std::vector<std::vector<double>>& x) { return f.predict_proba(to_matrix(x)); })
        .def("to_json", [](const FittedModel& f) { return f.to_json().dump(); })
        .def_static("from_json", [](const std::string& text) { return FittedModel::from_json(parse(text)); });

    m.def(
        "fit",
        [](const std::vector<std::vector<double>>& x, const std::vector<int>& y, const std::string& kind,
           const std::string& params, std::uint64_t seed, std::vector<std::string> names) {
            const auto k = parse_model_kind(kind);
            return fit(to_dataset(x, y, std::move(names)), hyperparameters_from_json(k, parse(params)), seed);
        },
        py::arg("x"), py::arg("y"), py::arg("kind"), py::arg("params") = "{}", py::arg("seed") = 0,
        py::arg("feature_names") = std::vector<std::string>{});

    m.def(
        "shapley_values",
        [](const FittedModel& f, const std::vector<double>& instance, const std::vector<std::vector<double>>& background) {
            AttributionConfig cfg;
            cfg.background = to_matrix(background);
            return shapley_values(probability_predictor(f), instance, cfg);
        },
        py::arg("model"), py::arg("instance"), py::arg("background"));

    m.def(
        "run_json",
        [](const std::string& config, const fs::path& base_dir, const fs::path& out_dir) {
            const auto cfg = RunConfig::from_json(parse(config), base_dir);
            py::gil_scoped_release release;
            return run_pipeline(cfg, out_dir).dump();
        },
        py::arg("config"), py::arg("base_dir"), py::arg("out_dir"));
    m.def("format_report_json", [](const std::string& bundle) { return format_report(parse(bundle)); });
    m.def("format_percent", &format_percent);
    m.def("format_fraction", &format_fraction);
}
