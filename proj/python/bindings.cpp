#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "valstudy/bias.hpp"
#include "valstudy/error.hpp"
#include "valstudy/estimators.hpp"
#include "valstudy/pipeline.hpp"

namespace py = pybind11;
using namespace valstudy;

namespace {

RunConfig config_from_text(const std::string& text, const std::string& base_dir) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_run_config(doc, base_dir);
}

py::dict regression_dict(const RegressionResult& r) {
    py::dict d;
    d["names"] = r.names;
    d["coefficients"] = r.coefficients;
    d["robust_se"] = r.robust_se;
    d["robust_cov"] = r.robust_cov;
    d["r_squared"] = r.r_squared;
    d["n_obs"] = r.n_obs;
    return d;
}

}  // namespace

PYBIND11_MODULE(_valstudy, m) {
    m.doc() = "Survey-versus-register earnings validation study";

    auto base = py::register_exception<Error>(m, "ValstudyError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.attr("REPORT_SCHEMA_VERSION") = kReportSchemaVersion;
    m.attr("DAYS_PER_MONTH") = kDaysPerMonth;

    m.def("daily_to_monthly", &daily_to_monthly, py::arg("daily_income"));

    m.def(
        "bias_regime",
        [](double signal_var, double error_var, double corr) {
            const auto b = bias_regime(signal_var, error_var, corr);
            py::dict d;
            d["factor"] = b.factor;
            d["regime"] = to_string(b.regime);
            d["degenerate"] = b.degenerate;
            return d;
        },
        py::arg("signal_var"), py::arg("error_var"), py::arg("corr"));

    m.def(
        "reliability_classical",
        [](const Eigen::MatrixXd& cov, int horizon, bool subtract_error_autocov) {
            ClassicalOptions opts;
            opts.subtract_error_autocov = subtract_error_autocov;
            const auto r = reliability_classical(MomentMatrix::from_covariances(horizon, cov, 0), opts);
            return py::make_tuple(r.level, r.fd);
        },
        py::arg("cov"), py::arg("horizon"), py::arg("subtract_error_autocov") = false,
        "Level and first-difference reliability ratios from a [log Y*_1..T, u_1..T] covariance matrix.");

    m.def(
        "ols",
        [](const std::vector<double>& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
           bool intercept, const std::vector<double>& weights) {
            if (static_cast<Eigen::Index>(names.size()) != x.cols())
                throw ConfigError("ols: names must match the number of columns");
            std::vector<NamedColumn> cols;
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                NamedColumn col{names[static_cast<std::size_t>(c)], {}};
                col.values.assign(x.col(c).data(), x.col(c).data() + x.rows());
                cols.push_back(std::move(col));
            }
            OlsOptions opts;
            opts.intercept = intercept;
            opts.weights = weights;
            const auto r = ols_fit(y, cols, opts);
            auto d = regression_dict(r);
            if (r.n_params > (intercept ? 1u : 0u)) {
                const auto f = joint_f_test(r);
                d["f_stat"] = f.f_stat;
                d["f_p_value"] = f.p_value;
            }
            return d;
        },
        py::arg("y"), py::arg("x"), py::arg("names"), py::arg("intercept") = true,
        py::arg("weights") = std::vector<double>{}, "OLS with HC1 standard errors and a joint robust F test.");

    m.def(
        "oracle",
        [](const std::string& config_json) {
            const auto cfg = config_from_text(config_json, ".");
            if (!cfg.dgp) throw ConfigError("config: section 'dgp' is required");
            return dump_json(oracle_to_json(oracle(*cfg.dgp)), -1);
        },
        py::arg("config_json"));

    m.def(
        "simulate",
        [](const std::string& config_json, const std::string& out_dir, const std::string& base_dir) {
            py::gil_scoped_release release;
            cmd_simulate(config_from_text(config_json, base_dir), out_dir);
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("base_dir") = ".");

    m.def(
        "analyze",
        [](const std::string& config_json, const std::string& panel_csv, const std::string& base_dir) {
            const auto cfg = config_from_text(config_json, base_dir);
            std::string text;
            {
                py::gil_scoped_release release;
                text = dump_json(run_analyses(read_panel_csv_file(panel_csv), cfg).report);
            }
            return text;
        },
        py::arg("config_json"), py::arg("panel_csv"), py::arg("base_dir") = ".",
        "Runs the configured pipeline and returns the report JSON text.");

    m.def(
        "analyze_to_dir",
        [](const std::string& config_json, const std::string& panel_csv, const std::string& out_dir,
           const std::string& base_dir) {
            py::gil_scoped_release release;
            cmd_analyze(config_from_text(config_json, base_dir), panel_csv, out_dir);
        },
        py::arg("config_json"), py::arg("panel_csv"), py::arg("out_dir"), py::arg("base_dir") = ".");

    m.def(
        "harmonize",
        [](const std::string& config_json, const std::string& spells_csv, const std::string& survey_csv,
           const std::string& out_dir, const std::string& base_dir) {
            py::gil_scoped_release release;
            cmd_harmonize(config_from_text(config_json, base_dir), spells_csv, survey_csv, out_dir);
        },
        py::arg("config_json"), py::arg("spells_csv"), py::arg("survey_csv"), py::arg("out_dir"),
        py::arg("base_dir") = ".");
}
