#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "valstudy/error.hpp"
#include "valstudy/pipeline.hpp"

using namespace valstudy;

namespace {

std::string config_error_message(const Json& doc) {
    try {
        parse_run_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

RunConfig simulated_config() {
    return parse_run_config(Json::parse(R"({
        "seed": 11,
        "dgp": {"n_units": 400, "n_periods": 3,
                "income": {"rho": 0.8, "signal_var": 0.5},
                "error": {"corr": -0.3, "error_var": 0.04, "error_mean": -0.07},
                "gap_hazard": 0.05},
        "balance": {"horizon": 3, "mode": "weak"}
    })"));
}

}  // namespace

TEST_CASE("config errors name the offending field") {
    CHECK(config_error_message(Json::parse(R"({"dgp": {"n_units": "many"}})")).find("dgp.n_units") != std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"dgp": {"income": {"rho": 1.5}}})")).find("income.rho") !=
          std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"dgp": {"colour": 1}})")).find("dgp.colour") != std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"balance": {"horizon": 0}})")).find("balance.horizon") !=
          std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"analyses": [{"notion": "log"}]})")).find("analyses[0].type") !=
          std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"restrictions": {"error_cap_rule": "neither"}})"))
              .find("restrictions.error_cap_rule") != std::string::npos);
    CHECK(config_error_message(Json::parse(R"({"threads": 0})")).find("threads") != std::string::npos);
}

TEST_CASE("signal_var and error moments translate to process parameters") {
    const auto cfg = simulated_config();
    REQUIRE(cfg.dgp);
    CHECK(cfg.dgp->income.signal_var() == doctest::Approx(0.5));
    CHECK(cfg.dgp->error.delta == doctest::Approx(-0.3 * std::sqrt(0.04 / 0.5)));
    CHECK(cfg.dgp->seed == 11);
}

TEST_CASE("balance can be disabled with null") {
    CHECK_FALSE(parse_run_config(Json::parse(R"({"balance": null})")).balance.has_value());
    CHECK(parse_run_config(Json::parse("{}")).balance.has_value());
}

TEST_CASE("json output uses 17 significant digits and maps NaN to null") {
    Json j;
    j["a"] = 0.1;
    j["b"] = std::nan("");
    j["c"] = 3;
    j["d"] = "x\"y";
    const std::string s = dump_json(j, -1);
    CHECK(s == "{\"a\":0.10000000000000001,\"b\":null,\"c\":3,\"d\":\"x\\\"y\"}");
}

TEST_CASE("analysis report carries schema version and sample sizes") {
    auto cfg = simulated_config();
    cfg.analyses = Json::parse(R"([
        {"type": "error_summary", "notion": "log", "histogram": {"width": 0.05, "range": [-1, 1]}},
        {"type": "quantile_profile", "groups": 5},
        {"type": "moment_matrix", "mode": "balanced"},
        {"type": "reliability", "method": "both", "mode": "pairwise"},
        {"type": "mincer", "dependent": "u", "covariates": ["female", "education_years"], "year_fe": true, "by_gender": true},
        {"type": "group_summary", "chain": [{"name": "women", "variable": "female"}], "variables": ["u"]},
        {"type": "histogram", "variable": "log_register", "width": 0.25, "range": [6, 10]}
    ])");
    const Panel panel = simulate_panel(*cfg.dgp);
    const auto out = run_analyses(panel, cfg);
    const Json& rep = out.report;
    CHECK(rep["schema_version"] == kReportSchemaVersion);
    REQUIRE(rep["analyses"].size() == 7);
    for (const auto& a : rep["analyses"]) CHECK(a.contains("n"));
    CHECK(out.plot_files.size() == 3);
    const Json& mincer = rep["analyses"][4];
    CHECK(mincer["groups"].size() == 3);
    CHECK(mincer["groups"][0].contains("f_test"));
    CHECK(rep["balance"]["units"].get<std::size_t>() <= 400);
}

TEST_CASE("mincer identity through the report") {
    auto cfg = simulated_config();
    const Panel panel = simulate_panel(*cfg.dgp);
    auto coefs = [&](const std::string& dep) {
        cfg.analyses = Json::array({{{"type", "mincer"},
                                     {"dependent", dep},
                                     {"covariates", {"female", "age", "education_years"}},
                                     {"year_fe", true}}});
        return run_analyses(panel, cfg).report["analyses"][0]["groups"][0]["coefficients"];
    };
    const Json u = coefs("u"), s = coefs("survey"), r = coefs("register");
    REQUIRE(u.size() == s.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        CHECK(std::abs(s[k]["coef"].get<double>() - r[k]["coef"].get<double>() - u[k]["coef"].get<double>()) < 1e-10);
}

TEST_CASE("unknown covariates and analysis types are config errors") {
    auto cfg = simulated_config();
    const Panel panel = simulate_panel(*cfg.dgp);
    cfg.analyses = Json::parse(R"([{"type": "mincer", "covariates": ["tenure"]}])");
    CHECK_THROWS_AS(run_analyses(panel, cfg), ConfigError);
    cfg.analyses = Json::parse(R"([{"type": "kernel_density"}])");
    CHECK_THROWS_AS(run_analyses(panel, cfg), ConfigError);
}

TEST_CASE("data errors inside an analysis name the analysis") {
    auto cfg = simulated_config();
    const Panel panel = simulate_panel(*cfg.dgp);
    cfg.analyses = Json::parse(R"([{"type": "moment_matrix", "horizon": 9}])");
    try {
        run_analyses(panel, cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("analyses[0] (moment_matrix)") != std::string::npos);
    }
}

TEST_CASE("commands write their outputs") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "valstudy_pipeline_test";
    fs::remove_all(dir);
    const auto cfg = simulated_config();
    cmd_simulate(cfg, (dir / "sim").string());
    CHECK(fs::exists(dir / "sim" / "panel.csv"));
    CHECK(fs::exists(dir / "sim" / "oracle.json"));
    cmd_analyze(cfg, (dir / "sim" / "panel.csv").string(), (dir / "rep").string());
    CHECK(fs::exists(dir / "rep" / "report.json"));

    const auto hcfg = load_run_config(fixtures::data_path("harmonize/config.json"));
    cmd_harmonize(hcfg, fixtures::data_path("harmonize/spells.csv"), fixtures::data_path("harmonize/survey.csv"),
                  (dir / "harm").string());
    std::ifstream in(dir / "harm" / "ledger.json");
    const Json ledger = Json::parse(in)["ledger"];
    CHECK(ledger.back()["step"] == "income_not_imputed");
    CHECK(ledger.back()["observations"] == 4);
    fs::remove_all(dir);
}

TEST_CASE("oracle section reports unavailability instead of failing") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "valstudy_pipeline_oracle";
    fs::remove_all(dir);
    auto cfg = parse_run_config(Json::parse(R"({"dgp": {"n_units": 50, "top_code_limit": 5000}})"));
    cmd_simulate(cfg, dir.string());
    std::ifstream in(dir / "oracle.json");
    CHECK(Json::parse(in)["available"] == false);
    fs::remove_all(dir);
}
