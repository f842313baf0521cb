#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "valstudy/balancing.hpp"
#include "valstudy/dgp.hpp"
#include "valstudy/harmonize.hpp"

namespace valstudy {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchemaVersion = "1.0";

/// Parsed run configuration. Relative file paths inside the config resolve
/// against the config file's directory.
struct RunConfig {
    std::uint64_t seed = 42;
    unsigned threads = 1;
    std::optional<DgpConfig> dgp;
    std::optional<RestrictionConfig> restrictions;
    std::optional<BalanceSpec> balance = BalanceSpec{};
    Json analyses = Json::array();
};

RunConfig parse_run_config(const Json& doc, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

DgpConfig parse_dgp_config(const Json& node, std::uint64_t default_seed);
RestrictionConfig parse_restriction_config(const Json& node, const std::string& base_dir);

/// Serializes with every float at 17 significant digits; NaN and infinities
/// become null.
std::string dump_json(const Json& j, int indent = 2);

Json oracle_to_json(const OracleValues& o);
Json ledger_to_json(const RestrictionLedger& ledger);

/// Result of an analysis run: the report plus any plot CSVs keyed by file name.
struct AnalyzeOutput {
    Json report;
    std::vector<std::pair<std::string, std::string>> plot_files;
};

/// Restriction pipeline (when configured), balancing, then each analysis in
/// config order.
AnalyzeOutput run_analyses(const Panel& panel, const RunConfig& cfg);

// Commands. Each writes into `out_dir` (created if missing).
void cmd_simulate(const RunConfig& cfg, const std::string& out_dir);
void cmd_analyze(const RunConfig& cfg, const std::string& panel_csv, const std::string& out_dir);
void cmd_harmonize(const RunConfig& cfg, const std::string& spells_csv, const std::string& survey_csv,
                   const std::string& out_dir);

}  // namespace valstudy
