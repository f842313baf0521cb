#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "valstudy/panel.hpp"

namespace valstudy {

struct Date {
    int year = 0;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

/// Parses YYYY-MM-DD; throws DataError on malformed or impossible dates.
Date parse_iso_date(const std::string& s);

struct YearMonth {
    int year = 0;
    int month = 1;

    auto operator<=>(const YearMonth&) const = default;
    YearMonth previous() const;
};

enum class SpellKind { employment, unemployment_benefit, one_time_payment };

SpellKind spell_kind_from_string(const std::string& s);

struct RegisterSpell {
    std::string unit_id;
    long long spell_id = 0;
    Date start;
    Date end;
    double daily_income = 0.0;
    SpellKind kind = SpellKind::employment;
    std::map<std::string, double> employer_attrs;

    bool covers(YearMonth m) const;
};

/// Main job for the month preceding the interview: the highest-paying
/// employment spell covering `reference_month`. Equal pay resolves to the
/// lowest spell_id.
std::optional<RegisterSpell> select_main_spell(std::span<const RegisterSpell> spells, YearMonth reference_month);

/// Average days per month, 7/12*31 + 4/12*30 + 1/12*28.75.
inline constexpr double kDaysPerMonth = 7.0 / 12.0 * 31.0 + 4.0 / 12.0 * 30.0 + 1.0 / 12.0 * 28.75;

double daily_to_monthly(double daily_income);

struct LedgerEntry {
    std::string step;
    std::size_t units = 0;
    std::size_t observations = 0;
};

using RestrictionLedger = std::vector<LedgerEntry>;

enum class ErrorCapRule { either, both };

/// Parameters of the seven-step sample restriction pipeline.
///
/// Region codes are read from the covariate named `region_covariate`
/// (0 = west, 1 = east by convention). Covariates consumed by the steps:
/// occupation, birth_year_survey, birth_year_register, age, imputed.
struct RestrictionConfig {
    std::map<std::pair<int, int>, double> assessment_limits;  // (year, region) -> monthly cap
    double assessment_cap_fraction = 0.98;
    std::map<int, double> marginal_limits;  // year -> monthly threshold
    int marginal_reliable_from = 1999;
    double error_cap = 1.5;
    ErrorCapRule error_cap_rule = ErrorCapRule::either;
    std::pair<double, double> age_range{18.0, 65.0};
    std::set<long long> excluded_occupations;
    bool drop_imputed = true;
    std::string region_covariate = "east";

    /// Throws ConfigError on out-of-range parameters.
    void validate() const;
};

/// Step names in application order.
const std::vector<std::string>& restriction_step_names();

/// Applies the restriction steps in order and records units/observations
/// remaining after each one. The first ledger row is the input panel.
/// Observations lacking the data a step needs fail that step.
std::pair<Panel, RestrictionLedger> apply_restrictions(const Panel& panel, const RestrictionConfig& cfg);

/// The error-cap predicate on its own: true when the observation is dropped.
bool exceeds_error_cap(double survey, double register_income, double cap, ErrorCapRule rule);

// Spell CSV: unit_id, spell_id, start, end, daily_income, spell_kind, employer attribute columns...
std::vector<RegisterSpell> read_spells_csv(std::istream& in);
std::vector<RegisterSpell> read_spells_csv_file(const std::string& path);

// Limit tables: assessment (year, region, limit); marginal (year, limit) with optional region column ignored.
std::map<std::pair<int, int>, double> read_assessment_limits_csv(std::istream& in);
std::map<int, double> read_marginal_limits_csv(std::istream& in);

/// Survey-side record awaiting a register match.
struct SurveyResponse {
    std::string unit_id;
    int period = 0;
    int interview_month = 1;
    std::optional<double> survey_income;
    double weight = 1.0;
    ModuleTag module_tag = ModuleTag::core;
    Covariates covariates;
};

// Survey CSV: unit_id, period, interview_month, survey_income, weight, module_tag, covariate columns...
std::vector<SurveyResponse> read_survey_csv(std::istream& in);
std::vector<SurveyResponse> read_survey_csv_file(const std::string& path);

struct HarmonizeResult {
    Panel panel;
    RestrictionLedger ledger;
};

/// Joins survey responses with each unit's main spell for the month before
/// the interview, converts daily to monthly pay and copies employer
/// attributes (prefixed "employer_") plus `multiple_spells` into the
/// covariates. Unmatched responses are dropped; the ledger starts with the
/// survey and matched counts.
HarmonizeResult link_survey_to_register(std::span<const SurveyResponse> survey,
                                        std::span<const RegisterSpell> spells);

/// Linking followed by apply_restrictions, with one combined ledger.
HarmonizeResult harmonize(std::span<const SurveyResponse> survey, std::span<const RegisterSpell> spells,
                          const RestrictionConfig& cfg);

}  // namespace valstudy
