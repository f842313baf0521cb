#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace valstudy {

enum class ModuleTag { core, innovation };

std::string to_string(ModuleTag tag);
ModuleTag module_tag_from_string(const std::string& s);

using Covariates = std::map<std::string, double>;

/// One person-year of linked survey and register data.
///
/// Incomes are monthly gross amounts in currency units. A missing income is
/// represented by an empty optional; a present income must be strictly
/// positive. `event_time` is left empty until `assign_event_time` runs.
struct LinkedObservation {
    std::string unit_id;
    int period = 0;
    std::optional<double> survey_income;
    std::optional<double> register_income;
    bool employed = true;
    double weight = 1.0;
    Covariates covariates;
    ModuleTag module_tag = ModuleTag::core;
    std::optional<int> event_time;

    std::optional<double> covariate(const std::string& name) const;
    bool has_both_incomes() const { return survey_income && register_income; }
};

/// Log, nominal and relative deviation of the survey report from the register.
struct ErrorTriple {
    double log_error = 0.0;       // ln(survey) - ln(register)
    double nominal_error = 0.0;   // survey - register
    double relative_error = 0.0;  // (survey - register) / register
};

/// Throws DataError naming the missing or nonpositive income field.
ErrorTriple compute_error_triple(const LinkedObservation& obs);

enum class ErrorNotion { log, nominal, relative };

ErrorNotion error_notion_from_string(const std::string& s);
double error_value(const ErrorTriple& e, ErrorNotion notion);

/// Resolves a variable by name for one observation. Reserved names:
/// survey_income, register_income, log_survey, log_register, u (log error),
/// nominal_error, relative_error, weight, period. Anything else is looked up
/// among the covariates. Returns nullopt when the value is unavailable.
std::optional<double> variable_value(const LinkedObservation& obs, const std::string& name);

/// Immutable, deterministically ordered collection of observations keyed by
/// (unit_id, period).
class Panel {
public:
    Panel() = default;

    const std::vector<LinkedObservation>& observations() const { return obs_; }
    std::size_t size() const { return obs_.size(); }
    bool empty() const { return obs_.empty(); }
    const LinkedObservation& operator[](std::size_t i) const { return obs_[i]; }
    auto begin() const { return obs_.begin(); }
    auto end() const { return obs_.end(); }

    /// Distinct unit ids in sorted order.
    std::vector<std::string> unit_ids() const;
    std::size_t unit_count() const;

    /// Index ranges [first, last) of each unit's contiguous block.
    std::vector<std::pair<std::size_t, std::size_t>> unit_blocks() const;

    /// Retains the observations for which `keep` returns true.
    template <typename Pred>
    Panel filter(Pred keep) const {
        Panel out;
        for (const auto& o : obs_)
            if (keep(o)) out.obs_.push_back(o);
        return out;
    }

    friend Panel panel_from_records(std::vector<LinkedObservation> records);

private:
    std::vector<LinkedObservation> obs_;
};

/// Sorts by (unit_id, period) and validates every record. Duplicate keys,
/// nonpositive incomes and negative weights raise DataError.
Panel panel_from_records(std::vector<LinkedObservation> records);

// CSV schema: unit_id, period, survey_income, register_income, employed,
// weight, module_tag, [event_time], covariate columns... Empty cell = missing.
Panel read_panel_csv(std::istream& in);
Panel read_panel_csv_file(const std::string& path);
void write_panel_csv(std::ostream& out, const Panel& panel);
void write_panel_csv_file(const std::string& path, const Panel& panel);

/// Formats a real with 17 significant digits (round-trip exact).
std::string format_real(double v);

}  // namespace valstudy
