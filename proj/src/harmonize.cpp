#include "valstudy/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "csv.hpp"
#include "valstudy/error.hpp"

namespace valstudy {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::size_t count_units(const std::vector<LinkedObservation>& obs) {
    std::set<std::string> ids;
    for (const auto& o : obs) ids.insert(o.unit_id);
    return ids.size();
}

}  // namespace

Date parse_iso_date(const std::string& s) {
    const std::string t = csv::trim(s);
    if (t.size() != 10 || t[4] != '-' || t[7] != '-') throw DataError("invalid ISO date '" + s + "'");
    Date d;
    d.year = static_cast<int>(csv::parse_int(t.substr(0, 4), "date year"));
    d.month = static_cast<int>(csv::parse_int(t.substr(5, 2), "date month"));
    d.day = static_cast<int>(csv::parse_int(t.substr(8, 2), "date day"));
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
        throw DataError("invalid ISO date '" + s + "'");
    return d;
}

YearMonth YearMonth::previous() const {
    return month == 1 ? YearMonth{year - 1, 12} : YearMonth{year, month - 1};
}

SpellKind spell_kind_from_string(const std::string& s) {
    const std::string t = csv::trim(s);
    if (t == "employment") return SpellKind::employment;
    if (t == "unemployment_benefit") return SpellKind::unemployment_benefit;
    if (t == "one_time_payment") return SpellKind::one_time_payment;
    throw DataError("unknown spell_kind '" + s + "'");
}

bool RegisterSpell::covers(YearMonth m) const {
    const YearMonth s{start.year, start.month};
    const YearMonth e{end.year, end.month};
    return s <= m && m <= e;
}

std::optional<RegisterSpell> select_main_spell(std::span<const RegisterSpell> spells, YearMonth reference_month) {
    const RegisterSpell* best = nullptr;
    for (const auto& sp : spells) {
        if (sp.kind != SpellKind::employment || !sp.covers(reference_month)) continue;
        if (!best || sp.daily_income > best->daily_income ||
            (sp.daily_income == best->daily_income && sp.spell_id < best->spell_id))
            best = &sp;
    }
    if (!best) return std::nullopt;
    return *best;
}

double daily_to_monthly(double daily_income) {
    if (!(daily_income >= 0.0)) throw DataError("daily income must be >= 0");
    return daily_income * kDaysPerMonth;
}

void RestrictionConfig::validate() const {
    if (!(assessment_cap_fraction > 0.0 && assessment_cap_fraction <= 1.0))
        throw ConfigError("restrictions.assessment_cap_fraction must lie in (0, 1]");
    if (!(error_cap > 0.0)) throw ConfigError("restrictions.error_cap must be > 0");
    if (!(age_range.first <= age_range.second)) throw ConfigError("restrictions.age_range must be ordered");
    for (const auto& [key, lim] : assessment_limits)
        if (!(lim > 0.0)) throw ConfigError("restrictions: assessment limit must be > 0");
}

const std::vector<std::string>& restriction_step_names() {
    static const std::vector<std::string> names = {
        "below_assessment_limit", "typical_pay_structures", "error_within_cap", "coinciding_birth_year",
        "working_age",            "within_marginal_limits", "income_not_imputed"};
    return names;
}

bool exceeds_error_cap(double survey, double register_income, double cap, ErrorCapRule rule) {
    const double diff = std::abs(survey - register_income);
    const bool vs_register = diff / register_income > cap;
    const bool vs_survey = diff / survey > cap;
    return rule == ErrorCapRule::either ? (vs_register || vs_survey) : (vs_register && vs_survey);
}

std::pair<Panel, RestrictionLedger> apply_restrictions(const Panel& panel, const RestrictionConfig& cfg) {
    cfg.validate();

    // Configuration gaps are errors even when the affected rows would fail
    // an earlier step, so check the tables up front.
    if (!cfg.assessment_limits.empty()) {
        for (const auto& o : panel) {
            auto region = o.covariate(cfg.region_covariate);
            if (!region) continue;
            const std::pair<int, int> key{o.period, static_cast<int>(std::lround(*region))};
            if (!cfg.assessment_limits.count(key))
                throw ConfigError("restrictions: no assessment limit for (year " + std::to_string(key.first) +
                                  ", region " + std::to_string(key.second) + ")");
        }
    }
    if (!cfg.marginal_limits.empty()) {
        for (const auto& o : panel)
            if (o.period < cfg.marginal_reliable_from && !cfg.marginal_limits.count(o.period))
                throw ConfigError("restrictions: no marginal employment limit for year " +
                                  std::to_string(o.period));
    }

    using Pred = bool (*)(const LinkedObservation&, const RestrictionConfig&);
    static const Pred steps[] = {
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            if (c.assessment_limits.empty()) return true;
            auto region = o.covariate(c.region_covariate);
            if (!o.register_income || !region) return false;
            const double lim = c.assessment_limits.at({o.period, static_cast<int>(std::lround(*region))});
            return *o.register_income < c.assessment_cap_fraction * lim;
        },
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            if (c.excluded_occupations.empty()) return true;
            auto occ = o.covariate("occupation");
            if (!occ) return false;
            return !c.excluded_occupations.count(std::llround(*occ));
        },
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            if (!o.has_both_incomes() || !(*o.survey_income > 0.0) || !(*o.register_income > 0.0)) return false;
            return !exceeds_error_cap(*o.survey_income, *o.register_income, c.error_cap, c.error_cap_rule);
        },
        [](const LinkedObservation& o, const RestrictionConfig&) {
            auto a = o.covariate("birth_year_survey");
            auto b = o.covariate("birth_year_register");
            return a && b && std::llround(*a) == std::llround(*b);
        },
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            auto age = o.covariate("age");
            return age && *age >= c.age_range.first && *age <= c.age_range.second;
        },
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            if (c.marginal_limits.empty() || o.period >= c.marginal_reliable_from) return true;
            if (!o.register_income) return false;
            return *o.register_income >= c.marginal_limits.at(o.period);
        },
        [](const LinkedObservation& o, const RestrictionConfig& c) {
            if (!c.drop_imputed) return true;
            auto imp = o.covariate("imputed");
            return imp && *imp == 0.0;
        },
    };

    std::vector<LinkedObservation> cur = panel.observations();
    RestrictionLedger ledger;
    ledger.push_back({"input", count_units(cur), cur.size()});
    const auto& names = restriction_step_names();
    for (std::size_t s = 0; s < std::size(steps); ++s) {
        std::erase_if(cur, [&](const LinkedObservation& o) { return !steps[s](o, cfg); });
        ledger.push_back({names[s], count_units(cur), cur.size()});
    }
    return {panel_from_records(std::move(cur)), std::move(ledger)};
}

std::vector<RegisterSpell> read_spells_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!csv::read_row(in, row)) throw DataError("spell csv: missing header row");
    csv::Header h(row);
    const std::string table = "spell csv";
    const std::size_t c_unit = h.require("unit_id", table), c_id = h.require("spell_id", table),
                      c_start = h.require("start", table), c_end = h.require("end", table),
                      c_daily = h.require("daily_income", table), c_kind = h.require("spell_kind", table);
    const std::set<std::size_t> fixed{c_unit, c_id, c_start, c_end, c_daily, c_kind};

    std::vector<RegisterSpell> out;
    std::size_t line = 1;
    while (csv::read_row(in, row)) {
        ++line;
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        const std::string ctx = table + " line " + std::to_string(line);
        if (row.size() != h.names().size()) throw DataError(ctx + ": wrong number of fields");
        RegisterSpell sp;
        sp.unit_id = csv::trim(row[c_unit]);
        sp.spell_id = csv::parse_int(row[c_id], ctx + " spell_id");
        sp.start = parse_iso_date(row[c_start]);
        sp.end = parse_iso_date(row[c_end]);
        if (sp.end < sp.start) throw DataError(ctx + ": spell ends before it starts");
        sp.daily_income = csv::parse_real(row[c_daily], ctx + " daily_income");
        if (sp.daily_income < 0.0) throw DataError(ctx + ": daily_income must be >= 0");
        sp.kind = spell_kind_from_string(row[c_kind]);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (fixed.count(c)) continue;
            if (auto v = csv::parse_optional_real(row[c], ctx + " " + h.names()[c]))
                sp.employer_attrs[h.names()[c]] = *v;
        }
        out.push_back(std::move(sp));
    }
    return out;
}

std::vector<RegisterSpell> read_spells_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open spell csv '" + path + "'");
    return read_spells_csv(in);
}

std::map<std::pair<int, int>, double> read_assessment_limits_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!csv::read_row(in, row)) throw ConfigError("assessment limit csv: missing header");
    csv::Header h(row);
    const std::size_t cy = h.require("year", "assessment limit csv"), cr = h.require("region", "assessment limit csv"),
                      cl = h.require("limit", "assessment limit csv");
    std::map<std::pair<int, int>, double> out;
    while (csv::read_row(in, row)) {
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        out[{static_cast<int>(csv::parse_int(row[cy], "limit year")),
             static_cast<int>(csv::parse_int(row[cr], "limit region"))}] = csv::parse_real(row[cl], "limit");
    }
    return out;
}

std::map<int, double> read_marginal_limits_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!csv::read_row(in, row)) throw ConfigError("marginal limit csv: missing header");
    csv::Header h(row);
    const std::size_t cy = h.require("year", "marginal limit csv"), cl = h.require("limit", "marginal limit csv");
    std::map<int, double> out;
    while (csv::read_row(in, row)) {
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        out[static_cast<int>(csv::parse_int(row[cy], "limit year"))] = csv::parse_real(row[cl], "limit");
    }
    return out;
}

std::vector<SurveyResponse> read_survey_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!csv::read_row(in, row)) throw DataError("survey csv: missing header row");
    csv::Header h(row);
    const std::string table = "survey csv";
    const std::size_t c_unit = h.require("unit_id", table), c_period = h.require("period", table),
                      c_month = h.require("interview_month", table), c_inc = h.require("survey_income", table);
    const auto c_weight = h.find("weight");
    const auto c_tag = h.find("module_tag");
    std::set<std::size_t> fixed{c_unit, c_period, c_month, c_inc};
    if (c_weight) fixed.insert(*c_weight);
    if (c_tag) fixed.insert(*c_tag);

    std::vector<SurveyResponse> out;
    std::size_t line = 1;
    while (csv::read_row(in, row)) {
        ++line;
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        const std::string ctx = table + " line " + std::to_string(line);
        if (row.size() != h.names().size()) throw DataError(ctx + ": wrong number of fields");
        SurveyResponse r;
        r.unit_id = csv::trim(row[c_unit]);
        r.period = static_cast<int>(csv::parse_int(row[c_period], ctx + " period"));
        r.interview_month = static_cast<int>(csv::parse_int(row[c_month], ctx + " interview_month"));
        if (r.interview_month < 1 || r.interview_month > 12) throw DataError(ctx + ": interview_month out of range");
        r.survey_income = csv::parse_optional_real(row[c_inc], ctx + " survey_income");
        if (c_weight && !csv::trim(row[*c_weight]).empty()) r.weight = csv::parse_real(row[*c_weight], ctx + " weight");
        if (c_tag) r.module_tag = module_tag_from_string(row[*c_tag]);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (fixed.count(c)) continue;
            if (auto v = csv::parse_optional_real(row[c], ctx + " " + h.names()[c])) r.covariates[h.names()[c]] = *v;
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SurveyResponse> read_survey_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open survey csv '" + path + "'");
    return read_survey_csv(in);
}

HarmonizeResult link_survey_to_register(std::span<const SurveyResponse> survey,
                                        std::span<const RegisterSpell> spells) {
    std::map<std::string, std::vector<RegisterSpell>> by_unit;
    for (const auto& sp : spells) by_unit[sp.unit_id].push_back(sp);

    std::vector<LinkedObservation> linked;
    std::set<std::string> survey_units;
    for (const auto& r : survey) {
        survey_units.insert(r.unit_id);
        auto it = by_unit.find(r.unit_id);
        if (it == by_unit.end()) continue;
        const YearMonth ref = YearMonth{r.period, r.interview_month}.previous();
        auto main = select_main_spell(it->second, ref);
        if (!main) continue;

        std::size_t covering = 0;
        for (const auto& sp : it->second)
            if (sp.kind == SpellKind::employment && sp.covers(ref)) ++covering;

        LinkedObservation o;
        o.unit_id = r.unit_id;
        o.period = r.period;
        o.survey_income = r.survey_income;
        const double monthly = daily_to_monthly(main->daily_income);
        if (monthly > 0.0) o.register_income = monthly;
        o.employed = true;
        o.weight = r.weight;
        o.module_tag = r.module_tag;
        o.covariates = r.covariates;
        for (const auto& [k, v] : main->employer_attrs) o.covariates["employer_" + k] = v;
        o.covariates["multiple_spells"] = covering > 1 ? 1.0 : 0.0;
        if (o.survey_income && !(*o.survey_income > 0.0)) o.survey_income.reset();
        linked.push_back(std::move(o));
    }

    HarmonizeResult res;
    res.ledger.push_back({"survey", survey_units.size(), survey.size()});
    res.ledger.push_back({"matched_spells", count_units(linked), linked.size()});
    res.panel = panel_from_records(std::move(linked));
    return res;
}

HarmonizeResult harmonize(std::span<const SurveyResponse> survey, std::span<const RegisterSpell> spells,
                          const RestrictionConfig& cfg) {
    auto linked = link_survey_to_register(survey, spells);
    auto [restricted, steps] = apply_restrictions(linked.panel, cfg);
    HarmonizeResult res;
    res.ledger = std::move(linked.ledger);
    // The restriction ledger's "input" row duplicates "matched_spells".
    res.ledger.insert(res.ledger.end(), steps.begin() + 1, steps.end());
    res.panel = std::move(restricted);
    return res;
}

}  // namespace valstudy
