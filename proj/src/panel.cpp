#include "valstudy/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "valstudy/error.hpp"

namespace valstudy {

std::string to_string(ModuleTag tag) {
    return tag == ModuleTag::core ? "core" : "innovation";
}

ModuleTag module_tag_from_string(const std::string& s) {
    std::string t = csv::trim(s);
    if (t == "core" || t.empty()) return ModuleTag::core;
    if (t == "innovation") return ModuleTag::innovation;
    throw DataError("module_tag: unknown value '" + s + "' (expected core or innovation)");
}

std::optional<double> LinkedObservation::covariate(const std::string& name) const {
    auto it = covariates.find(name);
    if (it == covariates.end() || std::isnan(it->second)) return std::nullopt;
    return it->second;
}

ErrorTriple compute_error_triple(const LinkedObservation& obs) {
    auto check = [&](const std::optional<double>& v, const char* field) {
        if (!v) throw DataError("observation (" + obs.unit_id + ", " + std::to_string(obs.period) +
                                "): " + field + " is missing");
        if (!(*v > 0.0))
            throw DataError("observation (" + obs.unit_id + ", " + std::to_string(obs.period) +
                            "): " + field + " must be > 0, got " + format_real(*v));
        return *v;
    };
    const double survey = check(obs.survey_income, "survey_income");
    const double reg = check(obs.register_income, "register_income");

    ErrorTriple e;
    e.log_error = std::log(survey) - std::log(reg);
    e.nominal_error = survey - reg;
    e.relative_error = e.nominal_error / reg;
    return e;
}

ErrorNotion error_notion_from_string(const std::string& s) {
    if (s == "log") return ErrorNotion::log;
    if (s == "nominal") return ErrorNotion::nominal;
    if (s == "relative") return ErrorNotion::relative;
    throw ConfigError("unknown error notion '" + s + "' (expected log, nominal or relative)");
}

double error_value(const ErrorTriple& e, ErrorNotion notion) {
    switch (notion) {
        case ErrorNotion::log: return e.log_error;
        case ErrorNotion::nominal: return e.nominal_error;
        case ErrorNotion::relative: return e.relative_error;
    }
    return e.log_error;
}

std::optional<double> variable_value(const LinkedObservation& obs, const std::string& name) {
    auto positive = [](const std::optional<double>& v) { return v && *v > 0.0; };
    if (name == "survey_income") return obs.survey_income;
    if (name == "register_income") return obs.register_income;
    if (name == "log_survey") {
        if (!positive(obs.survey_income)) return std::nullopt;
        return std::log(*obs.survey_income);
    }
    if (name == "log_register") {
        if (!positive(obs.register_income)) return std::nullopt;
        return std::log(*obs.register_income);
    }
    if (name == "u" || name == "nominal_error" || name == "relative_error") {
        if (!positive(obs.survey_income) || !positive(obs.register_income)) return std::nullopt;
        const auto e = compute_error_triple(obs);
        if (name == "u") return e.log_error;
        return name == "nominal_error" ? e.nominal_error : e.relative_error;
    }
    if (name == "weight") return obs.weight;
    if (name == "period") return static_cast<double>(obs.period);
    return obs.covariate(name);
}

std::vector<std::string> Panel::unit_ids() const {
    std::vector<std::string> ids;
    for (const auto& o : obs_)
        if (ids.empty() || ids.back() != o.unit_id) ids.push_back(o.unit_id);
    return ids;
}

std::size_t Panel::unit_count() const { return unit_blocks().size(); }

std::vector<std::pair<std::size_t, std::size_t>> Panel::unit_blocks() const {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::size_t i = 0;
    while (i < obs_.size()) {
        std::size_t j = i + 1;
        while (j < obs_.size() && obs_[j].unit_id == obs_[i].unit_id) ++j;
        blocks.emplace_back(i, j);
        i = j;
    }
    return blocks;
}

Panel panel_from_records(std::vector<LinkedObservation> records) {
    for (const auto& r : records) {
        auto where = [&] { return "(" + r.unit_id + ", " + std::to_string(r.period) + ")"; };
        if (r.survey_income && !(*r.survey_income > 0.0))
            throw DataError("observation " + where() + ": survey_income must be > 0");
        if (r.register_income && !(*r.register_income > 0.0))
            throw DataError("observation " + where() + ": register_income must be > 0");
        if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
            throw DataError("observation " + where() + ": weight must be >= 0");
    }
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.unit_id != b.unit_id) return a.unit_id < b.unit_id;
        return a.period < b.period;
    });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].unit_id == records[i - 1].unit_id && records[i].period == records[i - 1].period)
            throw DataError("duplicate observation key (" + records[i].unit_id + ", " +
                            std::to_string(records[i].period) + ")");
    }
    Panel p;
    p.obs_ = std::move(records);
    return p;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

constexpr const char* kFixedColumns[] = {"unit_id", "period", "survey_income", "register_income",
                                         "employed", "weight", "module_tag"};

}  // namespace

Panel read_panel_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!csv::read_row(in, row)) throw DataError("panel csv: missing header row");
    csv::Header header(row);
    const auto& names = header.names();
    for (std::size_t i = 0; i < std::size(kFixedColumns); ++i) {
        if (i >= names.size() || names[i] != kFixedColumns[i])
            throw DataError(std::string("panel csv: column ") + std::to_string(i + 1) + " must be '" +
                            kFixedColumns[i] + "'");
    }
    std::size_t first_cov = std::size(kFixedColumns);
    std::optional<std::size_t> event_col;
    if (names.size() > first_cov && names[first_cov] == "event_time") event_col = first_cov++;

    std::vector<LinkedObservation> records;
    std::size_t line = 1;
    while (csv::read_row(in, row)) {
        ++line;
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        const std::string ctx = "panel csv line " + std::to_string(line);
        if (row.size() != names.size())
            throw DataError(ctx + ": expected " + std::to_string(names.size()) + " fields, got " +
                            std::to_string(row.size()));
        LinkedObservation o;
        o.unit_id = csv::trim(row[0]);
        if (o.unit_id.empty()) throw DataError(ctx + ": empty unit_id");
        o.period = static_cast<int>(csv::parse_int(row[1], ctx + " period"));
        o.survey_income = csv::parse_optional_real(row[2], ctx + " survey_income");
        o.register_income = csv::parse_optional_real(row[3], ctx + " register_income");
        o.employed = csv::trim(row[4]).empty() ? true : csv::parse_bool(row[4], ctx + " employed");
        o.weight = csv::trim(row[5]).empty() ? 1.0 : csv::parse_real(row[5], ctx + " weight");
        o.module_tag = module_tag_from_string(row[6]);
        if (event_col && !csv::trim(row[*event_col]).empty())
            o.event_time = static_cast<int>(csv::parse_int(row[*event_col], ctx + " event_time"));
        for (std::size_t c = first_cov; c < names.size(); ++c) {
            if (auto v = csv::parse_optional_real(row[c], ctx + " " + names[c])) o.covariates[names[c]] = *v;
        }
        records.push_back(std::move(o));
    }
    return panel_from_records(std::move(records));
}

Panel read_panel_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open panel csv '" + path + "'");
    return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const Panel& panel) {
    std::set<std::string> cov_names;
    bool any_event = false;
    for (const auto& o : panel) {
        for (const auto& [k, v] : o.covariates) cov_names.insert(k);
        any_event = any_event || o.event_time.has_value();
    }
    for (std::size_t i = 0; i < std::size(kFixedColumns); ++i) out << (i ? "," : "") << kFixedColumns[i];
    if (any_event) out << ",event_time";
    for (const auto& n : cov_names) out << ',' << csv::escape(n);
    out << '\n';

    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    for (const auto& o : panel) {
        out << csv::escape(o.unit_id) << ',' << o.period << ',' << opt(o.survey_income) << ','
            << opt(o.register_income) << ',' << (o.employed ? 1 : 0) << ',' << format_real(o.weight) << ','
            << to_string(o.module_tag);
        if (any_event) out << ',' << (o.event_time ? std::to_string(*o.event_time) : std::string());
        for (const auto& n : cov_names) {
            out << ',';
            auto it = o.covariates.find(n);
            if (it != o.covariates.end()) out << format_real(it->second);
        }
        out << '\n';
    }
}

void write_panel_csv_file(const std::string& path, const Panel& panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write panel csv '" + path + "'");
    write_panel_csv(out, panel);
}

}  // namespace valstudy
