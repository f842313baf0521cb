#include "valstudy/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "valstudy/distribution.hpp"
#include "valstudy/error.hpp"
#include "valstudy/estimators.hpp"

namespace valstudy {

namespace fs = std::filesystem;

namespace {

// --- config access helpers -------------------------------------------------

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
    throw ConfigError("config: field '" + path + "' " + what);
}

const Json* child(const Json& node, const std::string& key) {
    if (!node.is_object()) return nullptr;
    auto it = node.find(key);
    return it == node.end() || it->is_null() ? nullptr : &*it;
}

double get_real(const Json& node, const std::string& key, const std::string& path, double fallback) {
    const Json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_number()) bad_field(path + key, "must be a number");
    return v->get<double>();
}

long long get_int(const Json& node, const std::string& key, const std::string& path, long long fallback) {
    const Json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_number_integer() && !v->is_number_unsigned()) bad_field(path + key, "must be an integer");
    return v->get<long long>();
}

bool get_bool(const Json& node, const std::string& key, const std::string& path, bool fallback) {
    const Json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_boolean()) bad_field(path + key, "must be true or false");
    return v->get<bool>();
}

std::string get_string(const Json& node, const std::string& key, const std::string& path, const std::string& fallback) {
    const Json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_string()) bad_field(path + key, "must be a string");
    return v->get<std::string>();
}

std::vector<std::string> get_strings(const Json& node, const std::string& key, const std::string& path) {
    std::vector<std::string> out;
    const Json* v = child(node, key);
    if (!v) return out;
    if (!v->is_array()) bad_field(path + key, "must be a list of strings");
    for (const auto& e : *v) {
        if (!e.is_string()) bad_field(path + key, "must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

void check_keys(const Json& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.is_object()) bad_field(path.empty() ? "<root>" : path.substr(0, path.size() - 1), "must be an object");
    for (const auto& [key, value] : node.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) bad_field(path + key, "is not recognized");
    }
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return p;
    return (fs::path(base_dir) / path).string();
}

// --- output helpers ---------------------------------------------------------

void dump_value(std::ostringstream& os, const Json& j, int indent, int depth) {
    auto newline = [&](int d) {
        if (indent < 0) return;
        os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << '{';
            bool first = true;
            for (const auto& [k, v] : j.items()) {
                if (!first) os << ',';
                first = false;
                newline(depth + 1);
                os << Json(k).dump() << (indent < 0 ? ":" : ": ");
                dump_value(os, v, indent, depth + 1);
            }
            newline(depth);
            os << '}';
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            os << '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) os << ',';
                first = false;
                newline(depth + 1);
                dump_value(os, v, indent, depth + 1);
            }
            newline(depth);
            os << ']';
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) {
                os << "null";
                return;
            }
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf;
            return;
        }
        default: os << j.dump(); return;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json summary_to_json(const ErrorSummary& s) {
    Json j;
    j["n"] = s.n;
    j["mean"] = real_or_null(s.mean);
    j["sd"] = real_or_null(s.sd);
    j["quantiles"] = {{"p5", s.quantiles[0]}, {"p25", s.quantiles[1]}, {"p50", s.quantiles[2]},
                      {"p75", s.quantiles[3]}, {"p95", s.quantiles[4]}};
    j["share_negative"] = s.share_negative;
    j["geometric_ratio"] = s.geometric_ratio;
    return j;
}

std::string notion_name(ErrorNotion n) {
    switch (n) {
        case ErrorNotion::log: return "log";
        case ErrorNotion::nominal: return "nominal";
        case ErrorNotion::relative: return "relative";
    }
    return "log";
}

std::string histogram_csv(const HistogramSeries& h) {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count,weighted_count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        os << format_real(h.bin_edges[b]) << ',' << format_real(h.bin_edges[b + 1]) << ',' << h.counts[b] << ','
           << format_real(h.weighted_counts[b]) << '\n';
    return os.str();
}

Json histogram_to_json(const HistogramSeries& h, double width, const std::string& file) {
    Json j;
    j["file"] = file;
    j["width"] = width;
    j["bins"] = h.counts.size();
    j["included"] = h.included();
    j["underflow"] = h.underflow;
    j["overflow"] = h.overflow;
    j["weighted"] = h.weighted;
    if (h.normal_overlay)
        j["normal_overlay"] = {{"mean", h.normal_overlay->first}, {"sd", real_or_null(h.normal_overlay->second)}};
    else
        j["normal_overlay"] = nullptr;
    return j;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(real_or_null(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

Json slope_to_json(const SlopeEstimate& s) { return {{"estimate", s.slope}, {"robust_se", s.robust_se}, {"n", s.n}}; }

Json regression_to_json(const RegressionResult& r, bool with_f_test) {
    Json j;
    j["n"] = r.n_obs;
    j["r_squared"] = r.r_squared;
    Json coefs = Json::array();
    for (std::size_t i = 0; i < r.names.size(); ++i)
        coefs.push_back({{"name", r.names[i]},
                         {"coef", r.coefficients[static_cast<Eigen::Index>(i)]},
                         {"robust_se", r.robust_se[static_cast<Eigen::Index>(i)]}});
    j["coefficients"] = coefs;
    if (with_f_test) {
        const auto f = joint_f_test(r);
        j["f_test"] = {{"f_stat", f.f_stat}, {"df1", f.df1}, {"df2", f.df2}, {"p_value", f.p_value}};
    }
    return j;
}

// --- analyses ---------------------------------------------------------------

struct AnalysisContext {
    const Panel& panel;
    int default_horizon;
    std::size_t index;
    std::vector<std::pair<std::string, std::string>>& files;
};

std::pair<double, double> get_range(const Json& a, const std::string& path) {
    const Json* r = child(a, "range");
    if (!r || !r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number())
        bad_field(path + "range", "must be a two-element list [lo, hi]");
    return {(*r)[0].get<double>(), (*r)[1].get<double>()};
}

Json run_error_summary(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "notion", "weighted", "histogram"});
    const auto notion = error_notion_from_string(get_string(a, "notion", path, "log"));
    const bool weighted = get_bool(a, "weighted", path, false);
    Json j;
    j["type"] = "error_summary";
    j["notion"] = notion_name(notion);
    j["weighted"] = weighted;
    j.update(summary_to_json(summarize_errors(ctx.panel, notion, weighted)));
    if (const Json* h = child(a, "histogram")) {
        const std::string hp = path + "histogram.";
        check_keys(*h, hp, {"width", "range"});
        const double width = get_real(*h, "width", hp, 0.05);
        const auto [lo, hi] = get_range(*h, hp);
        std::vector<double> vals, ws;
        for (const auto& o : ctx.panel) {
            if (!o.has_both_incomes()) continue;
            vals.push_back(error_value(compute_error_triple(o), notion));
            ws.push_back(o.weight);
        }
        const auto series = histogram(vals, width, lo, hi, weighted ? std::span<const double>(ws) : std::span<const double>());
        const std::string file = "analysis_" + std::to_string(ctx.index) + "_histogram.csv";
        ctx.files.emplace_back(file, histogram_csv(series));
        j["histogram"] = histogram_to_json(series, width, file);
    }
    return j;
}

Json run_histogram(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "variable", "width", "range", "weighted"});
    const std::string var = get_string(a, "variable", path, "u");
    const double width = get_real(a, "width", path, 0.05);
    const bool weighted = get_bool(a, "weighted", path, false);
    const auto [lo, hi] = get_range(a, path);
    std::vector<double> vals, ws;
    for (const auto& o : ctx.panel)
        if (auto v = variable_value(o, var)) {
            vals.push_back(*v);
            ws.push_back(o.weight);
        }
    const auto series = histogram(vals, width, lo, hi, weighted ? std::span<const double>(ws) : std::span<const double>());
    const std::string file = "analysis_" + std::to_string(ctx.index) + "_histogram.csv";
    ctx.files.emplace_back(file, histogram_csv(series));
    Json j;
    j["type"] = "histogram";
    j["variable"] = var;
    j["n"] = vals.size();
    j.update(histogram_to_json(series, width, file));
    return j;
}

Json run_quantile_profile(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "groups", "notion", "weighted"});
    const int groups = static_cast<int>(get_int(a, "groups", path, 20));
    const auto notion = error_notion_from_string(get_string(a, "notion", path, "relative"));
    const bool weighted = get_bool(a, "weighted", path, false);
    const auto prof = quantile_profile(ctx.panel, groups, notion, weighted);
    Json j;
    j["type"] = "quantile_profile";
    j["groups"] = groups;
    j["notion"] = notion_name(notion);
    j["weighted"] = weighted;
    std::size_t n = 0;
    Json rows = Json::array();
    std::ostringstream csv;
    csv << "q,n,mean,sd,p5,p25,p50,p75,p95,share_negative\n";
    for (const auto& r : prof.rows) {
        Json row{{"q", r.q}};
        row.update(summary_to_json(r.summary));
        rows.push_back(row);
        n += r.summary.n;
        csv << r.q << ',' << r.summary.n << ',' << format_real(r.summary.mean) << ',' << format_real(r.summary.sd);
        for (double q : r.summary.quantiles) csv << ',' << format_real(q);
        csv << ',' << format_real(r.summary.share_negative) << '\n';
    }
    const std::string file = "analysis_" + std::to_string(ctx.index) + "_quantile_profile.csv";
    ctx.files.emplace_back(file, csv.str());
    j["n"] = n;
    j["file"] = file;
    j["rows"] = rows;
    return j;
}

std::size_t units_within_horizon(const Panel& panel, int horizon) {
    std::set<std::string> ids;
    for (const auto& o : panel)
        if (o.event_time && *o.event_time >= 1 && *o.event_time <= horizon && o.has_both_incomes()) ids.insert(o.unit_id);
    return ids.size();
}

Json run_moment_matrix(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "mode", "horizon"});
    const auto mode = moment_mode_from_string(get_string(a, "mode", path, "pairwise"));
    const int horizon = static_cast<int>(get_int(a, "horizon", path, ctx.default_horizon));
    const auto m = moment_matrix(ctx.panel, horizon, mode);
    Json j;
    j["type"] = "moment_matrix";
    j["mode"] = to_string(mode);
    j["horizon"] = horizon;
    j["n"] = mode == MomentMode::balanced ? m.n_eff()(0, 0) : units_within_horizon(ctx.panel, horizon);
    j["variables"] = m.variable_names();
    j["cov"] = matrix_to_json(m.cov());
    j["corr"] = matrix_to_json(m.corr());
    Json n_eff = Json::array();
    for (Eigen::Index r = 0; r < m.n_eff().rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.n_eff().cols(); ++c) row.push_back(m.n_eff()(r, c));
        n_eff.push_back(row);
    }
    j["n_eff"] = n_eff;
    return j;
}

Json run_reliability(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "method", "mode", "horizon", "subtract_error_autocov"});
    const std::string method = get_string(a, "method", path, "both");
    if (method != "classical" && method != "regression" && method != "both")
        bad_field(path + "method", "must be classical, regression or both");
    const auto mode = moment_mode_from_string(get_string(a, "mode", path, "pairwise"));
    const int horizon = static_cast<int>(get_int(a, "horizon", path, ctx.default_horizon));
    ClassicalOptions opts;
    opts.subtract_error_autocov = get_bool(a, "subtract_error_autocov", path, false);

    Json j;
    j["type"] = "reliability";
    j["method"] = method;
    j["mode"] = to_string(mode);
    j["horizon"] = horizon;
    j["n"] = units_within_horizon(ctx.panel, horizon);
    Json rows = Json::array();
    if (method == "regression") {
        for (int t = 1; t <= horizon; ++t) {
            Json row{{"t", t}};
            row["regression_level"] = slope_to_json(reliability_regression(ctx.panel, t, false));
            row["regression_fd"] = t >= 2 ? slope_to_json(reliability_regression(ctx.panel, t, true)) : Json(nullptr);
            rows.push_back(row);
        }
    } else {
        const auto rep = reliability_report(ctx.panel, horizon, mode, opts);
        for (const auto& r : rep.rows) {
            Json row{{"t", r.t}, {"n", r.n}, {"classical_level", r.classical_level}};
            row["classical_fd"] = r.classical_fd ? Json(*r.classical_fd) : Json(nullptr);
            if (method == "both") {
                row["regression_level"] = slope_to_json(r.regression_level);
                row["regression_fd"] = r.regression_fd ? slope_to_json(*r.regression_fd) : Json(nullptr);
            }
            rows.push_back(row);
        }
    }
    j["rows"] = rows;
    return j;
}

RegressionResult fit_mincer(const Panel& panel, const std::string& dependent, const std::vector<std::string>& covariates,
                            bool year_fe, bool weighted) {
    std::string ycol;
    if (dependent == "u")
        ycol = "u";
    else if (dependent == "survey")
        ycol = "log_survey";
    else if (dependent == "register")
        ycol = "log_register";
    else
        throw ConfigError("mincer: dependent must be u, survey or register");

    std::vector<double> y;
    std::vector<NamedColumn> x;
    for (const auto& c : covariates) x.push_back({c, {}});
    OlsOptions opts;
    opts.year_fe = year_fe;
    // A common estimation sample (both incomes present) keeps the three
    // dependent-variable fits directly comparable.
    for (const auto& o : panel) {
        if (!o.has_both_incomes()) continue;
        std::vector<double> row;
        for (const auto& c : covariates) {
            auto v = variable_value(o, c);
            if (!v) break;
            row.push_back(*v);
        }
        if (row.size() != covariates.size()) continue;
        y.push_back(*variable_value(o, ycol));
        for (std::size_t k = 0; k < row.size(); ++k) x[k].values.push_back(row[k]);
        opts.periods.push_back(o.period);
        if (weighted) opts.weights.push_back(o.weight);
    }
    return ols_fit(y, x, opts);
}

Json run_mincer(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "dependent", "covariates", "year_fe", "by_gender", "weighted"});
    const std::string dep = get_string(a, "dependent", path, "u");
    const auto covariates = get_strings(a, "covariates", path);
    const bool year_fe = get_bool(a, "year_fe", path, false);
    const bool by_gender = get_bool(a, "by_gender", path, false);
    const bool weighted = get_bool(a, "weighted", path, false);
    for (const auto& c : covariates) {
        const bool present = std::any_of(ctx.panel.begin(), ctx.panel.end(),
                                         [&](const LinkedObservation& o) { return variable_value(o, c).has_value(); });
        if (!present) bad_field(path + "covariates", "references '" + c + "', which is not in the input panel");
    }
    if (weighted) {
        std::set<ModuleTag> tags;
        for (const auto& o : ctx.panel) tags.insert(o.module_tag);
        if (tags.size() > 1)
            throw DataError("mincer: weighted regression would pool core and innovation module weights");
    }

    Json j;
    j["type"] = "mincer";
    j["dependent"] = dep;
    j["year_fe"] = year_fe;
    j["weighted"] = weighted;
    Json groups = Json::array();
    auto add = [&](const std::string& name, const Panel& sub) {
        Json g{{"group", name}};
        g.update(regression_to_json(fit_mincer(sub, dep, covariates, year_fe, weighted), !covariates.empty()));
        groups.push_back(g);
    };
    add("all", ctx.panel);
    if (by_gender) {
        std::vector<std::string> cov_no_female;
        for (const auto& c : covariates)
            if (c != "female") cov_no_female.push_back(c);
        for (const auto& [name, value] : {std::pair<const char*, double>{"men", 0.0}, {"women", 1.0}}) {
            const Panel sub = ctx.panel.filter([&](const LinkedObservation& o) { return o.covariate("female") == value; });
            Json g{{"group", name}};
            g.update(regression_to_json(fit_mincer(sub, dep, cov_no_female, year_fe, weighted), !cov_no_female.empty()));
            groups.push_back(g);
        }
    }
    j["n"] = groups[0]["n"];
    j["groups"] = groups;
    return j;
}

Json run_group_summary(const Json& a, const std::string& path, AnalysisContext& ctx) {
    check_keys(a, path, {"type", "chain", "variables", "weighted", "module"});
    std::vector<GroupPredicate> chain;
    if (const Json* c = child(a, "chain")) {
        if (!c->is_array()) bad_field(path + "chain", "must be a list");
        for (std::size_t i = 0; i < c->size(); ++i) {
            const std::string lp = path + "chain[" + std::to_string(i) + "].";
            check_keys((*c)[i], lp, {"name", "variable", "equals"});
            GroupPredicate g;
            g.variable = get_string((*c)[i], "variable", lp, "");
            if (g.variable.empty()) bad_field(lp + "variable", "is required");
            g.name = get_string((*c)[i], "name", lp, g.variable);
            g.equals = get_real((*c)[i], "equals", lp, 1.0);
            chain.push_back(g);
        }
    }
    const auto variables = get_strings(a, "variables", path);
    if (variables.empty()) bad_field(path + "variables", "must list at least one variable");
    const bool weighted = get_bool(a, "weighted", path, false);
    const std::string module = get_string(a, "module", path, "");
    const Panel sub = module.empty() ? ctx.panel : ctx.panel.filter([&](const LinkedObservation& o) {
        return o.module_tag == module_tag_from_string(module);
    });
    const auto stats = weighted_group_summary(sub, chain, variables, weighted);
    Json j;
    j["type"] = "group_summary";
    j["weighted"] = weighted;
    if (!module.empty()) j["module"] = module;
    j["n"] = sub.size();
    Json rows = Json::array();
    for (const auto& s : stats)
        rows.push_back({{"group", s.group},
                        {"variable", s.variable},
                        {"mean", real_or_null(s.mean)},
                        {"sd", real_or_null(s.sd)},
                        {"n", s.n},
                        {"weight_sum", s.weight_sum}});
    j["rows"] = rows;
    return j;
}

}  // namespace

// --- config parsing ---------------------------------------------------------

DgpConfig parse_dgp_config(const Json& node, std::uint64_t default_seed) {
    const std::string p = "dgp.";
    check_keys(node, p,
               {"n_units", "n_periods", "first_period", "income", "error", "outcome", "innovation_dist", "student_t_df",
                "attrition_hazard", "gap_hazard", "top_code_limit", "seed"});
    DgpConfig c;
    const auto n_units = get_int(node, "n_units", p, 1000);
    if (n_units < 1) bad_field(p + "n_units", "must be >= 1");
    c.n_units = static_cast<std::size_t>(n_units);
    c.n_periods = static_cast<int>(get_int(node, "n_periods", p, 1));
    c.first_period = static_cast<int>(get_int(node, "first_period", p, 2000));
    c.seed = static_cast<std::uint64_t>(get_int(node, "seed", p, static_cast<long long>(default_seed)));
    if (const Json* inc = child(node, "income")) {
        const std::string ip = p + "income.";
        check_keys(*inc, ip, {"rho", "innovation_var", "signal_var", "mean_log_income", "unit_effect_var", "start_at_stationary"});
        c.income.rho = get_real(*inc, "rho", ip, 0.0);
        c.income.unit_effect_var = get_real(*inc, "unit_effect_var", ip, 0.0);
        c.income.mean_log_income = get_real(*inc, "mean_log_income", ip, c.income.mean_log_income);
        c.income.start_at_stationary = get_bool(*inc, "start_at_stationary", ip, true);
        if (child(*inc, "signal_var") && child(*inc, "innovation_var"))
            bad_field(ip + "signal_var", "cannot be combined with innovation_var");
        if (child(*inc, "signal_var")) {
            // Stationary variance of the AR part: innovation_var = (1 - rho^2) * (signal_var - unit_effect_var).
            const double s2 = get_real(*inc, "signal_var", ip, 0.0) - c.income.unit_effect_var;
            c.income.innovation_var = (1.0 - c.income.rho * c.income.rho) * s2;
        } else {
            c.income.innovation_var = get_real(*inc, "innovation_var", ip, c.income.innovation_var);
        }
    }
    if (const Json* err = child(node, "error")) {
        const std::string ep = p + "error.";
        check_keys(*err, ep, {"delta", "noise_var", "error_mean", "error_rho", "covariate_loadings", "error_var", "corr"});
        if (child(*err, "corr") || child(*err, "error_var")) {
            if (child(*err, "delta") || child(*err, "noise_var"))
                bad_field(ep + "corr", "cannot be combined with delta/noise_var");
            c.error = ErrorProcessParams::from_moments(c.income.signal_var(), get_real(*err, "error_var", ep, 0.0),
                                                       get_real(*err, "corr", ep, 0.0));
        } else {
            c.error.delta = get_real(*err, "delta", ep, 0.0);
            c.error.noise_var = get_real(*err, "noise_var", ep, c.error.noise_var);
        }
        c.error.error_mean = get_real(*err, "error_mean", ep, 0.0);
        c.error.error_rho = get_real(*err, "error_rho", ep, 0.0);
        if (const Json* l = child(*err, "covariate_loadings")) {
            if (!l->is_object()) bad_field(ep + "covariate_loadings", "must be an object");
            for (const auto& [k, v] : l->items()) {
                if (!v.is_number()) bad_field(ep + "covariate_loadings." + k, "must be a number");
                c.error.covariate_loadings[k] = v.get<double>();
            }
        }
    }
    if (const Json* oc = child(node, "outcome")) {
        const std::string op = p + "outcome.";
        check_keys(*oc, op, {"beta", "alpha", "residual_var", "error_delta", "error_noise_var"});
        OutcomeSpec o;
        o.beta = get_real(*oc, "beta", op, 1.0);
        o.alpha = get_real(*oc, "alpha", op, 0.0);
        o.residual_var = get_real(*oc, "residual_var", op, 0.0);
        o.error_delta = get_real(*oc, "error_delta", op, 0.0);
        o.error_noise_var = get_real(*oc, "error_noise_var", op, 0.0);
        c.outcome = o;
    }
    const std::string dist = get_string(node, "innovation_dist", p, "gaussian");
    if (dist == "gaussian")
        c.innovation_dist = InnovationDist::gaussian;
    else if (dist == "student_t")
        c.innovation_dist = InnovationDist::student_t;
    else
        bad_field(p + "innovation_dist", "must be gaussian or student_t");
    c.student_t_df = get_real(node, "student_t_df", p, 5.0);
    c.attrition_hazard = get_real(node, "attrition_hazard", p, 0.0);
    c.gap_hazard = get_real(node, "gap_hazard", p, 0.0);
    if (child(node, "top_code_limit")) c.top_code_limit = get_real(node, "top_code_limit", p, 0.0);
    c.validate();
    return c;
}

RestrictionConfig parse_restriction_config(const Json& node, const std::string& base_dir) {
    const std::string p = "restrictions.";
    check_keys(node, p,
               {"assessment_limits", "assessment_limits_csv", "assessment_cap_fraction", "marginal_limits",
                "marginal_limits_csv", "marginal_reliable_from", "error_cap", "error_cap_rule", "age_range",
                "excluded_occupations", "drop_imputed", "region_covariate"});
    RestrictionConfig c;
    if (const Json* t = child(node, "assessment_limits")) {
        if (!t->is_array()) bad_field(p + "assessment_limits", "must be a list of {year, region, limit}");
        for (const auto& e : *t) {
            const std::string ep = p + "assessment_limits[].";
            c.assessment_limits[{static_cast<int>(get_int(e, "year", ep, 0)), static_cast<int>(get_int(e, "region", ep, 0))}] =
                get_real(e, "limit", ep, 0.0);
        }
    }
    if (child(node, "assessment_limits_csv")) {
        const std::string path = resolve(base_dir, get_string(node, "assessment_limits_csv", p, ""));
        std::ifstream in(path);
        if (!in) bad_field(p + "assessment_limits_csv", "names an unreadable file '" + path + "'");
        for (const auto& [k, v] : read_assessment_limits_csv(in)) c.assessment_limits[k] = v;
    }
    if (const Json* t = child(node, "marginal_limits")) {
        if (!t->is_array()) bad_field(p + "marginal_limits", "must be a list of {year, limit}");
        for (const auto& e : *t) {
            const std::string ep = p + "marginal_limits[].";
            c.marginal_limits[static_cast<int>(get_int(e, "year", ep, 0))] = get_real(e, "limit", ep, 0.0);
        }
    }
    if (child(node, "marginal_limits_csv")) {
        const std::string path = resolve(base_dir, get_string(node, "marginal_limits_csv", p, ""));
        std::ifstream in(path);
        if (!in) bad_field(p + "marginal_limits_csv", "names an unreadable file '" + path + "'");
        for (const auto& [k, v] : read_marginal_limits_csv(in)) c.marginal_limits[k] = v;
    }
    c.assessment_cap_fraction = get_real(node, "assessment_cap_fraction", p, c.assessment_cap_fraction);
    c.marginal_reliable_from = static_cast<int>(get_int(node, "marginal_reliable_from", p, c.marginal_reliable_from));
    c.error_cap = get_real(node, "error_cap", p, c.error_cap);
    const std::string rule = get_string(node, "error_cap_rule", p, "either");
    if (rule == "either")
        c.error_cap_rule = ErrorCapRule::either;
    else if (rule == "both")
        c.error_cap_rule = ErrorCapRule::both;
    else
        bad_field(p + "error_cap_rule", "must be either or both");
    if (const Json* r = child(node, "age_range")) {
        if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number())
            bad_field(p + "age_range", "must be [min, max]");
        c.age_range = {(*r)[0].get<double>(), (*r)[1].get<double>()};
    }
    if (const Json* occ = child(node, "excluded_occupations")) {
        if (!occ->is_array()) bad_field(p + "excluded_occupations", "must be a list of integer codes");
        for (const auto& e : *occ) {
            if (!e.is_number_integer()) bad_field(p + "excluded_occupations", "must be a list of integer codes");
            c.excluded_occupations.insert(e.get<long long>());
        }
    }
    c.drop_imputed = get_bool(node, "drop_imputed", p, c.drop_imputed);
    c.region_covariate = get_string(node, "region_covariate", p, c.region_covariate);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig parse_run_config(const Json& doc, const std::string& base_dir) {
    check_keys(doc, "", {"seed", "threads", "dgp", "restrictions", "balance", "analyses"});
    RunConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(get_int(doc, "seed", "", 42));
    const auto threads = get_int(doc, "threads", "", 1);
    if (threads < 1) bad_field("threads", "must be >= 1");
    cfg.threads = static_cast<unsigned>(threads);
    if (const Json* d = child(doc, "dgp")) cfg.dgp = parse_dgp_config(*d, cfg.seed);
    if (const Json* r = child(doc, "restrictions")) cfg.restrictions = parse_restriction_config(*r, base_dir);
    if (doc.contains("balance") && doc["balance"].is_null()) {
        cfg.balance.reset();
    } else if (const Json* b = child(doc, "balance")) {
        check_keys(*b, "balance.", {"horizon", "mode"});
        BalanceSpec spec;
        spec.horizon = static_cast<int>(get_int(*b, "horizon", "balance.", 4));
        if (spec.horizon < 1) bad_field("balance.horizon", "must be >= 1");
        spec.mode = balance_mode_from_string(get_string(*b, "mode", "balance.", "weak"));
        cfg.balance = spec;
    }
    if (const Json* a = child(doc, "analyses")) {
        if (!a->is_array()) bad_field("analyses", "must be a list");
        for (std::size_t i = 0; i < a->size(); ++i) {
            const auto& e = (*a)[i];
            if (!e.is_object() || !e.contains("type") || !e["type"].is_string())
                bad_field("analyses[" + std::to_string(i) + "].type", "is required");
        }
        cfg.analyses = *a;
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    const auto base = fs::path(path).parent_path();
    return parse_run_config(doc, base.empty() ? "." : base.string());
}

std::string dump_json(const Json& j, int indent) {
    std::ostringstream os;
    dump_value(os, j, indent, 0);
    if (indent >= 0) os << '\n';
    return os.str();
}

Json oracle_to_json(const OracleValues& o) {
    Json j;
    j["signal_var"] = o.signal_var;
    j["error_var"] = o.error_var;
    j["signal_error_cov"] = o.signal_error_cov;
    j["lambda_level"] = o.lambda_level;
    j["lambda_fd"] = o.lambda_fd;
    j["nonclassical_slope_factor"] = real_or_null(o.nonclassical_slope_factor);
    j["dep_var_bias_factor"] = o.dep_var_bias_factor;
    j["sign_regime"] = to_string(o.sign_regime);
    return j;
}

Json ledger_to_json(const RestrictionLedger& ledger) {
    Json rows = Json::array();
    for (const auto& e : ledger) rows.push_back({{"step", e.step}, {"units", e.units}, {"observations", e.observations}});
    return rows;
}

AnalyzeOutput run_analyses(const Panel& input, const RunConfig& cfg) {
    AnalyzeOutput out;
    Json& rep = out.report;
    rep["schema_version"] = kReportSchemaVersion;
    rep["seed"] = cfg.seed;
    rep["input"] = {{"observations", input.size()}, {"units", input.unit_count()}};

    Panel panel = input;
    if (cfg.restrictions) {
        auto [restricted, ledger] = apply_restrictions(panel, *cfg.restrictions);
        rep["ledger"] = ledger_to_json(ledger);
        panel = std::move(restricted);
    }
    if (cfg.balance) {
        panel = build_balanced(panel, *cfg.balance);
        rep["balance"] = {{"mode", to_string(cfg.balance->mode)},
                          {"horizon", cfg.balance->horizon},
                          {"units", panel.unit_count()},
                          {"observations", panel.size()}};
    } else {
        panel = assign_event_time(panel);
        rep["balance"] = nullptr;
    }

    AnalysisContext ctx{panel, cfg.balance ? cfg.balance->horizon : 4, 0, out.plot_files};
    Json results = Json::array();
    for (std::size_t i = 0; i < cfg.analyses.size(); ++i) {
        const Json& a = cfg.analyses[i];
        const std::string path = "analyses[" + std::to_string(i) + "].";
        const std::string type = a["type"].get<std::string>();
        ctx.index = i;
        try {
            if (type == "error_summary")
                results.push_back(run_error_summary(a, path, ctx));
            else if (type == "histogram")
                results.push_back(run_histogram(a, path, ctx));
            else if (type == "quantile_profile")
                results.push_back(run_quantile_profile(a, path, ctx));
            else if (type == "moment_matrix")
                results.push_back(run_moment_matrix(a, path, ctx));
            else if (type == "reliability")
                results.push_back(run_reliability(a, path, ctx));
            else if (type == "mincer")
                results.push_back(run_mincer(a, path, ctx));
            else if (type == "group_summary")
                results.push_back(run_group_summary(a, path, ctx));
            else
                bad_field(path + "type", "has unknown value '" + type + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const DataError& e) {
            throw DataError(path.substr(0, path.size() - 1) + " (" + type + "): " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError(path.substr(0, path.size() - 1) + " (" + type + "): " + e.what());
        }
    }
    rep["analyses"] = results;
    return out;
}

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.dgp) throw ConfigError("config: section 'dgp' is required for simulate");
    fs::create_directories(out_dir);
    const Panel panel = simulate_panel(*cfg.dgp, cfg.threads);
    write_panel_csv_file((fs::path(out_dir) / "panel.csv").string(), panel);

    Json oj;
    oj["schema_version"] = kReportSchemaVersion;
    oj["seed"] = cfg.dgp->seed;
    oj["observations"] = panel.size();
    oj["units"] = panel.unit_count();
    try {
        oj["available"] = true;
        oj["oracle"] = oracle_to_json(oracle(*cfg.dgp));
    } catch (const ConfigError& e) {
        oj["available"] = false;
        oj["reason"] = e.what();
    }
    write_text(fs::path(out_dir) / "oracle.json", dump_json(oj));
}

void cmd_analyze(const RunConfig& cfg, const std::string& panel_csv, const std::string& out_dir) {
    const Panel panel = read_panel_csv_file(panel_csv);
    auto out = run_analyses(panel, cfg);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.json", dump_json(out.report));
    for (const auto& [name, content] : out.plot_files) write_text(fs::path(out_dir) / name, content);
}

void cmd_harmonize(const RunConfig& cfg, const std::string& spells_csv, const std::string& survey_csv,
                   const std::string& out_dir) {
    const auto spells = read_spells_csv_file(spells_csv);
    const auto survey = read_survey_csv_file(survey_csv);
    HarmonizeResult res = cfg.restrictions ? harmonize(survey, spells, *cfg.restrictions)
                                           : link_survey_to_register(survey, spells);
    fs::create_directories(out_dir);
    write_panel_csv_file((fs::path(out_dir) / "panel.csv").string(), res.panel);
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["ledger"] = ledger_to_json(res.ledger);
    write_text(fs::path(out_dir) / "ledger.json", dump_json(j));
}

}  // namespace valstudy
