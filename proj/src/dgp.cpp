#include "valstudy/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "valstudy/error.hpp"

namespace valstudy {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Centering constants for covariate loadings: population means of the
// simulated covariates (age at the first period).
const std::map<std::string, double>& covariate_centers() {
    static const std::map<std::string, double> centers = {
        {"female", 0.5}, {"east", 0.2}, {"education_years", 12.0}, {"age", 37.5}};
    return centers;
}

class UnitDraws {
public:
    UnitDraws(std::mt19937_64& rng, InnovationDist dist, double df) : rng_(rng), dist_(dist), t_(df), df_(df) {}

    // Zero-mean, unit-variance innovation.
    double innovation() {
        if (dist_ == InnovationDist::student_t) return t_(rng_) * std::sqrt((df_ - 2.0) / df_);
        return normal_(rng_);
    }
    double normal() { return normal_(rng_); }
    double uniform() { return uniform_(rng_); }

private:
    std::mt19937_64& rng_;
    InnovationDist dist_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::student_t_distribution<double> t_;
    double df_;
};

std::vector<LinkedObservation> simulate_unit(const DgpConfig& cfg, std::size_t index, int id_width) {
    auto rng = substream(cfg.seed, index);
    UnitDraws draw(rng, cfg.innovation_dist, cfg.student_t_df);

    std::string id = std::to_string(index);
    id = "u" + std::string(static_cast<std::size_t>(std::max(0, id_width - static_cast<int>(id.size()))), '0') + id;

    const double female = draw.uniform() < 0.5 ? 1.0 : 0.0;
    const double east = draw.uniform() < 0.2 ? 1.0 : 0.0;
    const double education = std::clamp(std::round(12.0 + 2.5 * draw.normal()), 7.0, 18.0);
    const int age0 = 20 + static_cast<int>(draw.uniform() * 36.0);  // 20..55
    const double birth_year = cfg.first_period - age0;

    const auto& inc = cfg.income;
    const auto& err = cfg.error;
    const double mu = std::sqrt(inc.unit_effect_var) * draw.normal();
    double ar = inc.start_at_stationary ? std::sqrt(inc.stationary_ar_var()) * draw.innovation()
                                        : std::sqrt(inc.innovation_var) * draw.innovation();
    const double noise_sd = std::sqrt(err.noise_var);
    double a = noise_sd * draw.innovation();
    const double a_scale = std::sqrt(1.0 - err.error_rho * err.error_rho) * noise_sd;

    std::vector<LinkedObservation> rows;
    rows.reserve(static_cast<std::size_t>(cfg.n_periods));
    bool exited = false;
    for (int t = 0; t < cfg.n_periods; ++t) {
        if (t > 0) {
            ar = inc.rho * ar + std::sqrt(inc.innovation_var) * draw.innovation();
            a = err.error_rho * a + a_scale * draw.innovation();
        }
        const double eps = draw.normal();
        const double nu_z = draw.normal();
        const double exit_draw = draw.uniform();
        const double gap_draw = draw.uniform();

        if (t > 0 && exit_draw < cfg.attrition_hazard) exited = true;
        if (exited) continue;  // draws above keep later periods aligned across configs

        const double age = age0 + t;
        Covariates cov{{"female", female},
                       {"east", east},
                       {"education_years", education},
                       {"age", age},
                       {"birth_year_survey", birth_year},
                       {"birth_year_register", birth_year},
                       {"imputed", 0.0},
                       {"occupation", 0.0}};

        const double x_true = inc.mean_log_income + mu + ar;
        double u = err.error_mean + err.delta * (x_true - inc.mean_log_income) + a;
        for (const auto& [name, loading] : err.covariate_loadings) {
            const double center = covariate_centers().at(name);
            const double value = name == "age" ? age0 : cov.at(name);
            u += loading * (value - center);
        }

        LinkedObservation o;
        o.unit_id = id;
        o.period = cfg.first_period + t;
        o.module_tag = ModuleTag::core;
        const bool gap = t > 0 && gap_draw < cfg.gap_hazard;
        o.employed = !gap;
        if (!gap) {
            double reg = std::exp(x_true);
            if (cfg.top_code_limit) {
                const bool capped = reg > *cfg.top_code_limit;
                if (capped) reg = *cfg.top_code_limit;
                cov["top_coded"] = capped ? 1.0 : 0.0;
            }
            o.register_income = reg;
            o.survey_income = std::exp(x_true + u);
        }
        if (cfg.outcome) {
            const auto& oc = *cfg.outcome;
            const double z_true = oc.alpha + oc.beta * x_true + std::sqrt(oc.residual_var) * eps;
            const double z_mean = oc.alpha + oc.beta * inc.mean_log_income;
            cov["outcome_true"] = z_true;
            cov["outcome"] = z_true + oc.error_delta * (z_true - z_mean) + std::sqrt(oc.error_noise_var) * nu_z;
        }
        o.covariates = std::move(cov);
        rows.push_back(std::move(o));
    }
    return rows;
}

}  // namespace

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (0x6a09e667f3bcc909ULL * (stream + 1));
    std::uint64_t s0 = splitmix64(state);
    std::uint64_t s1 = splitmix64(state);
    std::uint64_t s2 = splitmix64(state);
    std::uint64_t s3 = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                      static_cast<std::uint32_t>(s1), static_cast<std::uint32_t>(s1 >> 32),
                      static_cast<std::uint32_t>(s2), static_cast<std::uint32_t>(s2 >> 32),
                      static_cast<std::uint32_t>(s3), static_cast<std::uint32_t>(s3 >> 32)};
    return std::mt19937_64(seq);
}

ErrorProcessParams ErrorProcessParams::from_moments(double signal_var, double error_var, double corr_signal_error,
                                                    double error_mean) {
    if (!(signal_var > 0.0) || !(error_var >= 0.0))
        throw ConfigError("error moments: variances must be positive");
    if (std::abs(corr_signal_error) > 1.0) throw ConfigError("error moments: |corr(X*, u)| must be <= 1");
    ErrorProcessParams p;
    p.delta = corr_signal_error * std::sqrt(error_var / signal_var);
    p.noise_var = error_var * (1.0 - corr_signal_error * corr_signal_error);
    p.error_mean = error_mean;
    return p;
}

void DgpConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("dgp." + field + ": " + why); };
    if (n_units == 0) fail("n_units", "must be >= 1");
    if (n_periods < 1) fail("n_periods", "must be >= 1");
    if (!(income.innovation_var > 0.0)) fail("income.innovation_var", "must be > 0");
    if (!(income.unit_effect_var >= 0.0)) fail("income.unit_effect_var", "must be >= 0");
    if (!(std::abs(income.rho) < 1.0) && (income.start_at_stationary || n_periods > 1))
        fail("income.rho", "must satisfy |rho| < 1");
    if (!(error.noise_var >= 0.0)) fail("error.noise_var", "must be >= 0");
    if (!(std::abs(error.error_rho) < 1.0)) fail("error.error_rho", "must satisfy |error_rho| < 1");
    for (const auto& [name, loading] : error.covariate_loadings) {
        if (!covariate_centers().count(name))
            fail("error.covariate_loadings." + name, "unknown covariate (use female, east, education_years, age)");
        if (!std::isfinite(loading)) fail("error.covariate_loadings." + name, "must be finite");
    }
    const double s2x = income.signal_var();
    const double s2u = error.delta * error.delta * s2x + error.noise_var;
    if (s2u > 0.0 && std::abs(error.delta * s2x / std::sqrt(s2x * s2u)) > 1.0 + 1e-12)
        fail("error.delta", "implied |corr(X*, u)| exceeds 1");
    if (outcome) {
        if (!(outcome->residual_var >= 0.0)) fail("outcome.residual_var", "must be >= 0");
        if (!(outcome->error_noise_var >= 0.0)) fail("outcome.error_noise_var", "must be >= 0");
    }
    if (innovation_dist == InnovationDist::student_t && !(student_t_df > 2.0))
        fail("student_t_df", "must be > 2 for a finite variance");
    if (!(attrition_hazard >= 0.0 && attrition_hazard <= 1.0)) fail("attrition_hazard", "must lie in [0, 1]");
    if (!(gap_hazard >= 0.0 && gap_hazard <= 1.0)) fail("gap_hazard", "must lie in [0, 1]");
    if (top_code_limit && !(*top_code_limit > 0.0)) fail("top_code_limit", "must be > 0");
}

OracleValues oracle(const DgpConfig& cfg) {
    cfg.validate();
    if (!cfg.income.start_at_stationary)
        throw ConfigError("oracle: requires income.start_at_stationary = true");
    if (!cfg.error.covariate_loadings.empty()) throw ConfigError("oracle: covariate loadings are not supported");
    if (cfg.top_code_limit) throw ConfigError("oracle: top-coding is not supported");

    OracleValues o;
    const double s2x = cfg.income.signal_var();
    o.signal_var = s2x;
    o.signal_error_cov = cfg.error.delta * s2x;
    o.error_var = cfg.error.delta * cfg.error.delta * s2x + cfg.error.noise_var;
    o.lambda_level = s2x / (s2x + o.error_var);

    // Differencing removes the unit effect; only the AR part contributes.
    const double ar_part = (1.0 - cfg.income.rho) * cfg.income.stationary_ar_var();
    o.lambda_fd = ar_part / (ar_part + o.error_var);

    const double corr = o.error_var > 0.0 ? o.signal_error_cov / std::sqrt(s2x * o.error_var) : 0.0;
    const auto regime = bias_regime(s2x, o.error_var, corr);
    o.nonclassical_slope_factor = regime.factor;
    o.sign_regime = regime.regime;
    o.dep_var_bias_factor = 1.0 + (cfg.outcome ? cfg.outcome->error_delta : 0.0);
    return o;
}

Panel simulate_panel(const DgpConfig& cfg, unsigned threads) {
    cfg.validate();
    const int width = static_cast<int>(std::to_string(cfg.n_units - 1).size());
    std::vector<std::vector<LinkedObservation>> per_unit(cfg.n_units);

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.n_units)));
    if (threads == 1) {
        for (std::size_t i = 0; i < cfg.n_units; ++i) per_unit[i] = simulate_unit(cfg, i, width);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (cfg.n_units + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(cfg.n_units, lo + chunk);
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) per_unit[i] = simulate_unit(cfg, i, width);
            });
        }
    }

    std::vector<LinkedObservation> all;
    for (auto& rows : per_unit)
        for (auto& r : rows) all.push_back(std::move(r));
    return panel_from_records(std::move(all));
}

}  // namespace valstudy
