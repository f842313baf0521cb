#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "valstudy/bias.hpp"
#include "valstudy/panel.hpp"

namespace valstudy {

enum class InnovationDist { gaussian, student_t };

/// Log register income: X*_it = mean + mu_i + s_it with s_it = rho s_i,t-1 + xi_it.
struct IncomeProcessParams {
    double rho = 0.0;
    double innovation_var = 0.5;
    double mean_log_income = 8.0;
    double unit_effect_var = 0.0;
    bool start_at_stationary = true;

    /// Variance of the autoregressive part at stationarity.
    double stationary_ar_var() const { return innovation_var / (1.0 - rho * rho); }
    /// Stationary variance of X* including the unit effect.
    double signal_var() const { return unit_effect_var + stationary_ar_var(); }
};

/// Log error: u_it = error_mean + delta (X*_it - E X*) + a_it + sum_k loading_k (c_k - E c_k),
/// where a_it is AR(1) with coefficient error_rho and stationary variance noise_var.
struct ErrorProcessParams {
    double delta = 0.0;
    double noise_var = 0.03;
    double error_mean = 0.0;
    double error_rho = 0.0;
    std::map<std::string, double> covariate_loadings;

    /// Parameters reproducing a target error variance and signal/error
    /// correlation for a signal of variance `signal_var`.
    static ErrorProcessParams from_moments(double signal_var, double error_var, double corr_signal_error,
                                           double error_mean = 0.0);
};

/// Outcome Z*_it = alpha + beta X*_it + eps_it, reported as
/// Z_it = Z*_it + error_delta (Z*_it - E Z*) + nu_it.
struct OutcomeSpec {
    double beta = 1.0;
    double alpha = 0.0;
    double residual_var = 0.0;
    double error_delta = 0.0;
    double error_noise_var = 0.0;
};

struct DgpConfig {
    std::size_t n_units = 1000;
    int n_periods = 1;
    int first_period = 2000;
    IncomeProcessParams income;
    ErrorProcessParams error;
    std::optional<OutcomeSpec> outcome;
    InnovationDist innovation_dist = InnovationDist::gaussian;
    double student_t_df = 5.0;
    double attrition_hazard = 0.0;
    double gap_hazard = 0.0;
    std::optional<double> top_code_limit;
    std::uint64_t seed = 42;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct OracleValues {
    double signal_var = 0.0;
    double error_var = 0.0;
    double signal_error_cov = 0.0;
    double lambda_level = 0.0;
    double lambda_fd = 0.0;
    double nonclassical_slope_factor = 0.0;
    double dep_var_bias_factor = 1.0;
    SignRegime sign_regime = SignRegime::sign_preserved;
};

/// Closed-form plims for a stationary configuration. Throws ConfigError when
/// the configuration is not stationary (no stationary start, covariate
/// loadings present, or top-coding enabled).
OracleValues oracle(const DgpConfig& cfg);

/// Deterministic, order-independent synthetic panel. Each unit draws from its
/// own substream derived from (seed, unit index), so the result does not
/// depend on `threads`. Covariates emitted: female, east, age,
/// education_years, birth_year_survey, birth_year_register, imputed,
/// occupation, and when an outcome is configured outcome_true/outcome.
Panel simulate_panel(const DgpConfig& cfg, unsigned threads = 1);

/// Engine for substream `stream` of master seed `seed`.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

}  // namespace valstudy
