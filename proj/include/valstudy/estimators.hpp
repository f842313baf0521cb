#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valstudy/bias.hpp"
#include "valstudy/panel.hpp"

namespace valstudy {

// ---------------------------------------------------------------------------
// Least squares with heteroskedasticity-consistent inference.

enum class RobustKind { hc0, hc1 };

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

struct OlsOptions {
    bool intercept = true;
    /// Expands `periods` into indicator columns, omitting the first period.
    bool year_fe = false;
    std::vector<int> periods;
    /// Optional nonnegative weights (weighted least squares).
    std::vector<double> weights;
    RobustKind robust = RobustKind::hc1;
};

inline constexpr const char* kInterceptName = "(intercept)";

struct RegressionResult {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd robust_se;
    Eigen::MatrixXd robust_cov;
    /// True for the intercept and for year indicator columns.
    std::vector<bool> is_intercept;
    std::vector<bool> is_fixed_effect;
    double r_squared = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_params = 0;
    Eigen::VectorXd residuals;

    std::size_t index_of(const std::string& name) const;
    double coef(const std::string& name) const { return coefficients[index_of(name)]; }
    double se(const std::string& name) const { return robust_se[index_of(name)]; }
};

/// Weighted or unweighted OLS with HC0/HC1 sandwich covariance. Throws
/// NumericalError naming a linearly dependent column when the design is
/// rank deficient (relative pivot tolerance 1e-10), and when n <= k.
RegressionResult ols_fit(std::span<const double> y, const std::vector<NamedColumn>& x, const OlsOptions& options = {});

struct FTestResult {
    double f_stat = 0.0;
    std::size_t df1 = 0;
    std::size_t df2 = 0;
    double p_value = 1.0;
};

/// Robust Wald test that every tested coefficient is zero, reported as F.
/// The intercept is skipped when `exclude_intercept`; year indicators are
/// skipped when `exclude_fixed_effects`.
FTestResult joint_f_test(const RegressionResult& result, bool exclude_intercept = true,
                         bool exclude_fixed_effects = true);

/// Upper tail P(F > f) of the F(df1, df2) distribution.
double f_distribution_sf(double f, double df1, double df2);

/// OLS of Delta y on Delta x over consecutive periods (period gap exactly 1)
/// within each unit. Variables are resolved with `variable_value`.
RegressionResult first_difference_ols(const Panel& panel, const std::string& y, const std::vector<std::string>& x,
                                      bool intercept = true);

// ---------------------------------------------------------------------------
// Second moments of {log Y*_t, u_t} over event time.

enum class MomentMode { pairwise, balanced };

MomentMode moment_mode_from_string(const std::string& s);
std::string to_string(MomentMode m);

/// Covariances of [log Y*_1..T, u_1..T]. Row/column t-1 is log Y*_t and
/// T+t-1 is u_t. Undefined correlations (a zero variance) are NaN.
class MomentMatrix {
public:
    /// Builds from a given covariance matrix, e.g. published moments.
    static MomentMatrix from_covariances(int horizon, const Eigen::MatrixXd& cov, std::size_t n,
                                         MomentMode mode = MomentMode::balanced);

    int horizon() const { return horizon_; }
    MomentMode mode() const { return mode_; }
    const Eigen::MatrixXd& cov() const { return cov_; }
    const Eigen::MatrixXd& corr() const { return corr_; }
    const Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic>& n_eff() const { return n_eff_; }
    std::vector<std::string> variable_names() const;

    std::size_t signal_index(int t) const { return static_cast<std::size_t>(t - 1); }
    std::size_t error_index(int t) const { return static_cast<std::size_t>(horizon_ + t - 1); }

    double signal_var(int t) const { return cov_(signal_index(t), signal_index(t)); }
    double error_var(int t) const { return cov_(error_index(t), error_index(t)); }
    double signal_cov(int t, int s) const { return cov_(signal_index(t), signal_index(s)); }
    double error_cov(int t, int s) const { return cov_(error_index(t), error_index(s)); }
    double signal_error_cov(int t, int s) const { return cov_(signal_index(t), error_index(s)); }

    friend MomentMatrix moment_matrix(const Panel& panel, int horizon, MomentMode mode);

private:
    int horizon_ = 0;
    MomentMode mode_ = MomentMode::pairwise;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd corr_;
    Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> n_eff_;
};

/// Pairwise mode uses, per cell, every unit observed at both event times
/// (n-1 denominator); balanced mode uses the units observed at every
/// t in 1..horizon. Throws DataError naming any cell with fewer than two
/// observations.
MomentMatrix moment_matrix(const Panel& panel, int horizon, MomentMode mode);

// ---------------------------------------------------------------------------
// Reliability ratios.

struct ClassicalReliability {
    std::vector<double> level;  // index t-1, t = 1..T
    std::vector<double> fd;     // index t-2, t = 2..T
};

struct ClassicalOptions {
    /// Subtract 2 cov(u_t, u_t-1) in the first-difference denominator.
    bool subtract_error_autocov = false;
};

ClassicalReliability reliability_classical(const MomentMatrix& m, const ClassicalOptions& options = {});

/// Population slopes of log Y* on log Y (level) and of Delta log Y* on
/// Delta log Y (first difference) implied by a moment matrix, i.e.
/// cov(Y*, Y) / var(Y) with Y = Y* + u. Same indexing as ClassicalReliability.
/// A first-difference entry is NaN when the matrix implies a nonpositive
/// var(Delta log Y), as happens with incompletely published moments.
ClassicalReliability reliability_slopes_from_moments(const MomentMatrix& m);

struct SlopeEstimate {
    double slope = 0.0;
    double robust_se = 0.0;
    std::size_t n = 0;
};

/// Slope of log Y* (or its first difference) on log Y with an intercept, at
/// event time t. The differenced variant uses units observed at t and t-1.
SlopeEstimate reliability_regression(const Panel& panel, int t, bool differenced);

struct ReliabilityRow {
    int t = 0;
    double classical_level = 0.0;
    std::optional<double> classical_fd;
    SlopeEstimate regression_level;
    std::optional<SlopeEstimate> regression_fd;
    std::size_t n = 0;
};

struct ReliabilityReport {
    MomentMode mode = MomentMode::pairwise;
    std::vector<ReliabilityRow> rows;
};

ReliabilityReport reliability_report(const Panel& panel, int horizon, MomentMode mode,
                                     const ClassicalOptions& options = {});

}  // namespace valstudy
