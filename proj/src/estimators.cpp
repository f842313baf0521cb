#include "valstudy/estimators.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "valstudy/error.hpp"

namespace valstudy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRankTolerance = 1e-10;

}  // namespace

std::size_t RegressionResult::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("regression result has no coefficient '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

RegressionResult ols_fit(std::span<const double> y, const std::vector<NamedColumn>& x, const OlsOptions& options) {
    const std::size_t n = y.size();
    for (const auto& col : x)
        if (col.values.size() != n)
            throw DataError("ols: column '" + col.name + "' has " + std::to_string(col.values.size()) +
                            " rows, expected " + std::to_string(n));
    if (!options.weights.empty() && options.weights.size() != n) throw DataError("ols: weights length mismatch");
    if (options.year_fe && options.periods.size() != n) throw DataError("ols: periods length mismatch");

    RegressionResult res;
    std::vector<const std::vector<double>*> cols;
    if (options.intercept) {
        res.names.emplace_back(kInterceptName);
        res.is_intercept.push_back(true);
        res.is_fixed_effect.push_back(false);
        cols.push_back(nullptr);
    }
    for (const auto& col : x) {
        res.names.push_back(col.name);
        res.is_intercept.push_back(false);
        res.is_fixed_effect.push_back(false);
        cols.push_back(&col.values);
    }
    std::vector<int> fe_years;
    if (options.year_fe) {
        std::set<int> years(options.periods.begin(), options.periods.end());
        fe_years.assign(years.begin(), years.end());
        if (!fe_years.empty()) fe_years.erase(fe_years.begin());
        for (int yr : fe_years) {
            res.names.push_back("year_" + std::to_string(yr));
            res.is_intercept.push_back(false);
            res.is_fixed_effect.push_back(true);
        }
    }
    const std::size_t k = res.names.size();
    if (k == 0) throw DataError("ols: no regressors");
    if (n <= k)
        throw NumericalError("ols: need more observations than parameters (n = " + std::to_string(n) +
                             ", k = " + std::to_string(k) + ")");

    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd Y(n);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    for (std::size_t i = 0; i < n; ++i) {
        Y[i] = y[i];
        if (!options.weights.empty()) {
            w[i] = options.weights[i];
            if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw DataError("ols: weights must be finite and >= 0");
        }
        std::size_t c = 0;
        for (const auto* col : cols) X(i, c++) = col ? (*col)[i] : 1.0;
        for (int yr : fe_years) X(i, c++) = options.periods[i] == yr ? 1.0 : 0.0;
    }
    if (!Y.allFinite() || !X.allFinite()) throw DataError("ols: non-finite values in the data");

    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    const Eigen::VectorXd Yw = sw.cwiseProduct(Y);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(kRankTolerance);
    if (static_cast<std::size_t>(qr.rank()) < k) {
        const auto dependent = qr.colsPermutation().indices()[qr.rank()];
        throw NumericalError("ols: design matrix is rank deficient; column '" +
                             res.names[static_cast<std::size_t>(dependent)] +
                             "' is a linear combination of the others");
    }
    res.coefficients = qr.solve(Yw);
    res.residuals = Y - X * res.coefficients;

    // (X'WX)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                                         static_cast<Eigen::Index>(k)));
    const auto& P = qr.colsPermutation();
    const Eigen::MatrixXd bread = P * (Rinv * Rinv.transpose()) * P.transpose();

    const Eigen::VectorXd score_scale = w.cwiseProduct(res.residuals);
    const Eigen::MatrixXd S = score_scale.asDiagonal() * X;
    Eigen::MatrixXd V = bread * (S.transpose() * S) * bread;
    if (options.robust == RobustKind::hc1) V *= static_cast<double>(n) / static_cast<double>(n - k);
    res.robust_cov = V;
    res.robust_se = V.diagonal().cwiseMax(0.0).cwiseSqrt();

    const double ssr = (w.array() * res.residuals.array().square()).sum();
    double sst = 0.0;
    if (options.intercept) {
        const double ybar = w.dot(Y) / w.sum();
        sst = (w.array() * (Y.array() - ybar).square()).sum();
    } else {
        sst = (w.array() * Y.array().square()).sum();
    }
    res.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    res.n_obs = n;
    res.n_params = k;
    return res;
}

double f_distribution_sf(double f, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw DataError("F distribution: degrees of freedom must be > 0");
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double x = df1 * f / (df1 * f + df2);
    return boost::math::ibetac(df1 / 2.0, df2 / 2.0, x);
}

FTestResult joint_f_test(const RegressionResult& result, bool exclude_intercept, bool exclude_fixed_effects) {
    std::vector<Eigen::Index> tested;
    for (std::size_t j = 0; j < result.names.size(); ++j) {
        if (exclude_intercept && result.is_intercept[j]) continue;
        if (exclude_fixed_effects && result.is_fixed_effect[j]) continue;
        tested.push_back(static_cast<Eigen::Index>(j));
    }
    if (tested.empty()) throw DataError("joint F test: no coefficients to test");

    const auto q = static_cast<Eigen::Index>(tested.size());
    Eigen::VectorXd b(q);
    Eigen::MatrixXd V(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
        b[a] = result.coefficients[tested[a]];
        for (Eigen::Index c = 0; c < q; ++c) V(a, c) = result.robust_cov(tested[a], tested[c]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
    const double scale = V.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(scale > 0.0) ||
        ldlt.vectorD().minCoeff() <= kRankTolerance * scale)
        throw NumericalError("joint F test: restricted covariance matrix is singular");

    FTestResult out;
    out.df1 = static_cast<std::size_t>(q);
    out.df2 = result.n_obs - result.n_params;
    out.f_stat = b.dot(ldlt.solve(b)) / static_cast<double>(q);
    out.p_value = f_distribution_sf(out.f_stat, static_cast<double>(out.df1), static_cast<double>(out.df2));
    return out;
}

RegressionResult first_difference_ols(const Panel& panel, const std::string& y, const std::vector<std::string>& x,
                                      bool intercept) {
    std::vector<double> dy;
    std::vector<NamedColumn> dx;
    for (const auto& name : x) dx.push_back({"d_" + name, {}});
    const auto& obs = panel.observations();
    for (std::size_t i = 1; i < obs.size(); ++i) {
        const auto& prev = obs[i - 1];
        const auto& cur = obs[i];
        if (prev.unit_id != cur.unit_id || cur.period - prev.period != 1) continue;
        auto y1 = variable_value(cur, y), y0 = variable_value(prev, y);
        if (!y1 || !y0) continue;
        std::vector<double> row;
        for (const auto& name : x) {
            auto a = variable_value(cur, name), b = variable_value(prev, name);
            if (!a || !b) break;
            row.push_back(*a - *b);
        }
        if (row.size() != x.size()) continue;
        dy.push_back(*y1 - *y0);
        for (std::size_t j = 0; j < row.size(); ++j) dx[j].values.push_back(row[j]);
    }
    OlsOptions opts;
    opts.intercept = intercept;
    return ols_fit(dy, dx, opts);
}

// ---------------------------------------------------------------------------

MomentMode moment_mode_from_string(const std::string& s) {
    if (s == "pairwise") return MomentMode::pairwise;
    if (s == "balanced") return MomentMode::balanced;
    throw ConfigError("unknown moment mode '" + s + "' (expected pairwise or balanced)");
}

std::string to_string(MomentMode m) { return m == MomentMode::pairwise ? "pairwise" : "balanced"; }

std::vector<std::string> MomentMatrix::variable_names() const {
    std::vector<std::string> names;
    for (int t = 1; t <= horizon_; ++t) names.push_back("log_register_" + std::to_string(t));
    for (int t = 1; t <= horizon_; ++t) names.push_back("u_" + std::to_string(t));
    return names;
}

namespace {

Eigen::MatrixXd correlations_from(const Eigen::MatrixXd& cov) {
    const auto m = cov.rows();
    Eigen::MatrixXd corr(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
            const double d = cov(a, a) * cov(b, b);
            corr(a, b) = d > 0.0 ? cov(a, b) / std::sqrt(d) : kNaN;
        }
    return corr;
}

// Per unit: log register income and log error at event times 1..T (NaN if absent).
struct EventSeries {
    std::vector<std::vector<double>> values;  // [unit][2T]
};

EventSeries collect_event_series(const Panel& panel, int horizon) {
    EventSeries s;
    const auto width = static_cast<std::size_t>(2 * horizon);
    for (const auto& [lo, hi] : panel.unit_blocks()) {
        std::vector<double> row(width, kNaN);
        bool any = false;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& o = panel[i];
            if (!o.event_time || *o.event_time < 1 || *o.event_time > horizon) continue;
            auto sig = variable_value(o, "log_register");
            auto err = variable_value(o, "u");
            if (!sig || !err) continue;
            const auto t = static_cast<std::size_t>(*o.event_time - 1);
            row[t] = *sig;
            row[static_cast<std::size_t>(horizon) + t] = *err;
            any = true;
        }
        if (any) s.values.push_back(std::move(row));
    }
    return s;
}

}  // namespace

MomentMatrix MomentMatrix::from_covariances(int horizon, const Eigen::MatrixXd& cov, std::size_t n, MomentMode mode) {
    if (horizon < 1) throw DataError("moment matrix: horizon must be >= 1");
    if (cov.rows() != 2 * horizon || cov.cols() != 2 * horizon)
        throw DataError("moment matrix: covariance must be 2T x 2T");
    if (!cov.isApprox(cov.transpose(), 1e-12) && (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw DataError("moment matrix: covariance must be symmetric");
    MomentMatrix m;
    m.horizon_ = horizon;
    m.mode_ = mode;
    m.cov_ = cov;
    m.corr_ = correlations_from(cov);
    m.n_eff_ = Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic>::Constant(cov.rows(), cov.cols(), n);
    return m;
}

MomentMatrix moment_matrix(const Panel& panel, int horizon, MomentMode mode) {
    if (horizon < 1) throw DataError("moment matrix: horizon must be >= 1");
    for (const auto& o : panel)
        if (!o.event_time) throw DataError("moment matrix: event time not assigned for (" + o.unit_id + ", " +
                                           std::to_string(o.period) + ")");
    const auto series = collect_event_series(panel, horizon);
    const auto dim = static_cast<Eigen::Index>(2 * horizon);

    MomentMatrix m;
    m.horizon_ = horizon;
    m.mode_ = mode;
    m.cov_ = Eigen::MatrixXd::Zero(dim, dim);
    m.corr_ = Eigen::MatrixXd::Constant(dim, dim, kNaN);
    m.n_eff_ = Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim, dim);
    const auto names = m.variable_names();

    if (mode == MomentMode::balanced) {
        std::vector<const std::vector<double>*> rows;
        for (const auto& r : series.values)
            if (std::none_of(r.begin(), r.end(), [](double v) { return std::isnan(v); })) rows.push_back(&r);
        if (rows.size() < 2)
            throw DataError("moment matrix: balanced sample has " + std::to_string(rows.size()) +
                            " units; need at least 2");
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd D(n, dim);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) D(i, j) = (*rows[static_cast<std::size_t>(i)])[static_cast<std::size_t>(j)];
        const Eigen::RowVectorXd mean = D.colwise().mean();
        const Eigen::MatrixXd C = D.rowwise() - mean;
        m.cov_ = (C.transpose() * C) / static_cast<double>(n - 1);
        m.corr_ = correlations_from(m.cov_);
        m.n_eff_.setConstant(static_cast<std::size_t>(n));
        return m;
    }

    for (Eigen::Index a = 0; a < dim; ++a) {
        for (Eigen::Index b = a; b < dim; ++b) {
            double sa = 0, sb = 0;
            std::size_t n = 0;
            for (const auto& r : series.values) {
                const double va = r[static_cast<std::size_t>(a)], vb = r[static_cast<std::size_t>(b)];
                if (std::isnan(va) || std::isnan(vb)) continue;
                sa += va;
                sb += vb;
                ++n;
            }
            if (n < 2)
                throw DataError("moment matrix: cell (" + names[static_cast<std::size_t>(a)] + ", " +
                                names[static_cast<std::size_t>(b)] + ") has " + std::to_string(n) +
                                " observations; need at least 2");
            const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
            double cab = 0, caa = 0, cbb = 0;
            for (const auto& r : series.values) {
                const double va = r[static_cast<std::size_t>(a)], vb = r[static_cast<std::size_t>(b)];
                if (std::isnan(va) || std::isnan(vb)) continue;
                cab += (va - ma) * (vb - mb);
                caa += (va - ma) * (va - ma);
                cbb += (vb - mb) * (vb - mb);
            }
            const double denom = static_cast<double>(n - 1);
            m.cov_(a, b) = m.cov_(b, a) = cab / denom;
            const double corr = caa > 0.0 && cbb > 0.0 ? cab / std::sqrt(caa * cbb) : kNaN;
            m.corr_(a, b) = m.corr_(b, a) = corr;
            m.n_eff_(a, b) = m.n_eff_(b, a) = n;
        }
    }
    return m;
}

ClassicalReliability reliability_classical(const MomentMatrix& m, const ClassicalOptions& options) {
    ClassicalReliability out;
    for (int t = 1; t <= m.horizon(); ++t) {
        const double den = m.signal_var(t) + m.error_var(t);
        if (!(den > 0.0)) throw NumericalError("classical reliability: zero variance at t = " + std::to_string(t));
        out.level.push_back(m.signal_var(t) / den);
    }
    for (int t = 2; t <= m.horizon(); ++t) {
        const double num = m.signal_var(t) + m.signal_var(t - 1) - 2.0 * m.signal_cov(t, t - 1);
        double den = num + m.error_var(t) + m.error_var(t - 1);
        if (options.subtract_error_autocov) den -= 2.0 * m.error_cov(t, t - 1);
        if (den == 0.0)
            throw NumericalError("classical reliability: zero first-difference variance at t = " + std::to_string(t));
        out.fd.push_back(num / den);
    }
    return out;
}

ClassicalReliability reliability_slopes_from_moments(const MomentMatrix& m) {
    ClassicalReliability out;
    auto ratio = [](double num, double den, int t) {
        if (!(den > 0.0)) throw NumericalError("moment slope: zero variance of log Y at t = " + std::to_string(t));
        return num / den;
    };
    for (int t = 1; t <= m.horizon(); ++t) {
        const double sxu = m.signal_error_cov(t, t);
        out.level.push_back(
            ratio(m.signal_var(t) + sxu, m.signal_var(t) + m.error_var(t) + 2.0 * sxu, t));
    }
    for (int t = 2; t <= m.horizon(); ++t) {
        const double dx = m.signal_var(t) + m.signal_var(t - 1) - 2.0 * m.signal_cov(t, t - 1);
        const double du = m.error_var(t) + m.error_var(t - 1) - 2.0 * m.error_cov(t, t - 1);
        const double dxu = m.signal_error_cov(t, t) - m.signal_error_cov(t, t - 1) - m.signal_error_cov(t - 1, t) +
                           m.signal_error_cov(t - 1, t - 1);
        const double den = dx + du + 2.0 * dxu;
        out.fd.push_back(den > 0.0 ? (dx + dxu) / den : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

SlopeEstimate reliability_regression(const Panel& panel, int t, bool differenced) {
    if (t < 1 || (differenced && t < 2))
        throw DataError("reliability regression: invalid event time " + std::to_string(t));
    std::vector<double> y;
    std::vector<double> x;
    for (const auto& [lo, hi] : panel.unit_blocks()) {
        const LinkedObservation* at_t = nullptr;
        const LinkedObservation* at_prev = nullptr;
        for (std::size_t i = lo; i < hi; ++i) {
            if (panel[i].event_time == t) at_t = &panel[i];
            if (panel[i].event_time == t - 1) at_prev = &panel[i];
        }
        if (!at_t) continue;
        auto ys = variable_value(*at_t, "log_register");
        auto xs = variable_value(*at_t, "log_survey");
        if (!ys || !xs) continue;
        if (differenced) {
            if (!at_prev) continue;
            auto yp = variable_value(*at_prev, "log_register");
            auto xp = variable_value(*at_prev, "log_survey");
            if (!yp || !xp) continue;
            y.push_back(*ys - *yp);
            x.push_back(*xs - *xp);
        } else {
            y.push_back(*ys);
            x.push_back(*xs);
        }
    }
    const std::string where = std::string(differenced ? "first-difference" : "level") + " reliability regression at t = " +
                              std::to_string(t);
    if (x.size() < 3) throw DataError(where + ": need at least 3 observations, got " + std::to_string(x.size()));
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    if (!(ss > 0.0)) throw NumericalError(where + ": regressor has zero variance");

    const auto fit = ols_fit(y, {{"log_survey", x}});
    return {fit.coefficients[1], fit.robust_se[1], fit.n_obs};
}

ReliabilityReport reliability_report(const Panel& panel, int horizon, MomentMode mode, const ClassicalOptions& options) {
    const auto m = moment_matrix(panel, horizon, mode);
    const auto classical = reliability_classical(m, options);
    // Balanced regressions use the same common unit set as the moments.
    Panel balanced_sub;
    if (mode == MomentMode::balanced) {
        std::set<std::string> complete;
        for (const auto& [lo, hi] : panel.unit_blocks()) {
            std::set<int> seen;
            for (std::size_t i = lo; i < hi; ++i)
                if (panel[i].event_time && panel[i].has_both_incomes()) seen.insert(*panel[i].event_time);
            bool all = true;
            for (int s = 1; s <= horizon; ++s) all = all && seen.count(s);
            if (all) complete.insert(panel[lo].unit_id);
        }
        balanced_sub = panel.filter([&](const LinkedObservation& o) { return complete.count(o.unit_id) > 0; });
    }
    const Panel& sample = mode == MomentMode::balanced ? balanced_sub : panel;

    ReliabilityReport rep;
    rep.mode = mode;
    for (int t = 1; t <= horizon; ++t) {
        ReliabilityRow row;
        row.t = t;
        row.classical_level = classical.level[static_cast<std::size_t>(t - 1)];
        row.n = m.n_eff()(m.signal_index(t), m.error_index(t));
        row.regression_level = reliability_regression(sample, t, false);
        if (t >= 2) row.regression_fd = reliability_regression(sample, t, true);
        if (t >= 2) row.classical_fd = classical.fd[static_cast<std::size_t>(t - 2)];
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace valstudy
