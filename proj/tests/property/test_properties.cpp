// Randomized invariant checks. Every case is seeded, so failures reproduce.
#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "valstudy/balancing.hpp"
#include "valstudy/bias.hpp"
#include "valstudy/dgp.hpp"
#include "valstudy/distribution.hpp"
#include "valstudy/estimators.hpp"

using namespace valstudy;

namespace {

constexpr int kCases = 60;

Panel random_panel(std::mt19937_64& rng, std::size_t units, int periods, double missing_share = 0.1) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::vector<LinkedObservation> r;
    for (std::size_t i = 0; i < units; ++i) {
        const double female = u01(rng) < 0.5 ? 1.0 : 0.0;
        const double edu = std::round(12 + 2 * n01(rng));
        for (int t = 0; t < periods; ++t) {
            const double x = 7.5 + 0.6 * n01(rng);
            const double u = -0.05 + 0.2 * n01(rng);
            auto o = fixtures::obs("u" + std::to_string(i), 2000 + t, std::exp(x + u), std::exp(x),
                                   {{"female", female}, {"education_years", edu}, {"age", 20.0 + 40 * u01(rng)}});
            o.weight = 0.5 + u01(rng);
            if (u01(rng) < missing_share) {
                o.survey_income.reset();
                o.employed = u01(rng) < 0.5;
            }
            r.push_back(o);
        }
    }
    return panel_from_records(r);
}

}  // namespace

TEST_CASE("relative error equals exp(log error) - 1") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lg(std::log(10.0), std::log(1e6));
    for (int k = 0; k < 1000; ++k) {
        const auto e = compute_error_triple(fixtures::obs("a", 2000, std::exp(lg(rng)), std::exp(lg(rng))));
        CHECK(std::abs(e.relative_error - std::expm1(e.log_error)) <= 1e-12 * std::max(1.0, std::abs(e.relative_error)));
    }
}

TEST_CASE("geometric ratio equals exp of the mean log error") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < kCases; ++k) {
        const Panel p = random_panel(rng, 30, 2);
        for (auto notion : {ErrorNotion::log, ErrorNotion::relative, ErrorNotion::nominal}) {
            const auto s = summarize_errors(p, notion, false);
            double m = 0;
            std::size_t n = 0;
            for (const auto& o : p)
                if (o.has_both_incomes()) {
                    m += compute_error_triple(o).log_error;
                    ++n;
                }
            CHECK(s.n == n);
            CHECK(std::abs(s.geometric_ratio - std::exp(m / static_cast<double>(n))) < 1e-12);
            CHECK(s.quantiles[0] <= s.quantiles[1]);
            CHECK(s.quantiles[1] <= s.quantiles[2]);
            CHECK(s.quantiles[2] <= s.quantiles[3]);
            CHECK(s.quantiles[3] <= s.quantiles[4]);
        }
    }
}

TEST_CASE("survey minus register coefficients equal error coefficients") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < kCases; ++k) {
        const Panel p = random_panel(rng, 40, 3);
        std::vector<double> ys, yr, yu;
        std::vector<NamedColumn> x{{"female", {}}, {"education_years", {}}, {"age", {}}};
        OlsOptions opts;
        opts.year_fe = true;
        const bool weighted = k % 2 == 1;
        for (const auto& o : p) {
            if (!o.has_both_incomes()) continue;
            ys.push_back(*variable_value(o, "log_survey"));
            yr.push_back(*variable_value(o, "log_register"));
            yu.push_back(*variable_value(o, "u"));
            for (auto& c : x) c.values.push_back(*o.covariate(c.name));
            opts.periods.push_back(o.period);
            if (weighted) opts.weights.push_back(o.weight);
        }
        const auto rs = ols_fit(ys, x, opts), rr = ols_fit(yr, x, opts), ru = ols_fit(yu, x, opts);
        for (Eigen::Index j = 0; j < ru.coefficients.size(); ++j)
            CHECK(std::abs(rs.coefficients[j] - rr.coefficients[j] - ru.coefficients[j]) < 1e-10);
    }
}

TEST_CASE("OLS is equivariant to adding a multiple of a regressor") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    for (int k = 0; k < kCases; ++k) {
        const std::size_t n = 20 + k;
        std::vector<double> y(n), a(n), b(n), y2(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = n01(rng);
            b[i] = n01(rng);
            y[i] = 1 + a[i] - b[i] + n01(rng);
            y2[i] = y[i] + 2.5 * a[i];
        }
        const auto r1 = ols_fit(y, {{"a", a}, {"b", b}});
        const auto r2 = ols_fit(y2, {{"a", a}, {"b", b}});
        CHECK(r2.coef("a") - r1.coef("a") == doctest::Approx(2.5).epsilon(1e-10));
        CHECK(r2.se("a") == doctest::Approx(r1.se("a")).epsilon(1e-9));
        CHECK(r1.robust_cov.isApprox(r1.robust_cov.transpose()));
        CHECK(r1.r_squared >= 0.0);
        CHECK(r1.r_squared <= 1.0);
    }
}

TEST_CASE("F p-value lies in [0, 1] and decreases in F") {
    for (double d1 : {1.0, 3.0, 10.0})
        for (double d2 : {5.0, 50.0, 2000.0}) {
            double prev = 1.0;
            for (double f = 0.0; f < 20.0; f += 0.5) {
                const double p = f_distribution_sf(f, d1, d2);
                CHECK(p >= 0.0);
                CHECK(p <= prev + 1e-15);
                prev = p;
            }
        }
}

TEST_CASE("histogram accounts for every value") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> width(0.01, 0.5);
    for (int k = 0; k < kCases; ++k) {
        std::vector<double> v(200);
        for (auto& x : v) x = n01(rng);
        const double w = width(rng);
        const auto h = histogram(v, w, -1.5, 1.5);
        CHECK(h.included() + h.underflow + h.overflow == v.size());
        CHECK(h.bin_edges.front() == -1.5);
        CHECK(h.bin_edges.back() >= 1.5 - 1e-12);
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            std::size_t direct = 0;
            for (double x : v) direct += x >= h.bin_edges[b] && x < h.bin_edges[b + 1];
            CHECK(direct == h.counts[b]);
        }
    }
}

TEST_CASE("quantile groups are balanced within each year") {
    std::mt19937_64 rng(6);
    for (int k = 0; k < kCases; ++k) {
        const Panel p = random_panel(rng, 25 + static_cast<std::size_t>(k), 2);
        const int groups = 2 + k % 9;
        const auto g = quantile_assignment(p, groups);
        std::map<std::pair<int, int>, std::size_t> sizes;
        std::map<int, std::vector<std::pair<double, int>>> by_year;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (g[i] == 0) {
                CHECK_FALSE(p[i].has_both_incomes());
                continue;
            }
            ++sizes[{p[i].period, g[i]}];
            by_year[p[i].period].push_back({*p[i].register_income, g[i]});
        }
        for (auto& [year, rows] : by_year) {
            std::size_t lo = SIZE_MAX, hi = 0;
            for (int q = 1; q <= groups; ++q) {
                lo = std::min(lo, sizes[{year, q}]);
                hi = std::max(hi, sizes[{year, q}]);
            }
            CHECK(hi - lo <= 1);
            std::sort(rows.begin(), rows.end());
            for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].second <= rows[i].second);
        }
    }
}

TEST_CASE("panel csv round trip is exact") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        const Panel p = random_panel(rng, 15, 3, 0.3);
        std::stringstream ss;
        write_panel_csv(ss, p);
        const Panel q = read_panel_csv(ss);
        REQUIRE(q.size() == p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(q[i].unit_id == p[i].unit_id);
            CHECK(q[i].survey_income == p[i].survey_income);
            CHECK(q[i].register_income == p[i].register_income);
            CHECK(q[i].weight == p[i].weight);
            CHECK(q[i].employed == p[i].employed);
            CHECK(q[i].covariates == p[i].covariates);
        }
    }
}

TEST_CASE("strong balancing is a truncated subset of weak balancing") {
    std::mt19937_64 rng(8);
    for (int k = 0; k < kCases; ++k) {
        const Panel p = random_panel(rng, 30, 6, 0.15);
        const int horizon = 1 + k % 5;
        const Panel weak = build_balanced(p, {horizon, BalanceMode::weak});
        const Panel strong = build_balanced(p, {horizon, BalanceMode::strong});
        std::map<std::string, int> per_unit;
        for (const auto& o : strong) {
            ++per_unit[o.unit_id];
            CHECK(o.has_both_incomes());
            CHECK(*o.event_time >= 1);
            CHECK(*o.event_time <= horizon);
        }
        for (const auto& [id, n] : per_unit) CHECK(n == horizon);
        CHECK(strong.size() <= weak.size());
        for (const auto& [lo, hi] : weak.unit_blocks())
            for (std::size_t i = lo; i < hi; ++i) CHECK(*weak[i].event_time == static_cast<int>(i - lo) + 1);
    }
}

TEST_CASE("classical reliability lies in [0, 1]") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < kCases; ++k) {
        DgpConfig c;
        c.n_units = 300;
        c.n_periods = 3;
        c.seed = static_cast<std::uint64_t>(k);
        c.income.rho = 0.9;
        c.error.noise_var = 0.01 + 0.1 * (k % 5);
        const Panel p = build_balanced(simulate_panel(c), {3, BalanceMode::strong});
        const auto r = reliability_classical(moment_matrix(p, 3, MomentMode::balanced));
        for (double l : r.level) {
            CHECK(l >= 0.0);
            CHECK(l <= 1.0);
        }
    }
}

TEST_CASE("pairwise and balanced moments agree on a complete panel") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        DgpConfig c;
        c.n_units = 200;
        c.n_periods = 3;
        c.seed = seed;
        const Panel p = build_balanced(simulate_panel(c), {3, BalanceMode::weak});
        const auto a = moment_matrix(p, 3, MomentMode::pairwise);
        const auto b = moment_matrix(p, 3, MomentMode::balanced);
        CHECK(a.cov().isApprox(b.cov(), 1e-12));
        const auto slopes = reliability_slopes_from_moments(a);
        for (int t = 1; t <= 3; ++t)
            CHECK(reliability_regression(p, t, false).slope == doctest::Approx(slopes.level[t - 1]).epsilon(1e-9));
    }
}

TEST_CASE("bias regime is consistent with the factor") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> var(0.01, 1.0), corr(-1.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        const double s2x = var(rng), s2u = var(rng), r = corr(rng);
        const auto b = bias_regime(s2x, s2u, r);
        if (b.degenerate) continue;
        switch (b.regime) {
            case SignRegime::positive_bias: CHECK(b.factor > 1.0); break;
            case SignRegime::sign_reversed: CHECK(b.factor < 0.0); break;
            case SignRegime::sign_preserved:
                CHECK(b.factor >= -1e-12);
                CHECK(b.factor <= 1.0 + 1e-12);
                break;
        }
    }
}

TEST_CASE("simulation is invariant to the number of threads") {
    for (std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
        DgpConfig c;
        c.n_units = 257;
        c.n_periods = 4;
        c.seed = seed;
        c.gap_hazard = 0.1;
        c.attrition_hazard = 0.1;
        c.error.error_rho = 0.4;
        std::stringstream a, b;
        write_panel_csv(a, simulate_panel(c, 1));
        write_panel_csv(b, simulate_panel(c, 3));
        CHECK(a.str() == b.str());
    }
}
