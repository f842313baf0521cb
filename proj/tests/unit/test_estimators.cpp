#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "table4.hpp"
#include "valstudy/balancing.hpp"
#include "valstudy/error.hpp"
#include "valstudy/estimators.hpp"

using namespace valstudy;
using fixtures::obs;

namespace {

// Ten-point fixture; reference values computed independently by a 50-digit
// brute-force sandwich.
const std::vector<double> kY{3.1, 2.4, 4.9, 8.2, 7.0, 6.1, 9.3, 13.8, 10.2, 12.9};
const std::vector<double> kX1{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
const std::vector<double> kX2{2.0, -1.0, 0.5, 3.0, 1.5, -2.0, 0.0, 4.0, -0.5, 1.0};

RegressionResult fixture_fit() { return ols_fit(kY, {{"x1", kX1}, {"x2", kX2}}); }

}  // namespace

TEST_CASE("OLS coefficients, HC1 errors and R-squared on the fixture") {
    const auto r = fixture_fit();
    REQUIRE(r.names == std::vector<std::string>{kInterceptName, "x1", "x2"});
    CHECK(r.coef(kInterceptName) == doctest::Approx(0.72214037526059763725).epsilon(1e-12));
    CHECK(r.coef("x1") == doctest::Approx(1.1523002084781097985).epsilon(1e-12));
    CHECK(r.coef("x2") == doctest::Approx(0.85906879777623349548).epsilon(1e-12));
    CHECK(std::abs(r.se(kInterceptName) - 0.30667126165039428053) < 1e-10);
    CHECK(std::abs(r.se("x1") - 0.049378390938709361863) < 1e-10);
    CHECK(std::abs(r.se("x2") - 0.076140226696715837121) < 1e-10);
    CHECK(r.r_squared == doctest::Approx(0.98655327733187869813).epsilon(1e-12));
    CHECK(r.n_obs == 10);
    CHECK(r.residuals.size() == 10);
}

TEST_CASE("HC0 differs from HC1 by the degrees-of-freedom factor") {
    OlsOptions o;
    o.robust = RobustKind::hc0;
    const auto r0 = ols_fit(kY, {{"x1", kX1}, {"x2", kX2}}, o);
    const auto r1 = fixture_fit();
    CHECK(r1.se("x1") / r0.se("x1") == doctest::Approx(std::sqrt(10.0 / 7.0)));
}

TEST_CASE("joint robust F test on the fixture") {
    const auto f = joint_f_test(fixture_fit());
    CHECK(f.df1 == 2);
    CHECK(f.df2 == 7);
    CHECK(f.f_stat == doctest::Approx(396.00388996552446589).epsilon(1e-10));
    CHECK(f.p_value == doctest::Approx(6.293824256285087e-08).epsilon(1e-8));
}

TEST_CASE("F distribution tail") {
    CHECK(f_distribution_sf(0.0, 3, 10) == 1.0);
    // F(1, k) = t(k)^2: P(F > 2.228^2) for k = 10 is about 0.05.
    CHECK(f_distribution_sf(2.2281388519649385 * 2.2281388519649385, 1, 10) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("integer weights equal replicated rows") {
    std::vector<double> y{1.0, 2.5, 2.0, 4.5, 5.5}, x{0, 1, 2, 3, 4}, w{1, 2, 1, 3, 1};
    OlsOptions o;
    o.weights = w;
    const auto rw = ols_fit(y, {{"x", x}}, o);
    std::vector<double> yr, xr;
    for (std::size_t i = 0; i < y.size(); ++i)
        for (int k = 0; k < static_cast<int>(w[i]); ++k) {
            yr.push_back(y[i]);
            xr.push_back(x[i]);
        }
    const auto rr = ols_fit(yr, {{"x", xr}});
    CHECK(rw.coef("x") == doctest::Approx(rr.coef("x")).epsilon(1e-12));
    CHECK(rw.coef(kInterceptName) == doctest::Approx(rr.coef(kInterceptName)).epsilon(1e-12));
}

TEST_CASE("year fixed effects omit the first year") {
    std::vector<double> y{1, 2, 3, 5, 6, 8}, x{0.1, 0.4, 0.3, 0.9, 0.2, 0.7};
    OlsOptions o;
    o.year_fe = true;
    o.periods = {2000, 2001, 2002, 2000, 2001, 2002};
    const auto r = ols_fit(y, {{"x", x}}, o);
    CHECK(r.names == std::vector<std::string>{kInterceptName, "x", "year_2001", "year_2002"});
    CHECK(r.is_fixed_effect[2]);
    CHECK_FALSE(r.is_fixed_effect[1]);
    CHECK(joint_f_test(r).df1 == 1);
    CHECK(joint_f_test(r, true, false).df1 == 3);
}

TEST_CASE("rank deficiency and too few observations are numerical errors") {
    std::vector<double> y{1, 2, 3, 4}, a{1, 2, 3, 4};
    std::vector<double> b{2, 4, 6, 8};
    try {
        ols_fit(y, {{"a", a}, {"b", b}});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
    CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 2}, {{"a", {1, 2}}}), NumericalError);
}

TEST_CASE("regression without intercept reports uncentered R-squared") {
    OlsOptions o;
    o.intercept = false;
    const auto r = ols_fit(std::vector<double>{2, 4, 6.5}, {{"x", {1, 2, 3}}}, o);
    double ssr = r.residuals.squaredNorm();
    CHECK(r.r_squared == doctest::Approx(1.0 - ssr / (4 + 16 + 42.25)));
}

TEST_CASE("first differences remove unit effects") {
    std::vector<LinkedObservation> recs;
    const double effects[] = {1.0, -2.0, 0.5};
    const double xs[3][3] = {{0.1, 0.5, 0.2}, {1.0, 0.0, 0.7}, {0.3, 0.9, 1.5}};
    for (int i = 0; i < 3; ++i)
        for (int t = 0; t < 3; ++t)
            recs.push_back(obs("u" + std::to_string(i), 2000 + t, 1.0, 1.0,
                               {{"x", xs[i][t]}, {"y", effects[i] + 2.0 * xs[i][t] + 0.1 * t}}));
    const auto r = first_difference_ols(panel_from_records(recs), "y", {"x"});
    CHECK(r.n_obs == 6);
    CHECK(r.coef("d_x") == doctest::Approx(2.0));
    CHECK(r.coef(kInterceptName) == doctest::Approx(0.1));
}

TEST_CASE("classical reliability from published moments") {
    const auto r = reliability_classical(fixtures::table4_moments());
    REQUIRE(r.level.size() == 4);
    REQUIRE(r.fd.size() == 3);
    CHECK(r.level[0] == doctest::Approx(0.9453621346886912).epsilon(1e-14));
    CHECK(r.level[3] == doctest::Approx(0.9379474940334128).epsilon(1e-14));
    CHECK(r.fd[0] == doctest::Approx(0.5923913043478265).epsilon(1e-12));
    CHECK(r.fd[2] == doctest::Approx(0.4479166666666663).epsilon(1e-12));
    const auto with_autocov = reliability_classical(fixtures::table4_moments(), {true});
    CHECK(with_autocov.fd[0] > r.fd[0]);
}

TEST_CASE("moment-implied slopes") {
    const auto s = reliability_slopes_from_moments(fixtures::table4_moments());
    CHECK(s.level[0] == doctest::Approx(1.0208023774145616).epsilon(1e-14));
    CHECK(s.level[1] == doctest::Approx(1.0245398773006134).epsilon(1e-14));
    CHECK(s.level[2] == doctest::Approx(1.0167064439140812).epsilon(1e-14));
    CHECK(s.level[3] == doctest::Approx(1.0083102493074791).epsilon(1e-14));
}

namespace {

Panel moment_panel() {
    // Unit c lacks t = 2, so pairwise and balanced samples differ.
    std::vector<LinkedObservation> r;
    auto add = [&](const std::string& id, int t, double reg, double survey) {
        auto o = obs(id, 2000 + t, survey, reg);
        o.event_time = t;
        r.push_back(o);
    };
    add("a", 1, 1000, 1100);
    add("a", 2, 1200, 1150);
    add("b", 1, 2000, 1900);
    add("b", 2, 2500, 2600);
    add("c", 1, 1500, 1400);
    add("d", 1, 3000, 3300);
    add("d", 2, 2800, 2700);
    return panel_from_records(r);
}

}  // namespace

TEST_CASE("pairwise and balanced moment samples") {
    const auto pw = moment_matrix(moment_panel(), 2, MomentMode::pairwise);
    const auto bal = moment_matrix(moment_panel(), 2, MomentMode::balanced);
    CHECK(pw.n_eff()(0, 0) == 4);
    CHECK(pw.n_eff()(0, 1) == 3);
    CHECK(bal.n_eff()(0, 0) == 3);
    CHECK(pw.variable_names() == std::vector<std::string>{"log_register_1", "log_register_2", "u_1", "u_2"});
    // var(log Y*_1) over all four units by hand
    const double v[] = {std::log(1000.0), std::log(2000.0), std::log(1500.0), std::log(3000.0)};
    double m = 0, ss = 0;
    for (double x : v) m += x / 4;
    for (double x : v) ss += (x - m) * (x - m);
    CHECK(pw.signal_var(1) == doctest::Approx(ss / 3).epsilon(1e-14));
    CHECK(pw.corr()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("moment matrix needs event time and enough data") {
    auto p = panel_from_records({obs("a", 2000, 1.0, 1.0), obs("b", 2000, 2.0, 2.0)});
    CHECK_THROWS_AS(moment_matrix(p, 1, MomentMode::pairwise), DataError);
    CHECK_THROWS_AS(moment_matrix(moment_panel(), 3, MomentMode::pairwise), DataError);
}

TEST_CASE("regression reliability equals the sample cov/var ratio") {
    const auto p = moment_panel();
    const auto s = reliability_regression(p, 1, false);
    std::vector<double> x, y;
    for (const auto& o : p)
        if (o.event_time == 1) {
            x.push_back(std::log(*o.survey_income));
            y.push_back(std::log(*o.register_income));
        }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / 4;
        my += y[i] / 4;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    CHECK(s.slope == doctest::Approx(sxy / sxx).epsilon(1e-12));
    CHECK(s.n == 4);
    CHECK(reliability_regression(p, 2, true).n == 3);
}

TEST_CASE("reliability report rows") {
    const auto rep = reliability_report(moment_panel(), 2, MomentMode::balanced);
    REQUIRE(rep.rows.size() == 2);
    CHECK_FALSE(rep.rows[0].classical_fd.has_value());
    CHECK(rep.rows[1].classical_fd.has_value());
    CHECK(rep.rows[0].regression_level.n == 3);
}

TEST_CASE("moment mode strings") {
    CHECK(moment_mode_from_string("balanced") == MomentMode::balanced);
    CHECK(to_string(MomentMode::pairwise) == "pairwise");
    CHECK_THROWS_AS(moment_mode_from_string("listwise"), ConfigError);
}
