#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "aml/errors.hpp"
#include "aml/probability.hpp"
#include "aml/quantum.hpp"

using namespace aml;

namespace {

// P(|eta - nP| >= n eps) for eta ~ Binomial(n, P), summed in log space.
double binomial_tail(int n, double P, double eps) {
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        if (std::abs(k - n * P) < n * eps * (1.0 - 1e-12)) continue;
        const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(P) +
                          (n - k) * std::log1p(-P);
        s += std::exp(lg);
    }
    return s;
}

}  // namespace

TEST_CASE("doubling orbits of rationals are exact") {
    const auto o = orbit(Rational(1, 7), 6);
    const std::vector<Rational> expect{{1, 7}, {2, 7}, {4, 7}, {1, 7}, {2, 7}, {4, 7}};
    CHECK(o == expect);
    for (const auto& s : orbit(Rational(0), 10)) CHECK(s == Rational(0));
    const auto third = orbit(Rational(1, 3), 5);
    for (std::size_t i = 0; i < third.size(); ++i) CHECK(third[i] == (i % 2 ? Rational(2, 3) : Rational(1, 3)));
    CHECK_THROWS_AS(orbit(Rational(1, 7), 0), ConfigError);
    CHECK_THROWS_AS(orbit(Rational(7, 7), 3), ConfigError);
}

TEST_CASE("odd denominators give periodic orbits") {
    for (std::int64_t den : {3, 5, 7, 9, 11, 21, 99, 1001, 65537}) {
        const Rational x0(1, den);
        const auto o = orbit(x0, static_cast<int>(den) + 1);
        bool returns = false;
        for (std::size_t i = 1; i < o.size(); ++i)
            if (o[i] == x0) {
                returns = true;
                break;
            }
        CHECK(returns);
    }
}

TEST_CASE("relative frequency of the 1/7 universe") {
    for (int k : {1, 2, 5, 100}) CHECK(relative_frequency(Rational(1, 7), 3 * k) == Rational(2, 3));
    CHECK(relative_frequency(Rational(0), 17) == Rational(1));
    // Events as conjunctions of tick conditions.
    const auto o = orbit(Rational(1, 7), 3);
    EventSpec e{{TickCondition{0, {1, 2}, true}, TickCondition{2, {1, 2}, false}}};
    CHECK(e.holds(o));  // 1/7 < 1/2 and 4/7 >= 1/2
    EventSpec beyond{{TickCondition{5, {1, 2}, true}}};
    CHECK_THROWS_AS(beyond.holds(o), ConfigError);
}

TEST_CASE("double orbits are exact dyadic orbits") {
    const double x = 0.1;  // m / 2^55
    const auto real = orbit(x, 60);
    const Rational dyadic(static_cast<std::int64_t>(std::ldexp(x, 55)), std::int64_t{1} << 55);
    const auto exact = orbit(dyadic, 60);
    for (std::size_t i = 0; i < real.size(); ++i) CHECK(real[i] == exact[i].to_double());
    CHECK(real.back() == 0.0);
}

TEST_CASE("uniform initial conditions give frequency one half") {
    const auto st = sampled_frequency(1000, 10000, 7);
    CHECK(std::abs(st.mean - 0.5) <= 3.0 * st.standard_error);
    CHECK(st.stddev == doctest::Approx(std::sqrt(0.25 / 1000.0)).epsilon(0.05));
}

TEST_CASE("law of large numbers deviation measure") {
    for (double eps : {0.05, 0.1}) {
        double previous = 2.0;
        for (int n : {100, 1000, 10000}) {
            const auto d = lln_deviation_measure(0.5, n, eps, 20000, 11);
            CHECK(d.measure <= d.chebyshev_bound + 3.0 * d.mc_sigma);
            const double exact = binomial_tail(n, 0.5, eps);
            CHECK(std::abs(d.measure - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / 20000.0) + 1e-12);
            CHECK(d.measure <= previous);
            if (previous > 0.0 && previous <= 1.0) CHECK(d.measure < previous);
            previous = d.measure;
        }
    }
    const auto p38 = lln_deviation_measure(0.375, 200, 0.05, 20000, 3);
    const double exact = binomial_tail(200, 0.375, 0.05);
    CHECK(std::abs(p38.measure - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / 20000.0));
    CHECK(lln_deviation_measure(0.5, 100, 1.0, 1000, 1).measure == 0.0);
    CHECK_THROWS_AS(lln_deviation_measure(0.3, 100, 0.1, 10, 1), ConfigError);
}

TEST_CASE("Monte Carlo results do not depend on the thread count") {
    const auto a = lln_deviation_measure(0.5, 100, 0.05, 5000, 42);
    setenv("AML_THREADS", "1", 1);
    const auto b = lln_deviation_measure(0.5, 100, 0.05, 5000, 42);
    unsetenv("AML_THREADS");
    CHECK(a.measure == b.measure);
    CHECK(lln_deviation_measure(0.5, 100, 0.05, 5000, 43).measure != a.measure);
}

TEST_CASE("dyadic digit events pass the independence test") {
    for (auto [i, j] : {std::pair{1, 2}, std::pair{3, 10}, std::pair{64, 65}}) {
        const auto c = digit_pair_chi2(i, j, 40000, 5);
        CHECK(c.independent);
        CHECK(c.dof == 3);
    }
}

TEST_CASE("measurement probability") {
    CHECK(measurement_probability({2.5, 2.5}) == 1.0);
    CHECK(measurement_probability({4.0, 1.0}) == measurement_probability({4e6, 1e6}));
    CHECK(measurement_probability({4.0, 1.0}) <= measurement_probability({4.0, 3.0}));
    CHECK_THROWS_AS(measurement_probability({0.0, 0.0}), ZeroExperimentMass);
    CHECK_THROWS_AS(measurement_probability({1.0, 2.0}), ConfigError);

    // Symmetric free source: the left half of a centred window carries half.
    PointSourceSpec s;
    s.x0 = Eigen::VectorXd::Zero(1);
    s.sigma = 0.1;
    const auto snaps =
        propagate_snapshots(make_point_source(s, GridSpec{1, 4096, 25.6, 1.0}), QuantumPotential{}, std::vector<double>{0.3}, 0.3);
    const double E = snaps.cone_mass(0, IntervalBox::interval(-1.0, 1.0));
    const double R = snaps.cone_mass(0, IntervalBox::interval(-1.0, 0.0));
    CHECK(measurement_probability({E, R}) == doctest::Approx(0.5).epsilon(1e-12));
}
