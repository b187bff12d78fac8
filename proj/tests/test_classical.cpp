#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "aml/classical.hpp"
#include "aml/errors.hpp"
#include "aml/numerics.hpp"

using namespace aml;

namespace {

// Deflection by the classical quadrature formula, used as an oracle for the
// orbit integrator: Theta = pi - 2 (s/r0) int_0^1 du / sqrt(F(r0/u)),
// F(r) = 1 - V(r)/E - s^2/r^2, with u = 1 - w^2 to remove the turning-point singularity.
double deflection_quadrature(const PotentialSpec& pot, double E, double s) {
    if (s == 0) return std::numbers::pi;
    auto F = [&](double r) { return 1 - pot.value(r) / E - s * s / (r * r); };
    double lo = s * 1e-3, hi = s + 10;
    while (F(lo) > 0) lo *= 0.5;
    const double r0 = numerics::brent_root(F, lo, hi, 1e-15);
    static const numerics::GaussLegendre gl(40);
    const double integral = gl.integrate(
        [&](double w) {
            const double u = 1 - w * w;
            return 2 * w / std::sqrt(F(r0 / u));
        },
        0.0, 1.0, 40);
    return std::numbers::pi - 2 * s / r0 * integral;
}

SystemSpec single(const PotentialSpec& external, double m = 1.0) {
    SystemSpec sys;
    sys.masses = {m};
    sys.external = {external};
    return sys;
}

}  // namespace

TEST_CASE("potential catalog") {
    auto b = PotentialSpec::square_barrier(0.5, 1.0);
    CHECK(b.value(0.0) == 0.5);
    CHECK(b.value(0.999) == 0.5);
    CHECK(b.value(1.001) == 0.0);
    CHECK(b.value(1.0) == doctest::Approx(0.25));
    // derivative matches finite differences for every smooth kind
    for (const auto& p : {PotentialSpec::gaussian(1.3, 0.7), PotentialSpec::soft_coulomb(-2.0, 0.3),
                          PotentialSpec::central_repulsive_power(1.0, 12.0), b}) {
        for (double r : {0.5, 0.9997, 1.0, 1.0002, 1.7}) {
            const double h = 1e-8;
            const double fd = (p.value(r + h) - p.value(r - h)) / (2 * h);
            CHECK(std::abs(p.derivative(r) - fd) <= 1e-5 * (1 + std::abs(fd)));
        }
    }
    CHECK_THROWS_AS(PotentialSpec::square_barrier(-1, 1), ConfigError);
}

TEST_CASE("free motion gives straight lines") {
    SystemSpec sys;
    sys.masses = {1.0, 2.0, 0.5};
    Eigen::VectorXd v(9);
    v << 1, 0, 0, 0, -1, 0.5, 0.3, 0.3, -2;
    auto run = integrate_nbigbang(sys, v, 100.0, 0.1);
    CHECK(run.energy_drift < 1e-14);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& tr = run.bigbang.trajectories()[i];
        const Vec3 vi = v.segment<3>(3 * static_cast<Eigen::Index>(i));
        for (Eigen::Index k = 0; k < tr.size(); ++k)
            CHECK((tr.position(k) - vi * tr.times()[static_cast<std::size_t>(k)]).norm() < 1e-10);
    }
    auto omega = estimate_asymptotic_velocity(run.bigbang, 1e-9);
    CHECK((omega - v).norm() < 1e-9);
}

TEST_CASE("barrier integration matches the closed form") {
    const double m = 1, V0 = 0.5, a = 1;
    const auto pot = PotentialSpec::square_barrier(V0, a);
    const double delta = pot.smoothing;
    for (double vI : {2.0, 0.7, -1.3}) {
        auto run = integrate_nbigbang(single(pot, m), Eigen::Vector3d(vI, 0, 0), 20.0, 2e-5);
        const auto& tr = run.bigbang.trajectories()[0];
        for (Eigen::Index k = 0; k < tr.size(); ++k) {
            const double t = tr.times()[static_cast<std::size_t>(k)];
            const double x = tr.position(k).x();
            if (std::abs(x) <= a + delta) continue;
            CHECK(std::abs(x - barrier_trajectory_oracle(m, V0, a, vI, t)) < 5e-3);
        }
        auto est = estimate_asymptotic_velocity(tr, 1e-3);
        CHECK(est.value.x() == doctest::Approx(omega_V_from_trajectory(m, V0, vI)).epsilon(1e-3));
    }
}

TEST_CASE("barrier oracle and omega_V") {
    CHECK(barrier_trajectory_oracle(1.0, 0.5, 1.0, 2.0, 0.25) == doctest::Approx(0.5));
    CHECK(barrier_trajectory_oracle(1.0, 0.5, 1.0, 2.0, 1.0) == doctest::Approx(1 + 0.5 * std::sqrt(5.0)));
    CHECK(barrier_trajectory_oracle(1.0, 0.5, 1.0, 0.0, 7.0) == 0.0);
    CHECK(barrier_trajectory_oracle(1.0, 0.5, 1.0, -2.0, 1.0) == doctest::Approx(-(1 + 0.5 * std::sqrt(5.0))));
    CHECK(barrier_trajectory_oracle<float>(1.f, 0.5f, 1.f, 2.f, 1.f) == doctest::Approx(2.118034f));

    CHECK(omega_V_barrier(1, 0.5, 0) == 0);
    CHECK(omega_V_barrier(1, 0.5, 1) == doctest::Approx(2));
    CHECK(omega_V_barrier(1, 0.5, -1) == doctest::Approx(-2));
    CHECK(omega_V_from_trajectory(1, 0.5, 2) == doctest::Approx(std::sqrt(5.0)));
    // discontinuity of omega_V at v_I = 0
    CHECK(omega_V_barrier(1, 0.5, 1e-12) == doctest::Approx(1.0));
    CHECK(omega_V_from_trajectory(1, 0.5, -1e-12) == doctest::Approx(-1.0));
}

TEST_CASE("asymptotic boundary conditions") {
    std::vector<double> ts = numerics::geometric_grid(1e2, 1e6, 1.25);
    auto fast = solve_asymptotic_boundary_condition(1, 0.5, 1, 3.0, ts);
    CHECK_FALSE(fast.degenerate);
    CHECK(std::abs(fast.v_I_limit - std::sqrt(8.0)) < 1e-6);
    for (std::size_t i = 0; i < ts.size(); ++i)
        CHECK(barrier_trajectory_oracle(1.0, 0.5, 1.0, fast.v_I_of_t[i], ts[i]) ==
              doctest::Approx(3.0 * ts[i]).epsilon(1e-12));

    auto slow = solve_asymptotic_boundary_condition(1, 0.5, 1, 0.5, ts);
    CHECK(slow.degenerate);
    REQUIRE(slow.decay_exponent.has_value());
    CHECK(std::abs(*slow.decay_exponent + 1) < 0.05);
    CHECK(slow.v_I_limit == 0.0);
    for (std::size_t i = ts.size() / 2; i < ts.size(); ++i) {
        const double approx = 1.0 / (ts[i] * (1 - 0.5) + 1);
        CHECK(slow.v_I_of_t[i] == doctest::Approx(approx).epsilon(1e-3));
    }

    auto neg = solve_asymptotic_boundary_condition(1, 0.5, 1, -3.0, ts);
    CHECK(neg.v_I_limit == doctest::Approx(-std::sqrt(8.0)).epsilon(1e-9));

    auto zero = solve_asymptotic_boundary_condition(1, 0.5, 1, 0.0, ts);
    CHECK(zero.v_I_limit == 0.0);
}

TEST_CASE("Delta_C for the barrier") {
    auto dc = delta_C_barrier(1, 0.5);
    CHECK(dc.contains(1.5));
    CHECK(dc.contains(0.0));
    CHECK(dc.contains(-1.01));
    CHECK_FALSE(dc.contains(0.5));
    CHECK_FALSE(dc.contains(-1.0));
    // every trajectory velocity lies in Delta_C
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 1000; ++i) CHECK(dc.contains(omega_V_from_trajectory(1, 0.5, u(rng))));
}

TEST_CASE("two-body symmetry and energy conservation") {
    SystemSpec sys;
    sys.masses = {1.0, 1.0};
    sys.pairs = {{0, 1, PotentialSpec::soft_coulomb(1.0, 0.2)}};
    Eigen::VectorXd v(6);
    v << 0.8, 0.1, 0, -0.8, -0.1, 0;
    auto run = integrate_nbigbang(sys, v, 200.0, 2.5e-4);
    CHECK(run.energy_drift < 1e-6);
    auto w = estimate_asymptotic_velocity(run.bigbang, 1e-3);
    CHECK((w.head<3>() + w.tail<3>()).norm() < 1e-9);
}

TEST_CASE("Galilean covariance with pair interactions") {
    SystemSpec sys;
    sys.masses = {1.0, 2.0};
    sys.pairs = {{0, 1, PotentialSpec::gaussian(1.0, 0.5)}};
    Eigen::VectorXd v(6);
    v << 1.0, 0.2, 0, -0.5, 0, 0.1;
    const Vec3 u(0.3, -0.7, 0.2);
    Eigen::VectorXd vb = v;
    vb.segment<3>(0) += u;
    vb.segment<3>(3) += u;
    auto base = integrate_nbigbang(sys, v, 50.0, 1e-3);
    auto boosted = integrate_nbigbang(sys, vb, 50.0, 1e-3);
    auto moved = apply_transform(transforms::boost(-u), base.bigbang);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = moved.trajectories()[i];
        const auto& b = boosted.bigbang.trajectories()[i];
        REQUIRE(a.size() == b.size());
        CHECK((a.positions() - b.positions()).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("classical N-bigbangs are asymptotically regular") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const std::vector<PotentialSpec> catalog{PotentialSpec::zero(), PotentialSpec::square_barrier(0.5, 1.0, 1e-2),
                                             PotentialSpec::gaussian(0.8, 0.6), PotentialSpec::soft_coulomb(0.5, 0.3),
                                             PotentialSpec::gaussian(-0.3, 0.8)};
    for (const auto& pot : catalog) {
        for (int trial = 0; trial < 3; ++trial) {
            SystemSpec sys;
            sys.masses = {1.0, 1.5};
            sys.external = {pot, pot};
            sys.pairs = {{0, 1, PotentialSpec::soft_coulomb(0.3, 0.3)}};
            Eigen::VectorXd v(6);
            for (int k = 0; k < 6; ++k) v(k) = u(rng);
            auto run = integrate_nbigbang(sys, v, 1000.0, 1e-3);
            for (const auto& tr : run.bigbang.trajectories()) {
                // Slow particles still feel the 1/r pair tail, so convergence is
                // judged by shrinking successive window differences.
                auto est = estimate_asymptotic_velocity(tr, 2e-2);
                CHECK(est.converged);
                REQUIRE(est.decades.size() == 3);
                const double d01 = (est.decades[0].value - est.decades[1].value).norm();
                const double d12 = (est.decades[1].value - est.decades[2].value).norm();
                CHECK(d01 < d12);
            }
        }
    }
}

TEST_CASE("integration failures") {
    SystemSpec sys;
    sys.masses = {1.0, 1.0};
    sys.pairs = {{0, 1, PotentialSpec::central_repulsive_power(1.0, 12.0)}};
    Eigen::VectorXd v(6);
    v << 1, 0, 0, -1, 0, 0;
    CHECK_THROWS_AS(integrate_nbigbang(sys, v, 10.0, 1e-3), ParticleOverlap);

    SystemSpec stiff = single(PotentialSpec::gaussian(50.0, 0.05));
    IntegrationOptions opts;
    opts.origin.x = Vec3(-1, 0.01, 0);
    CHECK_THROWS_AS(integrate_nbigbang(stiff, Eigen::Vector3d(20, 0, 0), 1.0, 0.05, opts), StepUnstable);

    SystemSpec bad;
    bad.masses = {-1};
    CHECK_THROWS_AS(integrate_nbigbang(bad, Eigen::Vector3d(1, 0, 0), 1, 0.1), ConfigError);
}

TEST_CASE("deflection integrator agrees with quadrature") {
    const auto pot = PotentialSpec::central_repulsive_power(1.0, 12.0);
    for (double s : {0.0, 0.1, 0.5, 0.9, 1.0, 1.2}) {
        CHECK(deflection_angle(pot, 1.0, 1.0, s) == doctest::Approx(deflection_quadrature(pot, 1.0, s)).epsilon(1e-7));
    }
    const auto g = PotentialSpec::gaussian(2.0, 0.5);
    for (double s : {0.2, 0.6, 1.0})
        CHECK(deflection_angle(g, 1.0, 1.0, s) == doctest::Approx(deflection_quadrature(g, 1.0, s)).epsilon(1e-6));
}

TEST_CASE("cross-section of a steep power potential") {
    const auto pot = PotentialSpec::central_repulsive_power(1.0, 12.0);
    // Close to the hard-sphere value R^2/4 (R = (k/E)^(1/n) = 1) at intermediate
    // angles; the soft tail diverges forward and backward tends to ~0.81 R^2/4.
    std::vector<double> theta = numerics::linspace(1.55, 2.05, 11);
    auto res = classical_cross_section(pot, 1.0, nullptr, theta);
    const double hard_sphere = 0.25;
    for (double s : res.sigma) CHECK(std::abs(s / hard_sphere - 1) < 0.1);
    auto back = classical_cross_section(pot, 1.0, nullptr, std::vector<double>{3.1});
    CHECK(back.sigma[0] / hard_sphere == doctest::Approx(0.81).epsilon(0.01));

    // rho_I = 0 gives sigma = 0
    auto none = classical_cross_section(pot, 1.0, [](double) { return 0.0; }, theta);
    for (double s : none.sigma) CHECK(s == 0.0);

    // particle-count conservation: 2 pi int sigma sin dTheta = pi (s(a)^2 - s(b)^2)
    auto fine = classical_cross_section(pot, 1.0, nullptr, numerics::linspace(0.3, 2.9, 2001));
    double integral = 0;
    for (std::size_t i = 0; i + 1 < fine.theta_grid.size(); ++i) {
        const double h = fine.theta_grid[i + 1] - fine.theta_grid[i];
        integral += 0.5 * h *
                    (fine.sigma[i] * std::sin(fine.theta_grid[i]) + fine.sigma[i + 1] * std::sin(fine.theta_grid[i + 1]));
    }
    integral *= 2 * std::numbers::pi;
    const double area = std::numbers::pi * (std::pow(fine.s_of_theta.front(), 2) - std::pow(fine.s_of_theta.back(), 2));
    CHECK(integral == doctest::Approx(area).epsilon(1e-5));
}

TEST_CASE("cross-section against a Monte Carlo histogram") {
    const auto pot = PotentialSpec::central_repulsive_power(1.0, 12.0);
    // Oracle deflection table from quadrature, sampled on a fine grid.
    const double s_max = 1.3;
    std::vector<double> s_tab = numerics::linspace(0, s_max, 4001), th_tab;
    for (double s : s_tab) th_tab.push_back(deflection_quadrature(pot, 1.0, s));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0, 1);
    const int n_samples = 200000;
    const std::vector<double> edges = numerics::linspace(0.5, 2.7, 12);
    std::vector<double> counts(edges.size() - 1, 0.0);
    for (int i = 0; i < n_samples; ++i) {
        const double s = s_max * std::sqrt(u01(rng));
        const double th = numerics::interp_linear(s_tab, th_tab, s);
        for (std::size_t b = 0; b + 1 < edges.size(); ++b)
            if (th >= edges[b] && th < edges[b + 1]) counts[b] += 1;
    }
    CrossSectionOptions opts;
    opts.s_max = s_max;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        auto res = classical_cross_section(pot, 1.0, nullptr, numerics::linspace(edges[b], edges[b + 1], 41), opts);
        double integral = 0;
        for (std::size_t i = 0; i + 1 < res.theta_grid.size(); ++i) {
            const double h = res.theta_grid[i + 1] - res.theta_grid[i];
            integral += 0.5 * h * (res.sigma[i] * std::sin(res.theta_grid[i]) +
                                   res.sigma[i + 1] * std::sin(res.theta_grid[i + 1]));
        }
        const double expected = n_samples * 2 * std::numbers::pi * integral / (std::numbers::pi * s_max * s_max);
        CHECK(std::abs(counts[b] - expected) < 3 * std::sqrt(expected));
    }
}

TEST_CASE("reverse emission density") {
    const auto pot = PotentialSpec::central_repulsive_power(1.0, 12.0);
    const double z0 = -100;
    auto uniform = [](double) { return 1.0 / (4 * std::numbers::pi); };
    auto em = reverse_emission_density(pot, 1.0, uniform, z0, 0.05, 1.1);
    std::vector<double> theta = numerics::linspace(0.5, 2.8, 30);
    CrossSectionOptions opts;
    opts.s_max = 1.1;
    opts.s_min = 0.05;
    auto back = classical_cross_section(pot, 1.0, [&](double s) { return em.rho_I_at(s); }, theta, opts);
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(std::abs(back.rho_S[i] / uniform(theta[i]) - 1) < 0.02);
    CHECK(em.emission_angle.back() == doctest::Approx(1.1 / 100));

    // forward-peaked target: emission concentrated at impact parameters that scatter forward
    auto bump = [](double th) { return std::exp(-std::pow((th - 0.3) / 0.1, 2)); };
    auto em2 = reverse_emission_density(pot, 1.0, bump, z0, 0.05, 1.3);
    const auto it = std::max_element(em2.rho_I.begin(), em2.rho_I.end());
    const double th_peak = em2.theta_s[static_cast<std::size_t>(it - em2.rho_I.begin())];
    CHECK(std::abs(th_peak - 0.3) < 0.1);

    CHECK_THROWS_AS(reverse_emission_density(PotentialSpec::zero(), 1.0, uniform, z0, 0.1, 1), NonMonotoneDeflection);
    CHECK_THROWS_AS(classical_cross_section(PotentialSpec::zero(), 1.0, nullptr, theta), NonMonotoneDeflection);

    CrossSectionOptions wide;
    wide.s_max = 2.0;
    CHECK_THROWS_AS(classical_cross_section(PotentialSpec::gaussian(-1.0, 0.5), 1.0, nullptr, theta, wide),
                    NonMonotoneDeflection);
}
