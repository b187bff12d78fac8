#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "aml/errors.hpp"
#include "aml/quantum.hpp"

using namespace aml;

namespace {

constexpr double pi = std::numbers::pi;

// Free evolution of the normalised-to-unit-integral Gaussian, closed form.
cplx gaussian_exact(double m, double sigma, double x, double t) {
    const cplx z(1.0, t / (m * sigma * sigma));
    return std::pow(2.0 * pi * sigma * sigma, -0.5) / std::sqrt(z) * std::exp(-x * x / (2.0 * sigma * sigma * z));
}

// Large-t mass of the source in velocity box (lo, hi]: int_{m lo}^{m hi} exp(-sigma^2 p^2) dp / 2pi.
double free_limit(double m, double sigma, double lo, double hi) {
    return (1.0 / (2.0 * pi)) * std::sqrt(pi) / (2.0 * sigma) * (std::erf(sigma * m * hi) - std::erf(sigma * m * lo));
}

// Rectangular barrier of height V0 and width w.
double transmission(double m, double V0, double w, double k) {
    const double E = k * k / (2.0 * m);
    if (E < V0) {
        const double kappa = std::sqrt(2.0 * m * (V0 - E));
        return 1.0 / (1.0 + V0 * V0 * std::pow(std::sinh(kappa * w), 2) / (4.0 * E * (V0 - E)));
    }
    const double q = std::sqrt(2.0 * m * (E - V0));
    if (q == 0.0) return 1.0 / (1.0 + m * V0 * w * w / 2.0);
    return 1.0 / (1.0 + V0 * V0 * std::pow(std::sin(q * w), 2) / (4.0 * E * (E - V0)));
}

GridSpec grid1(int n, double L) { return GridSpec{1, n, L, 1.0}; }

PointSourceSpec source1(double sigma, double x0 = 0.0) {
    PointSourceSpec s;
    s.x0 = Eigen::VectorXd::Constant(1, x0);
    s.sigma = sigma;
    return s;
}

}  // namespace

TEST_CASE("free gaussian matches the closed form") {
    const double sigma = 0.5, t = 1.0;
    GridState g = make_point_source(source1(sigma), grid1(1024, 20.0));
    g = evolve(g, QuantumPotential{}, t, 0.01);
    double err = 0.0, peak = 0.0;
    for (int j = 0; j < g.n; ++j) {
        const cplx ex = gaussian_exact(1.0, sigma, g.x(j), t);
        err = std::max(err, std::abs(g.psi[j] - ex));
        peak = std::max(peak, std::abs(ex));
    }
    CHECK(err / peak < 1e-6);
    CHECK(g.t == t);
}

TEST_CASE("split-step evolution is unitary and parity symmetric") {
    GridState g = make_point_source(source1(0.25), grid1(2048, 40.0));
    const double n0 = g.norm();
    const QuantumPotential barrier(PotentialSpec::square_barrier(0.5, 1.0));
    g = evolve(g, barrier, 2.0, 0.005);
    CHECK(std::abs(g.norm() - n0) / n0 < 1e-10);

    const double t = g.t;
    const double right = region_mass(g, IntervalBox::interval(0.3 * t, 1.1 * t));
    const double left = region_mass(g, IntervalBox::interval(-1.1 * t, -0.3 * t));
    CHECK(std::abs(right - left) < 1e-12 * n0);

    // Full window carries the whole norm; halves add up.
    CHECK(region_mass(g, IntervalBox::interval(-g.L - g.dx(), g.L + g.dx())) == doctest::Approx(g.norm()).epsilon(1e-12));
    const double whole = region_mass(g, IntervalBox::interval(0.1 * t, 0.9 * t));
    const double a = region_mass(g, IntervalBox::interval(0.1 * t, 0.437 * t));
    const double b = region_mass(g, IntervalBox::interval(0.437 * t, 0.9 * t));
    CHECK(std::abs(whole - a - b) < 1e-13);
}

TEST_CASE("tunneling probability matches the transfer-matrix transmission") {
    const int n = 8192;
    const double L = 200.0;
    GridState g = GridState::zeros(1, n, L, 1.0);
    const double a = 10.5 * g.dx();  // barrier edges fall midway between grid points
    const double s = 5.0, x0 = -40.0, k0 = 1.0, V0 = 1.0;
    for (int j = 0; j < n; ++j) {
        const double x = g.x(j);
        g.psi[j] = std::pow(2.0 * pi * s * s, -0.25) * std::exp(-std::pow(x - x0, 2) / (4.0 * s * s)) *
                   std::polar(1.0, k0 * x);
    }
    g = evolve(g, QuantumPotential(PotentialSpec::square_barrier(V0, a)), 80.0, 0.01);
    const double transmitted = region_mass(g, IntervalBox::interval(a, L));

    // int |phi(k)|^2 T(k) dk with |phi|^2 = sqrt(2 s^2 / pi) exp(-2 s^2 (k - k0)^2).
    const int N = 4000;
    const double k_lo = k0 - 1.0, h = 2.0 / N;
    double expect = 0.0;
    for (int i = 0; i <= N; ++i) {
        const double k = k_lo + i * h;
        const double wgt = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        expect += wgt * std::sqrt(2.0 * s * s / pi) * std::exp(-2.0 * s * s * (k - k0) * (k - k0)) *
                  transmission(1.0, V0, 2.0 * a, k);
    }
    expect *= h / 3.0;
    CHECK(transmitted > 0.1);
    CHECK(std::abs(transmitted - expect) / expect < 1e-2);
}

TEST_CASE("cone masses approach the momentum distribution") {
    const double sigma = 0.2;
    const GridState g = make_point_source(source1(sigma), grid1(4096, 102.4));
    const std::vector<IntervalBox> boxes{IntervalBox::interval(0.0, 1.0), IntervalBox::interval(-2.5, -0.5),
                                         IntervalBox::interval(1.0, 3.0)};
    const double t = 50.0 * 2.0 * sigma * sigma;
    for (const auto& row : quantum_asymptotic_velocity_check(g, boxes, t)) {
        CHECK(row.relative_difference < 1e-2);
        // Momentum quadrature against the closed form.
        CHECK(row.momentum_mass == doctest::Approx(free_limit(1.0, sigma, row.box.lo()[0], row.box.hi()[0])).epsilon(1e-4));
    }
}

TEST_CASE("boost shifts the velocity distribution") {
    const double sigma = 0.1, v0 = 1.5, t = 0.3;
    const GridState g = make_point_source(source1(sigma), grid1(4096, 25.6));
    const GridState boosted = boost_state(g, Eigen::VectorXd::Constant(1, v0));
    const GridState a = evolve(g, QuantumPotential{}, t, t);
    const GridState b = evolve(boosted, QuantumPotential{}, t, t);
    for (double lo : {-1.0, 0.0, 1.0, 2.0}) {
        const IntervalBox box = IntervalBox::interval(lo, lo + 1.0);
        const double shifted = region_mass(b, box.scaled(t));
        const double plain = region_mass(a, box.translated(Eigen::VectorXd::Constant(1, -v0)).scaled(t));
        CHECK(std::abs(shifted - plain) / plain < 1e-2);
    }
}

TEST_CASE("free quantum measure tends to Lebesgue measure over 2 pi") {
    const double sigma = 0.05;
    const std::vector<IntervalBox> boxes{IntervalBox::interval(0.0, 1.0), IntervalBox::interval(-1.0, -0.25),
                                         IntervalBox::interval(0.5, 0.75)};
    const std::vector<double> ts{0.075, 0.15, 0.3};
    const GridMeasure gm = asymptotic_quantum_measure(source1(sigma), QuantumPotential{}, boxes, ts, 0.01,
                                                      grid1(4096, 25.6));
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        const double lo = boxes[b].lo()[0], hi = boxes[b].hi()[0];
        CHECK(gm.limit[b] == doctest::Approx(free_limit(1.0, sigma, lo, hi)).epsilon(2e-3));
        CHECK(gm.limit[b] == doctest::Approx((hi - lo) / (2.0 * pi)).epsilon(5e-3));
        CHECK(gm.last_decade_delta[b] >= 0.0);
    }
}

TEST_CASE("source translation leaves the limit unchanged") {
    const std::vector<IntervalBox> boxes{IntervalBox::interval(0.0, 1.0)};
    const std::vector<double> ts{0.03, 0.1, 0.3};
    const GridMeasure a = asymptotic_quantum_measure(source1(0.05), QuantumPotential{}, boxes, ts, 0.01,
                                                     grid1(4096, 25.6));
    const GridMeasure b = asymptotic_quantum_measure(source1(0.05, 0.02), QuantumPotential{}, boxes, ts, 0.01,
                                                     grid1(4096, 25.6));
    std::vector<double> diff;
    for (std::size_t k = 0; k < ts.size(); ++k) diff.push_back(std::abs(a.mass[k][0] - b.mass[k][0]));
    CHECK(diff[1] < diff[0]);
    CHECK(diff[2] < diff[1]);
    CHECK(diff[2] / a.limit[0] < 0.02);
}

TEST_CASE("two-dimensional source factorises") {
    GridSpec g2{2, 256, 12.8, 1.0};
    PointSourceSpec s;
    s.x0 = Eigen::Vector2d(0.0, 0.0);
    s.sigma = 0.4;
    GridState g = make_point_source(s, g2);
    GridState h = make_point_source(source1(0.4), grid1(256, 12.8));
    const double t = 1.0;
    g = evolve(g, QuantumPotential{}, t, t);
    h = evolve(h, QuantumPotential{}, t, t);
    const IntervalBox bx(Eigen::Vector2d(0.2, -1.0), Eigen::Vector2d(1.5, 0.4));
    const double m2 = region_mass(g, bx);
    const double m1 = region_mass(h, IntervalBox::interval(0.2, 1.5)) * region_mass(h, IntervalBox::interval(-1.0, 0.4));
    CHECK(m2 == doctest::Approx(m1).epsilon(1e-10));
    CHECK(momentum_mass(g, bx) == doctest::Approx(momentum_mass(h, IntervalBox::interval(0.2, 1.5)) *
                                                  momentum_mass(h, IntervalBox::interval(-1.0, 0.4)))
                                      .epsilon(1e-10));
}

TEST_CASE("pair potential on the 2D grid is exchange symmetric") {
    GridSpec g2{2, 128, 12.8, 1.0};
    PointSourceSpec s;
    s.x0 = Eigen::Vector2d(0.0, 0.0);
    s.sigma = 0.8;
    GridState g = make_point_source(s, g2);
    const double n0 = g.norm();
    g = evolve(g, QuantumPotential(PotentialSpec::gaussian(2.0, 0.7), true), 1.5, 0.01);
    CHECK(std::abs(g.norm() - n0) / n0 < 1e-10);
    const IntervalBox box(Eigen::Vector2d(0.5, -2.0), Eigen::Vector2d(2.5, 0.0));
    const IntervalBox swapped(Eigen::Vector2d(-2.0, 0.5), Eigen::Vector2d(0.0, 2.5));
    CHECK(region_mass(g, box) == doctest::Approx(region_mass(g, swapped)).epsilon(1e-9));
    CHECK_THROWS_AS(evolve(make_point_source(source1(0.4), grid1(256, 12.8)),
                           QuantumPotential(PotentialSpec::gaussian(1.0, 1.0), true), 1.0, 0.1),
                    ConfigError);
}

TEST_CASE("grid and box failures") {
    const GridState g = make_point_source(source1(0.2), grid1(512, 10.0));
    try {
        (void)evolve(g, QuantumPotential{}, 5.0, 0.1);
        FAIL("expected GridTooSmall");
    } catch (const GridTooSmall& e) {
        CHECK(e.time() == 5.0);
        CHECK(e.exit_code() == 3);
    }
    EvolveOptions absorb;
    absorb.absorber = true;
    const GridState damped = evolve(g, QuantumPotential{}, 5.0, 0.05, absorb);
    CHECK(damped.norm() < g.norm());

    const std::vector<IntervalBox> tiny{IntervalBox::interval(0.0, 1e-3)};
    const std::vector<double> ts{0.1};
    CHECK_THROWS_AS(asymptotic_quantum_measure(source1(0.2), QuantumPotential{}, tiny, ts, 0.01, grid1(512, 10.0)),
                    BoxUnresolvable);
    CHECK_THROWS_AS(make_point_source(source1(0.01), grid1(512, 10.0)), ConfigError);
}

TEST_CASE("mapped regions and the AET sandwich") {
    const std::vector<double> ts{1.0, 2.0, 5.0, 10.0, 20.0, 40.0};
    const GridState init = make_point_source(source1(0.5), grid1(8192, 400.0));
    const Snapshots snaps = propagate_snapshots(init, QuantumPotential{}, ts, 0.05);
    const IntervalBox I = IntervalBox::interval(-1.0, 1.0);

    const double direct = snaps.cone_mass(3, I);
    CHECK(mapped_region_mass(snaps.states()[3], identity_transform(), I) ==
          doctest::Approx(direct).epsilon(1e-3));

    const std::vector<double> eps{0.2, 0.3};
    const auto rep = aet_invariance_check(snaps, transforms::log_drift(0.5), I, eps);
    CHECK(rep.kind == TransformClass::AsymptoticallyIdentical);
    for (const auto& e : rep.by_epsilon) {
        REQUIRE(e.t0.has_value());
        CHECK(*e.t0 <= 5.0);
        for (const auto& r : e.rows)
            if (r.t >= 5.0) CHECK(r.holds);
    }
    CHECK(rep.final_relative_gap < 0.05);
    CHECK_FALSE(rep.violation);

    const auto boost = transforms::boost(Vec3(0.5, 0.0, 0.0));
    CHECK_THROWS_AS(aet_invariance_check(snaps, boost, I, eps), NotAsymptoticallyIdentical);
    AetCheckOptions loose;
    loose.require_identical = false;
    const auto neg = aet_invariance_check(snaps, boost, I, eps, loose);
    CHECK(neg.kind == TransformClass::AsymptoticallyEuclidean);
    CHECK(neg.violation);
}

TEST_CASE("semiclassical densities") {
    std::vector<double> xs;
    for (int i = -20; i <= 20; ++i) xs.push_back(0.37 * i);
    const auto d = semiclassical_density_compare(2.0, 1.3, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(d.rho_C[i] == doctest::Approx(2.0 / (2.0 * pi * 1.3)).epsilon(1e-14));
        CHECK(std::abs(d.interference[i]) < 1e-10 * d.rho_C[i]);
    }
    for (double x : xs) {
        const double direct = two_source_interference(1.0, 0.8, x, -0.4, 0.7);
        CHECK(std::abs(direct - semiclassical_cross_term(1.0, 0.8, x, -0.4, 0.7)) < 1e-8);
    }
    // The cross term does not vanish in general.
    CHECK(std::abs(two_source_interference(1.0, 0.8, 0.3, -0.4, 0.7)) > 1e-3);
}
