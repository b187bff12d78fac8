#include "aml/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>

#include "aml/classical.hpp"
#include "aml/errors.hpp"
#include "aml/geometry.hpp"
#include "aml/measures.hpp"
#include "aml/numerics.hpp"
#include "aml/probability.hpp"
#include "aml/quantum.hpp"

namespace aml::acceptance {

namespace {

constexpr double pi = std::numbers::pi;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

IntervalBox iv(double lo, double hi) { return IntervalBox::interval(lo, hi); }

PointSourceSpec source1(double sigma) {
    PointSourceSpec s;
    s.x0 = Eigen::VectorXd::Zero(1);
    s.sigma = sigma;
    return s;
}

double trapezoid_sigma_sin(const CrossSectionResult& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < r.theta_grid.size(); ++i) {
        const double h = r.theta_grid[i + 1] - r.theta_grid[i];
        acc += 0.5 * h * (r.sigma[i] * std::sin(r.theta_grid[i]) + r.sigma[i + 1] * std::sin(r.theta_grid[i + 1]));
    }
    return acc;
}

// 1. Built-in example trajectories 1a, 1b and 1c.
Outcome asymptotic_velocity_examples(const SuiteOptions&) {
    Outcome o;
    const Vec3 v(1, 0, 0), x0(1, 1, 1), a(1, 1, 1);
    const auto ta = SampledTrajectory::sample([&](double t) -> Vec3 { return v * t + x0 * std::sin(3.0 * t); }, 1.0, 1e4);
    const auto ea = estimate_asymptotic_velocity(ta, 1e-3);
    o.require((ea.value - v).norm() < 1e-3, "1a estimate");
    o.note(fmt("1a error %.2e", (ea.value - v).norm()));

    const auto tb = SampledTrajectory::sample([&](double t) -> Vec3 { return a * std::sqrt(t); }, 1.0, 1e6);
    const auto eb = estimate_asymptotic_velocity(tb, 2e-3);
    o.require(eb.value.norm() < 2e-3, "1b estimate");
    o.note(fmt("1b |v| %.2e", eb.value.norm()));

    const auto tc = SampledTrajectory::sample([&](double t) -> Vec3 { return v * t * std::sin(2.0 * t); }, 1.0, 1e4);
    bool rejected = false;
    try {
        estimate_asymptotic_velocity(tc, 1e-3);
    } catch (const NotConverged&) {
        rejected = true;
    }
    o.require(rejected, "1c must be NotConverged");
    o.note(rejected ? "1c NotConverged" : "1c converged");
    return o;
}

// 2. Composition, inverse and classification over the transform catalog.
Outcome transform_algebra(const SuiteOptions&) {
    Outcome o;
    const auto probes = default_probe_velocities();
    const Mat3 R = Eigen::AngleAxisd(1.1, Vec3(1, 2, 2).normalized()).toRotationMatrix();
    const Vec3 v0(0.3, -0.1, 0.2);
    const std::vector<CausalTransform> regular{transforms::galilean(R, v0), transforms::scale(2.0),
                                               transforms::log_drift(0.5), transforms::swirl(0.7)};
    double comp_err = 0.0, inv_err = 0.0;
    for (const auto& g : regular)
        for (const auto& f : regular) {
            const auto gf = compose(g, f);
            for (const auto& v : probes) {
                const Vec3 expect = (*g.analytic_plus)((*f.analytic_plus)(v));
                comp_err = std::max(comp_err, (estimate_asymptotic_transform(gf, v, 1e-3).value - expect).norm());
            }
        }
    for (const auto& f : regular)
        for (const auto& v : probes) {
            const Vec3 fv = (*f.analytic_plus)(v);
            inv_err = std::max(inv_err, (estimate_asymptotic_transform(inverse(f), fv, 1e-3).value - v).norm());
        }
    // shear_over_t composes with everything; its image is the zero velocity.
    const auto shear = transforms::shear_over_t();
    for (const auto& g : regular)
        for (const auto& v : probes) {
            const Vec3 expect = (*g.analytic_plus)(Vec3::Zero());
            comp_err = std::max(comp_err,
                                (estimate_asymptotic_transform(compose(g, shear), v, 1e-3).value - expect).norm());
        }
    o.require(comp_err < 1e-3, "composition");
    o.require(inv_err < 1e-3, "inverse");
    o.note(fmt("composition %.1e inverse %.1e", comp_err, inv_err));

    const auto gal = classify_transform(transforms::galilean(R, v0), probes, 1e-6);
    const double r_err = (gal.rotation - R).cwiseAbs().maxCoeff();
    const double v_err = (gal.v0 - v0).cwiseAbs().maxCoeff();
    o.require(gal.kind == TransformClass::AsymptoticallyEuclidean && gal.used_analytic, "galilean class");
    o.require(r_err < 1e-6 && v_err < 1e-6, "galilean fit");
    o.note(fmt("galilean R %.1e v0 %.1e", r_err, v_err));

    const auto expect_class = [&](const CausalTransform& f, TransformClass k, const char* name) {
        const auto c = classify_transform(f, probes, 1e-3, false);
        o.require(c.kind == k, std::string("class of ") + name);
    };
    expect_class(transforms::scale(2.0), TransformClass::AsymptoticallyIdentical, "scale");
    expect_class(transforms::log_drift(0.5), TransformClass::AsymptoticallyIdentical, "log_drift");
    expect_class(transforms::swirl(0.7), TransformClass::AsymptoticallyEuclidean, "swirl");
    expect_class(transforms::galilean(R, v0), TransformClass::AsymptoticallyEuclidean, "galilean (estimated)");
    expect_class(shear, TransformClass::Other, "shear_over_t");
    return o;
}

// 3. Barrier trajectories and asymptotic boundary conditions.
Outcome barrier_oracle(const SuiteOptions&) {
    Outcome o;
    const double m = 1, V0 = 0.5, a = 1;
    const auto pot = PotentialSpec::square_barrier(V0, a);
    SystemSpec sys;
    sys.masses = {m};
    sys.external = {pot};
    double worst = 0.0;
    for (double vI : {2.0, 0.7, -1.3}) {
        const auto run = integrate_nbigbang(sys, Eigen::Vector3d(vI, 0, 0), 20.0, 2e-5);
        const auto& tr = run.bigbang.trajectories()[0];
        for (Eigen::Index k = 0; k < tr.size(); ++k) {
            const double t = tr.times()[static_cast<std::size_t>(k)];
            const double x = tr.position(k).x();
            if (std::abs(x) <= a + pot.smoothing) continue;
            worst = std::max(worst, std::abs(x - barrier_trajectory_oracle(m, V0, a, vI, t)));
        }
    }
    o.require(worst < 5e-3, "trajectory error");
    o.note(fmt("trajectory error %.2e", worst));

    const auto ts = numerics::geometric_grid(1e2, 1e6, 1.25);
    const auto fast = solve_asymptotic_boundary_condition(m, V0, a, 3.0, ts);
    const double root_err = std::abs(fast.v_I_limit - std::sqrt(8.0));
    o.require(!fast.degenerate && root_err < 1e-6, "v = 3 limit");
    o.note(fmt("v_I(3) - sqrt 8 = %.1e", root_err));

    const auto slow = solve_asymptotic_boundary_condition(m, V0, a, 0.5, ts);
    o.require(slow.degenerate && slow.decay_exponent && std::abs(*slow.decay_exponent + 1.0) < 0.05, "1/t decay");
    if (slow.decay_exponent) o.note(fmt("decay exponent %.4f", *slow.decay_exponent));
    return o;
}

// 4. Free quantum measure and the boost rule.
Outcome free_quantum_measure(const SuiteOptions&) {
    Outcome o;
    const std::vector<IntervalBox> boxes{iv(0.0, 1.0), iv(-1.0, -0.25), iv(0.5, 0.75)};
    double final_err = 0.0;
    for (double sigma : {0.2, 0.1, 0.05}) {
        // The grid and times scale with sigma so that every rung is equally resolved.
        const double k = sigma / 0.05;
        const std::vector<double> ts{30 * sigma * sigma, 60 * sigma * sigma, 120 * sigma * sigma};
        const auto gm = asymptotic_quantum_measure(source1(sigma), QuantumPotential{}, boxes, ts, 0.01,
                                                   GridSpec{1, 4096, 25.6 * k, 1.0});
        double err = 0.0;
        for (std::size_t b = 1; b < boxes.size(); ++b) {
            const double ratio = gm.limit[b] / gm.limit[0];
            const double lebesgue = (boxes[b].hi()[0] - boxes[b].lo()[0]) / (boxes[0].hi()[0] - boxes[0].lo()[0]);
            err = std::max(err, std::abs(ratio / lebesgue - 1.0));
        }
        o.note(fmt("sigma %.2f ratio error %.2e", sigma, err));
        final_err = err;
    }
    o.require(final_err < 0.02, "ratio error at the smallest sigma");

    const double sigma = 0.1, v0 = 1.5, t = 0.3;
    const GridState g = make_point_source(source1(sigma), GridSpec{1, 4096, 25.6, 1.0});
    const GridState a = evolve(g, QuantumPotential{}, t, t);
    const GridState b = evolve(boost_state(g, Eigen::VectorXd::Constant(1, v0)), QuantumPotential{}, t, t);
    double shift_err = 0.0;
    for (double lo : {-1.0, 0.0, 1.0, 2.0}) {
        const IntervalBox box = iv(lo, lo + 1.0);
        const double shifted = region_mass(b, box.scaled(t));
        const double plain = region_mass(a, box.translated(Eigen::VectorXd::Constant(1, -v0)).scaled(t));
        shift_err = std::max(shift_err, std::abs(shifted - plain) / plain);
    }
    o.require(shift_err < 0.01, "boost shift");
    o.note(fmt("boost shift error %.2e", shift_err));
    return o;
}

// 5. Invariance under an asymptotically identical transform.
Outcome aet_invariance(const SuiteOptions&) {
    Outcome o;
    const std::vector<double> ts{1.0, 2.0, 5.0, 10.0, 20.0, 40.0};
    const GridState init = make_point_source(source1(0.5), GridSpec{1, 8192, 400.0, 1.0});
    const Snapshots snaps = propagate_snapshots(init, QuantumPotential{}, ts, 0.05);
    const IntervalBox I = iv(-1.0, 1.0);
    const std::vector<double> eps{0.2};
    const auto rep = aet_invariance_check(snaps, transforms::log_drift(0.5), I, eps);
    const auto& e = rep.by_epsilon.front();
    o.require(e.t0.has_value(), "sandwich never settles");
    if (e.t0) o.note(fmt("t0 %.3g", *e.t0));
    o.require(rep.final_relative_gap <= 0.05, "relative gap at the largest t");
    o.require(!rep.violation, "log_drift flagged");
    o.note(fmt("relative gap %.2e", rep.final_relative_gap));

    AetCheckOptions loose;
    loose.require_identical = false;
    const auto neg = aet_invariance_check(snaps, transforms::boost(Vec3(0.5, 0, 0)), I, eps, loose);
    o.require(neg.violation, "boost negative control");
    o.note(fmt("boost gap %.2e", neg.final_relative_gap));
    return o;
}

struct BarrierSetup {
    double m = 1.0, V0 = 0.5, a = 1.0, sigma = 0.25;
    std::vector<double> ts{2.5, 5.0, 10.0, 20.0};

    Snapshots propagate() const {
        const auto V = PotentialSpec::square_barrier(V0, a);
        const GridState init = make_point_source(source1(sigma), GridSpec{1, 16384, 320.0, m});
        return propagate_snapshots(init, QuantumPotential(V), ts, 0.005);
    }
};

// 6. Corrected transfer on the barrier.
Outcome corrected_transfer_barrier(const SuiteOptions&) {
    Outcome o;
    const BarrierSetup s;
    const double b = 1.0;
    const Snapshots snaps = s.propagate();
    const IntervalBox box = iv(-b, b);
    const auto rep = corrected_transfer(snapshot_provider(snaps), barrier_flow(s.m, s.V0, s.a), box, s.ts);
    const double edge = std::sqrt(2.0 * s.V0 / s.m + b * b);
    const std::vector<IntervalBox> target{iv(-edge, edge)};
    const auto gm = measure_from_snapshots(snaps, target, s.sigma);
    const double mu = gm.limit[0];
    const std::size_t last = snaps.size() - 1;
    const IntervalMass mass = [&](const IntervalBox& r) { return snaps.cone_mass(last, r); };
    const double naive = naive_transfer(mass, barrier_omega_V(s.m, s.V0), box);
    const double rel = std::abs(rep.value - mu) / mu;
    o.require(rel <= 0.05, "corrected vs mu_Q");
    o.require(rep.value > naive, "corrected must exceed naive");
    o.note(fmt("corrected %.6f mu_Q %.6f rel %.2e naive %.6f", rep.value, mu, rel, naive));
    return o;
}

// 7. Quotient of Lebesgue measure on the plane by translations.
Outcome quotient_strip(const SuiteOptions&) {
    Outcome o;
    const auto lebesgue = DiscreteMeasure::uniform(IntervalBox(Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5)), 10, 1.0);
    GroupActionSpec act;
    act.g_lo = -1.0;
    act.g_hi = 1.0;
    const IntervalBox bs[] = {iv(0.1, 0.8), iv(-2.0, -1.5)};
    const auto q = quotient_measure(lebesgue, act, bs);
    const double err = std::max(std::abs(q.nu.support()[0].mass - 0.7), std::abs(q.nu.support()[1].mass - 0.5));
    o.require(err < 1e-12, "interval length");
    GroupActionSpec wide = act;
    wide.g_hi = 3.0;
    const auto q2 = quotient_measure(lebesgue, wide, bs);
    const double dg = std::abs(q2.nu.support()[0].mass - q.nu.support()[0].mass);
    o.require(q.window_defect < 1e-12 && dg < 1e-12, "Delta_G independence");
    o.note(fmt("length error %.1e window defect %.1e", err, std::max(q.window_defect, dg)));
    return o;
}

// 8. The doubling-map universe.
Outcome bernoulli_universe(const SuiteOptions& opts) {
    Outcome o;
    for (int periods : {1, 10, 333}) {
        const Rational f = relative_frequency(Rational(1, 7), 3 * periods);
        o.require(f == Rational(2, 3), "1/7 frequency over " + std::to_string(3 * periods) + " ticks");
    }
    for (double eps : {0.05, 0.1}) {
        double previous = 2.0;
        for (int n : {100, 1000, 10000}) {
            const auto d = lln_deviation_measure(0.5, n, eps, 20000, opts.seed);
            o.require(d.measure <= d.chebyshev_bound + 3.0 * d.mc_sigma,
                      fmt("Chebyshev at n=%d eps=%.2f", n, eps));
            o.require(d.measure <= previous && !(previous > 0.0 && previous <= 1.0 && d.measure >= previous),
                      fmt("decrease at n=%d eps=%.2f", n, eps));
            o.note(fmt("n=%d eps=%.2f measure %.4f bound %.4f", n, eps, d.measure, d.chebyshev_bound));
            previous = d.measure;
        }
    }
    return o;
}

// 9. Cross-section of a steep power potential against Monte Carlo scattering.
Outcome cross_section_mc(const SuiteOptions& opts) {
    Outcome o;
    const auto pot = PotentialSpec::central_repulsive_power(1.0, 12.0);
    const double s_max = 1.3;
    const long n_samples = 1000000;
    const auto s_tab = numerics::linspace(0.0, s_max, 2001);
    std::vector<double> th_tab;
    for (double s : s_tab) th_tab.push_back(deflection_angle(pot, 1.0, 1.0, s));
    const auto edges = numerics::linspace(0.5, 2.7, 12);
    std::vector<double> counts(edges.size() - 1, 0.0);
    CounterRng rng(opts.seed, 9);
    for (long i = 0; i < n_samples; ++i) {
        const double u = static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
        const double th = numerics::interp_linear(s_tab, th_tab, s_max * std::sqrt(u));
        const auto it = std::upper_bound(edges.begin(), edges.end(), th);
        if (it == edges.begin() || it == edges.end()) continue;
        counts[static_cast<std::size_t>(it - edges.begin() - 1)] += 1.0;
    }
    CrossSectionOptions copts;
    copts.s_max = s_max;
    double worst = 0.0;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const auto res = classical_cross_section(pot, 1.0, nullptr, numerics::linspace(edges[b], edges[b + 1], 41), copts);
        const double expected = n_samples * 2.0 * trapezoid_sigma_sin(res) / (s_max * s_max);
        worst = std::max(worst, std::abs(counts[b] - expected) / std::sqrt(expected));
    }
    o.require(worst < 3.0, "histogram within 3 sigma");
    o.note(fmt("worst bin %.2f sigma", worst));

    const double z0 = -100;
    const auto uniform = [](double) { return 1.0 / (4.0 * pi); };
    const auto em = reverse_emission_density(pot, 1.0, uniform, z0, 0.05, 1.1);
    CrossSectionOptions ropts;
    ropts.s_min = 0.05;
    ropts.s_max = 1.1;
    const auto theta = numerics::linspace(0.5, 2.8, 30);
    const auto back = classical_cross_section(pot, 1.0, [&](double s) { return em.rho_I_at(s); }, theta, ropts);
    double rt = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) rt = std::max(rt, std::abs(back.rho_S[i] * 4.0 * pi - 1.0));
    o.require(rt < 0.02, "reverse emission round trip");
    o.note(fmt("round trip %.2e", rt));
    return o;
}

// 10. Semiclassical densities.
Outcome semiclassical(const SuiteOptions&) {
    Outcome o;
    std::vector<double> xs;
    for (int i = -50; i <= 50; ++i) xs.push_back(0.37 * i);
    double rho_err = 0.0, interference = 0.0;
    for (double m : {0.5, 2.0})
        for (double t : {0.3, 1.3, 7.0}) {
            const auto d = semiclassical_density_compare(m, t, xs);
            const double expect = m / (2.0 * pi * t);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                rho_err = std::max({rho_err, std::abs(d.rho_C[i] / expect - 1.0), std::abs(d.rho_Q[i] / d.rho_C[i] - 1.0)});
                interference = std::max(interference, std::abs(d.interference[i]) / d.rho_C[i]);
            }
        }
    o.require(rho_err < 1e-10, "rho_C vs |K|^2");
    o.require(interference < 1e-10, "interference term");
    double cross = 0.0;
    for (double x : xs) cross = std::max(cross, std::abs(two_source_interference(1.0, 0.8, x, -0.4, 0.7) -
                                                         semiclassical_cross_term(1.0, 0.8, x, -0.4, 0.7)));
    o.require(cross < 1e-8, "two-source cross term");
    o.note(fmt("rho %.1e interference %.1e cross %.1e", rho_err, interference, cross));
    return o;
}

// 11. pi_C / pi_Q / mu_C / mu_Q comparison.
Outcome ncdic_regression(const SuiteOptions&) {
    Outcome o;
    const std::vector<IntervalBox> boxes{iv(-1.0, -0.5), iv(0.0, 0.5), iv(0.25, 0.75), iv(0.5, 1.0)};
    const auto free_snaps = propagate_snapshots(make_point_source(source1(0.05), GridSpec{1, 4096, 25.6, 1.0}),
                                                QuantumPotential{}, std::vector<double>{0.03, 0.1, 0.3}, 0.01);
    double worst = 0.0;
    for (const auto& r : ncdic_report(free_snaps, PotentialSpec::zero(), boxes))
        worst = std::max(worst, std::abs(r.gap) / r.pi_C);
    o.require(worst < 0.02, "free pi_Q vs pi_C");
    o.note(fmt("free worst %.2e", worst));

    const BarrierSetup s;
    const auto V = PotentialSpec::square_barrier(s.V0, s.a);
    const auto rows = ncdic_report(s.propagate(), V, boxes);
    const auto& gap_row = rows[2];  // (0.25, 0.75] lies inside the classical gap sqrt(2 V0 / m) = 1
    o.require(gap_row.mu_C == 0.0, "classical gap mass");
    o.require(gap_row.mu_Q > 0.0, "quantum gap mass");
    o.note(fmt("gap box mu_C %.3g mu_Q %.6e", gap_row.mu_C, gap_row.mu_Q));
    return o;
}

struct Criterion {
    int id;
    const char* module;
    const char* title;
    double budget;
    Outcome (*fn)(const SuiteOptions&);
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "geometry", "asymptotic velocity examples", 1.0, asymptotic_velocity_examples},
        {2, "geometry", "transform algebra", 5.0, transform_algebra},
        {3, "classical", "barrier oracle", 10.0, barrier_oracle},
        {4, "quantum", "free quantum measure", 60.0, free_quantum_measure},
        {5, "quantum", "AET invariance", 120.0, aet_invariance},
        {6, "measures", "corrected transfer", 120.0, corrected_transfer_barrier},
        {7, "measures", "quotient measure", 1.0, quotient_strip},
        {8, "probability", "Bernoulli universe", 10.0, bernoulli_universe},
        {9, "classical", "cross-section", 60.0, cross_section_mc},
        {10, "quantum", "semiclassical comparison", 5.0, semiclassical},
        {11, "measures", "NCDIC regression", 120.0, ncdic_regression},
    };
    return all;
}

}  // namespace

std::vector<std::string> module_names() { return {"geometry", "classical", "quantum", "measures", "probability"}; }

std::vector<CriterionResult> run(const SuiteOptions& opts, const std::function<void(const CriterionResult&)>& on_result) {
    const auto known = module_names();
    for (const auto& m : opts.only)
        if (std::find(known.begin(), known.end(), m) == known.end()) throw ConfigError("unknown module '" + m + "'");
    std::vector<CriterionResult> out;
    for (const auto& c : criteria()) {
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), c.module) == opts.only.end()) continue;
        CriterionResult r;
        r.id = c.id;
        r.module = c.module;
        r.title = c.title;
        r.budget_seconds = c.budget;
        const auto start = std::chrono::steady_clock::now();
        try {
            const Outcome oc = c.fn(opts);
            r.passed = oc.passed;
            r.detail = oc.detail;
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (r.seconds > r.budget_seconds) {
            r.passed = false;
            r.detail += fmt("; failed: runtime over the %.0f s budget", r.budget_seconds);
        }
        if (on_result) on_result(r);
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_line(const CriterionResult& r) {
    return fmt("%s %2d %-11s %-28s (%.2f s) ", r.passed ? "PASS" : "FAIL", r.id, r.module.c_str(), r.title.c_str(),
               r.seconds) +
           r.detail;
}

}  // namespace aml::acceptance
