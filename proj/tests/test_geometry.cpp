#include "doctest.h"

#include <cmath>
#include <random>

#include "aml/errors.hpp"
#include "aml/geometry.hpp"

using namespace aml;

namespace {

SampledTrajectory sample(const std::function<Vec3(double)>& g, double t0, double T) {
    return SampledTrajectory::sample(g, t0, T);
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized().toRotationMatrix();
}

Vec3 random_vec(std::mt19937_64& rng, double s = 1.0) {
    std::uniform_real_distribution<double> u(-s, s);
    return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("IntervalBox basics") {
    auto box = IntervalBox::interval(-1, 1);
    CHECK(box.contains(Eigen::VectorXd::Constant(1, 1.0)));
    CHECK_FALSE(box.contains(Eigen::VectorXd::Constant(1, -1.0)));
    CHECK(box.shrunk(0.2).lo()(0) == doctest::Approx(-0.8));
    CHECK(box.grown(0.2).hi()(0) == doctest::Approx(1.2));
    CHECK_THROWS_AS(box.shrunk(1.0), std::invalid_argument);
    CHECK_THROWS_AS(IntervalBox(Eigen::VectorXd::Constant(1, 1), Eigen::VectorXd::Constant(1, 0)),
                    std::invalid_argument);
    auto half = IntervalBox::interval(0, 3);
    CHECK(box.overlap_volume(half) == doctest::Approx(1.0));
    ConePatch cone{box};
    CHECK(cone.at(10).hi()(0) == doctest::Approx(10));
}

TEST_CASE("oscillating, sublinear and non-regular trajectories") {
    SUBCASE("1a: bounded oscillation around a ray") {
        const Vec3 v(1, 0, 0), x0(1, 1, 1);
        auto traj = sample([&](double t) -> Vec3 { return v * t + x0 * std::sin(3.0 * t); }, 1.0, 1e4);
        auto est = estimate_asymptotic_velocity(traj, 1e-3);
        CHECK((est.value - v).norm() < 1e-3);
        CHECK(est.converged);
    }
    SUBCASE("1b: sublinear growth") {
        const Vec3 a(1, 1, 1);
        auto traj = sample([&](double t) -> Vec3 { return a * std::sqrt(t); }, 1.0, 1e6);
        auto est = estimate_asymptotic_velocity(traj, 2e-3);
        CHECK(est.value.norm() < 2e-3);
        CHECK(est.converged);
    }
    SUBCASE("1c: oscillating velocity") {
        const Vec3 v(1, 0, 0);
        auto traj = sample([&](double t) -> Vec3 { return v * t * std::sin(2.0 * t); }, 1.0, 1e4);
        CHECK_THROWS_AS(estimate_asymptotic_velocity(traj, 1e-3), NotConverged);
    }
    SUBCASE("short record") {
        auto traj = sample([](double t) -> Vec3 { return Vec3(t, 0, 0); }, 1.0, 5.0);
        CHECK_THROWS_AS(estimate_asymptotic_velocity(traj, 1e-3), TooFewSamples);
    }
}

TEST_CASE("boundedness: |gamma - v t| <= C gives v within C/T + tol") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 v = random_vec(rng, 2.0);
        const Vec3 b = random_vec(rng, 1.0);
        const double w = 0.5 + trial;
        const double C = b.norm();
        const double T = 1e4, tol = 1e-3;
        auto traj = sample([&](double t) -> Vec3 { return v * t + b * std::cos(w * t); }, 1.0, T);
        auto est = estimate_asymptotic_velocity(traj, tol);
        CHECK((est.value - v).norm() <= C / T + tol);
    }
}

TEST_CASE("straight line estimate is exact") {
    const Vec3 v(0.3, -2.0, 1.5);
    auto traj = sample([&](double t) -> Vec3 { return v * t; }, 0.01, 100.0);
    auto est = estimate_asymptotic_velocity(traj, 1e-9);
    CHECK((est.value - v).norm() < 1e-12);
    CHECK(est.residual < 1e-12);
}

TEST_CASE("Galilean maps shift asymptotic velocities to R v - v0") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat3 R = random_rotation(rng);
        const Vec3 v0 = random_vec(rng), v = random_vec(rng, 2.0), x0 = random_vec(rng);
        auto f = transforms::galilean(R, v0, 0.5, random_vec(rng));
        auto traj = sample([&](double t) -> Vec3 { return v * t + x0 * std::sin(t); }, 1.0, 1e5);
        auto out = apply_transform(f, traj);
        CHECK(out.size() == traj.size());
        auto est = estimate_asymptotic_velocity(out, 1e-3);
        CHECK((est.value - (R * v - v0)).norm() < 1e-3);
    }
    auto id = apply_transform(identity_transform(), sample([](double t) -> Vec3 { return Vec3(t, t * t, 0); }, 1, 10));
    CHECK(id.position(3) == Vec3(id.times()[3], id.times()[3] * id.times()[3], 0));

    CausalTransform reversing = identity_transform();
    reversing.time_map = [](double t) { return -t; };
    CHECK_THROWS_AS(apply_transform(reversing, sample([](double t) -> Vec3 { return Vec3(t, 0, 0); }, 1, 10)),
                    NonCausal);
}

TEST_CASE("scale transform keeps asymptotic velocity") {
    const Vec3 v(1, 2, -1);
    auto out = apply_transform(transforms::scale(2.0), sample([&](double t) -> Vec3 { return v * t; }, 1, 1e4));
    CHECK((estimate_asymptotic_velocity(out, 1e-6).value - v).norm() < 1e-9);
}

TEST_CASE("NBigBang invariants survive apply_transform") {
    std::vector<SampledTrajectory> trajs;
    trajs.push_back(sample([](double t) -> Vec3 { return Vec3(t, 0, 0); }, 1e-3, 1e3));
    trajs.push_back(sample([](double t) -> Vec3 { return Vec3(-t, 0.5 * t, 0); }, 1e-3, 1e3));
    // Shift origins so both start at the same point.
    std::vector<SampledTrajectory> shifted;
    for (auto& tr : trajs) {
        Eigen::Matrix3Xd p = tr.positions();
        p.colwise() -= tr.position(0);
        shifted.emplace_back(tr.times(), p);
    }
    NBigBang bb(SpaceTimePoint{1e-3, Vec3::Zero()}, shifted);
    auto f = transforms::galilean(Eigen::AngleAxisd(0.4, Vec3::UnitY()).toRotationMatrix(), Vec3(0.2, 0, 0));
    NBigBang out = apply_transform(f, bb);
    CHECK(out.size() == 2);
    CHECK(std::abs(out.origin().t - 1e-3) < 1e-15);
    auto omega = estimate_asymptotic_velocity(out, 1e-6);
    CHECK(omega.size() == 6);

    std::vector<SampledTrajectory> same{shifted[0], shifted[0]};
    CHECK_THROWS_AS(NBigBang(SpaceTimePoint{1e-3, Vec3::Zero()}, same), std::invalid_argument);
}

TEST_CASE("estimate_asymptotic_transform catalog") {
    const Vec3 v(1, 0, 0);
    auto shear = estimate_asymptotic_transform(transforms::shear_over_t(), v, 1e-3);
    CHECK(shear.value.norm() < 1e-3);
    CHECK_THROWS_AS(estimate_asymptotic_transform(transforms::time_stretch(), v, 1e-3), NotRegular);
    CHECK_THROWS_AS(estimate_asymptotic_transform(transforms::sine_boost(Vec3(1, 0, 0), 1.0), v, 1e-3), NotRegular);
    // Inverse of shear_over_t is (t, t x), not regular.
    CHECK_THROWS_AS(estimate_asymptotic_transform(inverse(transforms::shear_over_t()), v, 1e-3), NotRegular);

    auto sw = estimate_asymptotic_transform(transforms::swirl(0.7), Vec3(1, 2, 3), 1e-4);
    REQUIRE(sw.analytic.has_value());
    CHECK(sw.discrepancy < 1e-4);
}

TEST_CASE("composition and inverse of asymptotic transforms") {
    std::mt19937_64 rng(3);
    const auto probes = default_probe_velocities();
    for (int trial = 0; trial < 4; ++trial) {
        auto f = compose(transforms::swirl(0.3 + trial), transforms::log_drift(0.5));
        auto g = transforms::galilean(random_rotation(rng), random_vec(rng));
        auto gf = compose(g, f);
        for (const auto& v : probes) {
            auto est = estimate_asymptotic_transform(gf, v, 1e-3);
            const Vec3 expect = (*g.analytic_plus)((*f.analytic_plus)(v));
            CHECK((est.value - expect).norm() < 2e-3);
            auto back = estimate_asymptotic_transform(inverse(gf), expect, 1e-3);
            CHECK((back.value - v).norm() < 1e-3);
        }
    }
}

TEST_CASE("classification") {
    const auto probes = default_probe_velocities();
    CHECK(probes.size() == 13);

    const Vec3 v0(0.3, -0.1, 0.2);
    auto boost = classify_transform(transforms::boost(v0), probes, 1e-6);
    CHECK(boost.kind == TransformClass::AsymptoticallyEuclidean);
    CHECK((boost.v0 - v0).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((boost.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6);

    const Mat3 R = Eigen::AngleAxisd(1.1, Vec3(1, 2, 2).normalized()).toRotationMatrix();
    auto gal = classify_transform(transforms::galilean(R, v0), probes, 1e-6);
    CHECK(gal.kind == TransformClass::AsymptoticallyEuclidean);
    CHECK((gal.rotation - R).cwiseAbs().maxCoeff() < 1e-6);

    auto drift = classify_transform(transforms::log_drift(0.5), probes, 1e-3, false);
    CHECK(drift.kind == TransformClass::AsymptoticallyIdentical);
    CHECK_FALSE(drift.used_analytic);

    auto stretch = classify_transform(transforms::space_scale(2.0), probes, 1e-6);
    CHECK(stretch.kind == TransformClass::Other);

    auto est_swirl = classify_transform(transforms::swirl(0.9), probes, 1e-3, false);
    CHECK(est_swirl.kind == TransformClass::AsymptoticallyEuclidean);

    std::vector<Vec3> few(probes.begin(), probes.begin() + 5);
    CHECK_THROWS_AS(classify_transform(transforms::boost(v0), few, 1e-6), std::invalid_argument);
}

TEST_CASE("classification is stable under composition with asymptotically identical maps") {
    const auto probes = default_probe_velocities();
    const Mat3 R = Eigen::AngleAxisd(0.5, Vec3::UnitZ()).toRotationMatrix();
    auto f = transforms::galilean(R, Vec3(0.1, 0.2, 0.3));
    auto a = transforms::log_drift(0.3, Vec3::UnitY());
    auto b = transforms::log_drift(0.8);
    auto base = classify_transform(f, probes, 1e-3, false);
    auto wrapped = classify_transform(compose(a, compose(f, b)), probes, 1e-3, false);
    CHECK(base.kind == wrapped.kind);
    CHECK((base.rotation - wrapped.rotation).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((base.v0 - wrapped.v0).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("compactification") {
    auto c = compactify(SpaceTimePoint{1.0, Vec3(1, 0, 0)});
    CHECK(c.s == 1.0);
    CHECK(c.w == Vec3(1, 0, 0));
    auto d = compactify(SpaceTimePoint{10.0, Vec3(20, 0, 0)});
    CHECK(d.s == doctest::Approx(0.1));
    CHECK(d.w.isApprox(Vec3(2, 0, 0)));
    CHECK_THROWS_AS(compactify(SpaceTimePoint{0.0, Vec3::Zero()}), NonPositiveTime);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        SpaceTimePoint p{std::exp(std::uniform_real_distribution<double>(-3, 6)(rng)), random_vec(rng, 100)};
        auto q = decompactify(compactify(p));
        CHECK(std::abs(q.t - p.t) <= 4e-16 * p.t);
        CHECK((q.x - p.x).norm() <= 1e-15 * (1 + p.x.norm()));
    }

    // h f h^-1 approaches (0, f+(w)) as s -> 0 for a Galilean f.
    const Mat3 R = Eigen::AngleAxisd(0.3, Vec3::UnitX()).toRotationMatrix();
    auto f = transforms::galilean(R, Vec3(0.5, 0, 0), 2.0, Vec3(1, 1, 1));
    const Vec3 w(0.2, -0.4, 1.0);
    double prev = 1e9;
    for (double s : {1e-1, 1e-2, 1e-3, 1e-4}) {
        auto [t, x] = decompactify(CompactPoint<double>{s, w});
        auto img = compactify(f(SpaceTimePoint{t, x}));
        const double err = (img.w - (*f.analytic_plus)(w)).norm() + img.s;
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("cone sandwich") {
    const IntervalBox I = IntervalBox::cube(Vec3::Constant(-1), Vec3::Constant(1));
    std::vector<double> times;
    for (double t = 1; t <= 1000; t *= 1.25) times.push_back(t);

    auto id = cone_sandwich_check(identity_transform(), I, 0.2, times);
    REQUIRE(id.t0.has_value());
    CHECK(*id.t0 == times.front());

    // log(1+t)/t < 0.2 for t beyond the root of log(1+t) = 0.2 t.
    const double c = 1.0, eps = 0.2;
    double lo = 5, hi = 50;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (c * std::log1p(mid) / mid > eps ? lo : hi) = mid;
    }
    auto drift = cone_sandwich_check(transforms::log_drift(c), I, eps, times);
    REQUIRE(drift.t0.has_value());
    const double expect = *std::find_if(times.begin(), times.end(), [&](double t) { return t > hi; });
    CHECK(*drift.t0 == expect);

    // Without inverse maps the displacement bound is used instead.
    auto no_inv = transforms::log_drift(c);
    no_inv.inverse_space_map = nullptr;
    auto drift2 = cone_sandwich_check(no_inv, I, eps, times);
    CHECK(drift2.t0 == drift.t0);

    auto boost = cone_sandwich_check(transforms::boost(Vec3(0.5, 0, 0)), I, eps, times);
    CHECK_FALSE(boost.t0.has_value());
    CHECK_FALSE(boost.holds(times.size() - 1));

    CHECK_THROWS_AS(cone_sandwich_check(identity_transform(), I, 1.5, times), std::invalid_argument);
}
