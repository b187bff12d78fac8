#include "aml/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aml/errors.hpp"
#include "aml/numerics.hpp"

namespace aml {

// ---------------------------------------------------------------------------
// Potentials

PotentialSpec PotentialSpec::zero() { return {}; }

PotentialSpec PotentialSpec::square_barrier(double V0, double a, double smoothing_fraction) {
    if (!(V0 > 0) || !(a > 0)) throw ConfigError("square_barrier: V0 and a must be positive");
    if (!(smoothing_fraction > 0) || smoothing_fraction >= 1) throw ConfigError("square_barrier: bad smoothing");
    return {Kind::SquareBarrier, V0, a, smoothing_fraction * a};
}

PotentialSpec PotentialSpec::gaussian(double V0, double width) {
    if (!std::isfinite(V0) || !(width > 0)) throw ConfigError("gaussian: width must be positive");
    return {Kind::Gaussian, V0, width, 0.0};
}

PotentialSpec PotentialSpec::soft_coulomb(double q, double softening) {
    if (!std::isfinite(q) || !(softening > 0)) throw ConfigError("soft_coulomb: softening must be positive");
    return {Kind::SoftCoulomb, q, softening, 0.0};
}

PotentialSpec PotentialSpec::central_repulsive_power(double k, double n) {
    if (!(k > 0) || !(n > 0)) throw ConfigError("central_repulsive_power: k and n must be positive");
    return {Kind::CentralRepulsivePower, k, n, 0.0};
}

namespace {
// C2 quintic step: 0 at u <= 0, 1 at u >= 1.
double smoothstep(double u) {
    if (u <= 0) return 0;
    if (u >= 1) return 1;
    return u * u * u * (10 + u * (-15 + 6 * u));
}
double smoothstep_derivative(double u) {
    if (u <= 0 || u >= 1) return 0;
    return 30 * u * u * (1 - u) * (1 - u);
}
}  // namespace

double PotentialSpec::value(double r) const {
    switch (kind) {
        case Kind::Zero:
            return 0;
        case Kind::SquareBarrier:
            return p1 * smoothstep((p2 + 0.5 * smoothing - r) / smoothing);
        case Kind::Gaussian:
            return p1 * std::exp(-r * r / (2 * p2 * p2));
        case Kind::SoftCoulomb:
            return p1 / std::sqrt(r * r + p2 * p2);
        case Kind::CentralRepulsivePower:
            return p1 / std::pow(r, p2);
    }
    return 0;
}

double PotentialSpec::derivative(double r) const {
    switch (kind) {
        case Kind::Zero:
            return 0;
        case Kind::SquareBarrier:
            return -p1 / smoothing * smoothstep_derivative((p2 + 0.5 * smoothing - r) / smoothing);
        case Kind::Gaussian:
            return -p1 * r / (p2 * p2) * std::exp(-r * r / (2 * p2 * p2));
        case Kind::SoftCoulomb:
            return -p1 * r / std::pow(r * r + p2 * p2, 1.5);
        case Kind::CentralRepulsivePower:
            return -p2 * p1 / std::pow(r, p2 + 1);
    }
    return 0;
}

std::string PotentialSpec::name() const {
    switch (kind) {
        case Kind::Zero:
            return "zero";
        case Kind::SquareBarrier:
            return "square_barrier";
        case Kind::Gaussian:
            return "gaussian";
        case Kind::SoftCoulomb:
            return "soft_coulomb";
        case Kind::CentralRepulsivePower:
            return "central_repulsive_power";
    }
    return "?";
}

void SystemSpec::validate() const {
    if (masses.empty()) throw ConfigError("SystemSpec: no particles");
    for (double m : masses)
        if (!(m > 0) || !std::isfinite(m)) throw ConfigError("SystemSpec: masses must be positive");
    if (!external.empty() && external.size() != masses.size())
        throw ConfigError("SystemSpec: need one external potential per particle");
    for (const auto& p : pairs)
        if (p.i < 0 || p.j < 0 || p.i == p.j || p.i >= static_cast<int>(size()) || p.j >= static_cast<int>(size()))
            throw ConfigError("SystemSpec: bad pair indices");
}

// ---------------------------------------------------------------------------
// N-body integration

namespace {

void check_overlap(const SystemSpec& sys, const PotentialSpec& pot, double r, double t) {
    if (pot.singular() && r < sys.overlap_floor)
        throw ParticleOverlap("integrate_nbigbang: separation " + std::to_string(r) + " below floor at t=" +
                              std::to_string(t));
}

Eigen::Matrix3Xd accelerations(const SystemSpec& sys, const Eigen::Matrix3Xd& x, double t) {
    const Eigen::Index n = x.cols();
    Eigen::Matrix3Xd acc = Eigen::Matrix3Xd::Zero(3, n);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(sys.external.size()); ++i) {
        const auto& pot = sys.external[static_cast<std::size_t>(i)];
        if (pot.kind == PotentialSpec::Kind::Zero) continue;
        const double r = x.col(i).norm();
        check_overlap(sys, pot, r, t);
        if (r > 0) acc.col(i) -= pot.derivative(r) / r * x.col(i) / sys.masses[static_cast<std::size_t>(i)];
    }
    for (const auto& p : sys.pairs) {
        if (p.potential.kind == PotentialSpec::Kind::Zero) continue;
        const Vec3 d = x.col(p.i) - x.col(p.j);
        const double r = d.norm();
        check_overlap(sys, p.potential, r, t);
        if (r == 0) continue;
        const Vec3 force_on_i = -p.potential.derivative(r) / r * d;
        acc.col(p.i) += force_on_i / sys.masses[static_cast<std::size_t>(p.i)];
        acc.col(p.j) -= force_on_i / sys.masses[static_cast<std::size_t>(p.j)];
    }
    return acc;
}

}  // namespace

double total_energy(const SystemSpec& sys, const Eigen::Matrix3Xd& x, const Eigen::Matrix3Xd& v) {
    double e = 0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) e += 0.5 * sys.masses[static_cast<std::size_t>(i)] * v.col(i).squaredNorm();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(sys.external.size()); ++i)
        e += sys.external[static_cast<std::size_t>(i)].value(x.col(i).norm());
    for (const auto& p : sys.pairs) e += p.potential.value((x.col(p.i) - x.col(p.j)).norm());
    return e;
}

ClassicalRun integrate_nbigbang(const SystemSpec& sys, const Eigen::VectorXd& v_I, double t_final, double dt,
                                const IntegrationOptions& opts) {
    sys.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(sys.size());
    if (v_I.size() != 3 * n) throw ConfigError("integrate_nbigbang: v_I must have 3N components");
    if (!(t_final > 0) || !(dt > 0)) throw ConfigError("integrate_nbigbang: t_final and dt must be positive");

    const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
    const double h = t_final / static_cast<double>(steps);

    std::vector<double> sample_t{0.0};
    if (opts.first_sample < t_final) {
        for (double s : numerics::geometric_grid(opts.first_sample, t_final, opts.sample_ratio)) sample_t.push_back(s);
    } else {
        sample_t.push_back(t_final);
    }
    std::vector<Eigen::Matrix3Xd> sampled(sample_t.size(), Eigen::Matrix3Xd(3, n));

    Eigen::Matrix3Xd x = opts.origin.x.replicate(1, n);
    Eigen::Matrix3Xd v = Eigen::Map<const Eigen::Matrix3Xd>(v_I.data(), 3, n);
    Eigen::Matrix3Xd a = accelerations(sys, x, 0.0);
    const double e0 = total_energy(sys, x, v);
    const double e_scale = std::max(std::abs(e0), 1e-300);
    double drift = 0;

    sampled[0] = x;
    std::size_t next = 1;
    for (long k = 0; k < steps && next < sample_t.size(); ++k) {
        const double t0 = static_cast<double>(k) * h;
        const double t1 = (k + 1 == steps) ? t_final : static_cast<double>(k + 1) * h;
        const Eigen::Matrix3Xd x0 = x, v0 = v;
        x += h * v + 0.5 * h * h * a;
        const Eigen::Matrix3Xd a1 = accelerations(sys, x, opts.origin.t + t1);
        v += 0.5 * h * (a + a1);
        a = a1;

        const double e = total_energy(sys, x, v);
        drift = std::max(drift, std::abs(e - e0) / e_scale);
        if (!std::isfinite(e) || drift > opts.max_energy_drift)
            throw StepUnstable("integrate_nbigbang: relative energy drift " + std::to_string(drift) + " at t=" +
                               std::to_string(opts.origin.t + t1) + " (reduce dt)");

        while (next < sample_t.size() && sample_t[next] <= t1 * (1 + 1e-14)) {
            // Cubic Hermite interpolation between the two Verlet states.
            const double u = std::clamp((sample_t[next] - t0) / (t1 - t0), 0.0, 1.0);
            const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
            const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
            sampled[next] = h00 * x0 + h10 * (t1 - t0) * v0 + h01 * x + h11 * (t1 - t0) * v;
            ++next;
        }
    }

    std::vector<double> times(sample_t.size());
    for (std::size_t s = 0; s < sample_t.size(); ++s) times[s] = opts.origin.t + sample_t[s];
    std::vector<SampledTrajectory> trajs;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Matrix3Xd pos(3, static_cast<Eigen::Index>(sample_t.size()));
        for (std::size_t s = 0; s < sample_t.size(); ++s) pos.col(static_cast<Eigen::Index>(s)) = sampled[s].col(i);
        trajs.emplace_back(times, std::move(pos));
    }
    return ClassicalRun{NBigBang(opts.origin, std::move(trajs)), drift, steps};
}

// ---------------------------------------------------------------------------
// Barrier example

double omega_V_barrier(double m, double V0, double v_I) {
    if (v_I == 0) return 0;
    return (v_I > 0 ? 1.0 : -1.0) * (std::abs(v_I) + std::sqrt(2 * V0 / m));
}

double omega_V_from_trajectory(double m, double V0, double v_I) {
    if (v_I == 0) return 0;
    return (v_I > 0 ? 1.0 : -1.0) * std::sqrt(v_I * v_I + 2 * V0 / m);
}

BoundaryConditionSolve solve_asymptotic_boundary_condition(double m, double V0, double a, double v,
                                                           std::span<const double> t_list) {
    if (!(m > 0) || !(V0 > 0) || !(a > 0)) throw ConfigError("boundary solve: m, V0, a must be positive");
    if (t_list.size() < 3) throw TooFewSamples("boundary solve: need at least 3 times");
    for (std::size_t i = 0; i < t_list.size(); ++i)
        if (!(t_list[i] > 0) || (i > 0 && !(t_list[i] > t_list[i - 1])))
            throw ConfigError("boundary solve: times must be positive and increasing");

    BoundaryConditionSolve out;
    out.v = v;
    out.t.assign(t_list.begin(), t_list.end());
    const double gap = std::sqrt(2 * V0 / m);
    out.degenerate = std::abs(v) <= gap;
    const double speed = std::abs(v);
    const double sign = v >= 0 ? 1.0 : -1.0;

    for (double t : t_list) {
        if (v == 0) {
            out.v_I_of_t.push_back(0.0);
            continue;
        }
        // X_t(v_I) is increasing from 0 and X_t(|v|) >= |v| t, so [0, |v|] brackets the root.
        auto g = [&](double u) { return barrier_trajectory_oracle(m, V0, a, u, t) - speed * t; };
        out.v_I_of_t.push_back(sign * numerics::brent_root(g, 0.0, speed, 1e-15 * std::max(1.0, speed)));
    }

    if (v == 0) {
        out.v_I_limit = 0;
        return out;
    }
    const auto fit = numerics::fit_power_tail(out.t, out.v_I_of_t);
    out.v_I_limit = fit.limit;
    if (out.degenerate) {
        // v_I(t) ~ a g / (a + t (g - |v|)) -> 0: report the tail log-log slope.
        const std::size_t k = t_list.size();
        std::vector<double> lt, lv;
        for (std::size_t i = k / 2; i < k; ++i) {
            lt.push_back(std::log(out.t[i]));
            lv.push_back(std::log(std::abs(out.v_I_of_t[i])));
        }
        out.decay_exponent = numerics::fit_line(lt, lv).slope;
        if (speed < gap) out.v_I_limit = 0.0;
    }
    return out;
}

BarrierDeltaC delta_C_barrier(double m, double V0) {
    if (!(m > 0) || !(V0 > 0)) throw ConfigError("delta_C_barrier: m and V0 must be positive");
    return {std::sqrt(2 * V0 / m)};
}

// ---------------------------------------------------------------------------
// Scattering

namespace {

double length_scale(const PotentialSpec& pot, double energy) {
    switch (pot.kind) {
        case PotentialSpec::Kind::SquareBarrier:
        case PotentialSpec::Kind::Gaussian:
        case PotentialSpec::Kind::SoftCoulomb:
            return pot.p2;
        case PotentialSpec::Kind::CentralRepulsivePower:
            return std::pow(pot.p1 / energy, 1.0 / pot.p2);
        case PotentialSpec::Kind::Zero:
            break;
    }
    return 1.0;
}

using State4 = Eigen::Vector4d;  // x, z, vx, vz

// Dormand-Prince 5(4) with standard step-size control.
State4 integrate_orbit(const PotentialSpec& pot, double mass, State4 y, double r_exit) {
    auto rhs = [&](const State4& s) {
        const double r = std::hypot(s(0), s(1));
        State4 d;
        d(0) = s(2);
        d(1) = s(3);
        const double f = r > 0 ? -pot.derivative(r) / (mass * r) : 0.0;
        d(2) = f * s(0);
        d(3) = f * s(1);
        return d;
    };
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;

    const double speed = std::hypot(y(2), y(3));
    const double rtol = 1e-11, atol = 1e-13;
    double h = 1e-3 * r_exit / speed;
    State4 k1 = rhs(y);
    for (long it = 0; it < 5'000'000; ++it) {
        const State4 k2 = rhs(y + h * a21 * k1);
        const State4 k3 = rhs(y + h * (a31 * k1 + a32 * k2));
        const State4 k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const State4 k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const State4 k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const State4 y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const State4 k7 = rhs(y5);
        const State4 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        State4 scale;
        scale.head<2>().setConstant(atol * r_exit);
        scale.tail<2>().setConstant(atol * speed);
        scale += rtol * y.cwiseAbs().cwiseMax(y5.cwiseAbs());
        const double en = (err.array() / scale.array()).abs().maxCoeff();
        if (en <= 1.0) {
            y = y5;
            k1 = k7;
            const double r = std::hypot(y(0), y(1));
            if (r > r_exit && y(0) * y(2) + y(1) * y(3) > 0) return y;
        }
        h *= std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 5.0);
        if (!(h > 0) || !std::isfinite(h)) break;
    }
    throw StepUnstable("deflection_angle: orbit integration did not finish");
}

struct DeflectionTable {
    std::vector<double> s, theta, dtheta;
};

DeflectionTable tabulate(const PotentialSpec& pot, double mass, double energy, double s_min, double s_max, int n) {
    if (n < 5) throw ConfigError("cross-section: need at least 5 impact parameters");
    DeflectionTable tab;
    tab.s = numerics::linspace(s_min, s_max, n);
    for (double s : tab.s) tab.theta.push_back(deflection_angle(pot, mass, energy, s));
    const std::size_t k = tab.s.size();
    const double h = tab.s[1] - tab.s[0];
    tab.dtheta.resize(k);
    for (std::size_t i = 1; i + 1 < k; ++i) tab.dtheta[i] = (tab.theta[i + 1] - tab.theta[i - 1]) / (2 * h);
    tab.dtheta[0] = (-3 * tab.theta[0] + 4 * tab.theta[1] - tab.theta[2]) / (2 * h);
    tab.dtheta[k - 1] = (3 * tab.theta[k - 1] - 4 * tab.theta[k - 2] + tab.theta[k - 3]) / (2 * h);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (!(tab.theta[i + 1] < tab.theta[i]))
            throw NonMonotoneDeflection("cross-section: Theta(s) is not decreasing near s=" +
                                        std::to_string(tab.s[i]) + " (rainbow angle)");
    }
    for (std::size_t i = 0; i < k; ++i)
        if (!(tab.dtheta[i] < 0) && tab.s[i] > 0)
            throw NonMonotoneDeflection("cross-section: dTheta/ds >= 0 at s=" + std::to_string(tab.s[i]));
    return tab;
}

struct HermitePiece {
    double s0, s1, th0, th1, d0, d1;
    double value(double s) const {
        const double h = s1 - s0, u = (s - s0) / h;
        return (1 + 2 * u) * (1 - u) * (1 - u) * th0 + u * (1 - u) * (1 - u) * h * d0 + u * u * (3 - 2 * u) * th1 +
               u * u * (u - 1) * h * d1;
    }
    double slope(double s) const {
        const double h = s1 - s0, u = (s - s0) / h;
        return (6 * u * u - 6 * u) / h * th0 + (3 * u * u - 4 * u + 1) * d0 + (6 * u - 6 * u * u) / h * th1 +
               (3 * u * u - 2 * u) * d1;
    }
};

HermitePiece piece(const DeflectionTable& tab, std::size_t i) {
    return {tab.s[i], tab.s[i + 1], tab.theta[i], tab.theta[i + 1], tab.dtheta[i], tab.dtheta[i + 1]};
}

// s(Theta) and dTheta/ds there, from the monotone Hermite interpolant.
std::pair<double, double> invert_deflection(const DeflectionTable& tab, double theta) {
    const std::size_t k = tab.s.size();
    if (theta > tab.theta.front() || theta < tab.theta.back())
        throw std::invalid_argument("cross-section: angle " + std::to_string(theta) + " outside probed range [" +
                                    std::to_string(tab.theta.back()) + ", " + std::to_string(tab.theta.front()) +
                                    "]");
    std::size_t i = 0;
    while (i + 2 < k && tab.theta[i + 1] > theta) ++i;
    const HermitePiece p = piece(tab, i);
    const double s = numerics::brent_root([&](double x) { return p.value(x) - theta; }, p.s0, p.s1, 1e-15);
    return {s, p.slope(s)};
}

}  // namespace

double deflection_angle(const PotentialSpec& pot, double mass, double energy, double s) {
    if (!(energy > 0) || !(mass > 0)) throw ConfigError("deflection_angle: energy and mass must be positive");
    if (pot.is_zero()) return 0.0;
    const double scale = length_scale(pot, energy);
    double Z = scale;
    while (std::abs(pot.value(Z)) > 1e-13 * energy && Z < 1e6 * scale) Z *= 1.5;
    if (energy - pot.value(std::hypot(s, Z)) <= 0) throw ConfigError("deflection_angle: start inside the potential");
    const double v = std::sqrt(2 * (energy - pot.value(std::hypot(s, Z))) / mass);
    State4 y(s, -Z, 0.0, v);
    const State4 out = integrate_orbit(pot, mass, y, std::hypot(s, Z));
    return std::atan2(out(2), out(3));
}

CrossSectionResult classical_cross_section(const PotentialSpec& potential, double energy,
                                           const std::function<double(double)>& rho_I,
                                           std::span<const double> theta_grid, const CrossSectionOptions& opts) {
    if (potential.is_zero()) throw NonMonotoneDeflection("cross-section: zero potential does not scatter");
    if (theta_grid.empty()) throw ConfigError("cross-section: empty theta grid");
    if (!(opts.intensity > 0)) throw ConfigError("cross-section: intensity must be positive");
    const double theta_min = *std::min_element(theta_grid.begin(), theta_grid.end());
    if (!(theta_min > 0)) throw ConfigError("cross-section: angles must be positive");

    double s_max = 0;
    if (opts.s_max) {
        s_max = *opts.s_max;
    } else {
        s_max = length_scale(potential, energy);
        for (int i = 0; i < 80 && deflection_angle(potential, opts.mass, energy, s_max) > 0.5 * theta_min; ++i)
            s_max *= 1.25;
    }
    const auto tab = tabulate(potential, opts.mass, energy, opts.s_min, s_max, opts.n_s);

    CrossSectionResult res;
    res.intensity = opts.intensity;
    res.s_grid = tab.s;
    res.theta_of_s = tab.theta;
    for (double theta : theta_grid) {
        const auto [s, dth] = invert_deflection(tab, theta);
        const double rho = rho_I ? rho_I(s) : opts.intensity;
        const double rs = rho * s / std::sin(theta) / std::abs(dth);
        res.theta_grid.push_back(theta);
        res.s_of_theta.push_back(s);
        res.rho_I.push_back(rho);
        res.rho_S.push_back(rs);
        res.sigma.push_back(rs / opts.intensity);
    }
    return res;
}

double EmissionDensity::rho_I_at(double s_query) const {
    if (s.empty() || s_query < s.front() || s_query > s.back()) return 0.0;
    return numerics::interp_linear(s, rho_I, s_query);
}

EmissionDensity reverse_emission_density(const PotentialSpec& potential, double energy,
                                         const std::function<double(double)>& rho_S, double z0, double s_min,
                                         double s_max, const CrossSectionOptions& opts) {
    if (potential.is_zero()) throw NonMonotoneDeflection("reverse_emission_density: zero potential does not scatter");
    if (!(s_min > 0) || !(s_max > s_min)) throw ConfigError("reverse_emission_density: need 0 < s_min < s_max");
    if (z0 == 0) throw ConfigError("reverse_emission_density: z0 must be nonzero");
    const auto tab = tabulate(potential, opts.mass, energy, s_min, s_max, opts.n_s);
    EmissionDensity out;
    out.s = tab.s;
    out.theta_s = tab.theta;
    for (std::size_t i = 0; i < tab.s.size(); ++i) {
        const double th = tab.theta[i];
        const double rho = rho_S(th) * std::sin(th) * std::abs(tab.dtheta[i]) / tab.s[i];
        out.rho_I.push_back(rho);
        out.emission_angle.push_back(tab.s[i] / std::abs(z0));
        out.rho_E.push_back(rho);
    }
    return out;
}

}  // namespace aml
