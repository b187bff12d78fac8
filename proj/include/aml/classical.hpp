#pragma once

// Classical N-body dynamics with L = T - V, the 1D barrier example and its
// asymptotic boundary conditions, and classical scattering cross-sections.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aml/geometry.hpp"

namespace aml {

/// Central potential V(r). The square barrier is smoothed by a C2 quintic
/// ramp of width `smoothing` centred on r = a so that forces exist.
struct PotentialSpec {
    enum class Kind { Zero, SquareBarrier, Gaussian, SoftCoulomb, CentralRepulsivePower };

    Kind kind = Kind::Zero;
    double p1 = 0.0;  // V0 | V0 | q | k
    double p2 = 0.0;  // a  | w  | s | n
    double smoothing = 0.0;

    static PotentialSpec zero();
    static PotentialSpec square_barrier(double V0, double a, double smoothing_fraction = 1e-3);
    static PotentialSpec gaussian(double V0, double width);
    static PotentialSpec soft_coulomb(double q, double softening);
    static PotentialSpec central_repulsive_power(double k, double n);

    double value(double r) const;
    double derivative(double r) const;  // dV/dr
    bool singular() const { return kind == Kind::CentralRepulsivePower; }
    bool is_zero() const { return kind == Kind::Zero || p1 == 0.0; }
    std::string name() const;
};

struct PairPotential {
    int i = 0;
    int j = 1;
    PotentialSpec potential;
};

/// Masses, an optional external central potential per particle (centred on
/// the spatial origin) and pair potentials V_ij(|x_i - x_j|).
struct SystemSpec {
    std::vector<double> masses;
    std::vector<PotentialSpec> external;  // empty, or one entry per particle
    std::vector<PairPotential> pairs;
    double overlap_floor = 1e-6;  // minimum distance for singular potentials

    std::size_t size() const { return masses.size(); }
    void validate() const;
};

struct IntegrationOptions {
    SpaceTimePoint origin{};
    double sample_ratio = 1.25;
    double first_sample = 1e-2;  // first geometric sample time after the origin
    double max_energy_drift = 1e-2;
};

struct ClassicalRun {
    NBigBang bigbang;
    double energy_drift = 0.0;  // max |E(t) - E(0)| / |E(0)|
    long steps = 0;
};

double total_energy(const SystemSpec& sys, const Eigen::Matrix3Xd& x, const Eigen::Matrix3Xd& v);

/// Velocity Verlet from the common origin with initial velocities v_I (3N).
/// Samples are re-gridded geometrically by cubic Hermite interpolation.
ClassicalRun integrate_nbigbang(const SystemSpec& sys, const Eigen::VectorXd& v_I, double t_final, double dt,
                                const IntegrationOptions& opts = {});

/// Closed-form 1D barrier trajectory from x = 0 at t = 0 (and its mirror).
template <typename Scalar>
Scalar barrier_trajectory_oracle(Scalar m, Scalar V0, Scalar a, Scalar v_I, Scalar t) {
    using std::abs;
    using std::sqrt;
    if (v_I == Scalar(0)) return Scalar(0);
    const Scalar speed = abs(v_I);
    const Scalar sign = v_I > Scalar(0) ? Scalar(1) : Scalar(-1);
    if (t <= a / speed) return v_I * t;
    return sign * (a + (t - a / speed) * sqrt(speed * speed + Scalar(2) * V0 / m));
}

/// omega_V as printed for the barrier: sign(v_I)(|v_I| + sqrt(2 V0 / m)).
double omega_V_barrier(double m, double V0, double v_I);
/// omega_V implied by the trajectory: sign(v_I) sqrt(v_I^2 + 2 V0 / m).
double omega_V_from_trajectory(double m, double V0, double v_I);

struct BoundaryConditionSolve {
    double v = 0.0;
    std::vector<double> t;
    std::vector<double> v_I_of_t;
    double v_I_limit = 0.0;
    std::optional<double> decay_exponent;  // log-log slope of v_I(t) when it tends to 0
    bool degenerate = false;
};

/// Solves a + (t - a/v_I) sqrt(v_I^2 + 2V0/m) = v t for v_I at each t and
/// extrapolates t -> infinity.
BoundaryConditionSolve solve_asymptotic_boundary_condition(double m, double V0, double a, double v,
                                                           std::span<const double> t_list);

/// Delta_C for the barrier: (-inf, -g) U {0} U (g, inf), g = sqrt(2 V0 / m).
struct BarrierDeltaC {
    double gap = 0.0;
    bool contains(double v) const { return v == 0.0 || std::abs(v) > gap; }
};
BarrierDeltaC delta_C_barrier(double m, double V0);

/// Deflection angle Theta(s) for a particle of mass m and energy E in a
/// central potential, by adaptive RK45 integration of the planar orbit.
double deflection_angle(const PotentialSpec& potential, double mass, double energy, double s);

struct CrossSectionOptions {
    double mass = 1.0;
    double intensity = 1.0;     // I in sigma = rho_S / I
    double s_min = 0.0;         // smallest impact parameter probed
    std::optional<double> s_max;  // chosen from theta_grid when absent
    int n_s = 400;
};

struct CrossSectionResult {
    std::vector<double> theta_grid;
    std::vector<double> sigma;
    std::vector<double> rho_S;
    std::vector<double> rho_I;  // rho_I(s(Theta)) at each theta
    std::vector<double> s_of_theta;
    std::vector<double> s_grid;
    std::vector<double> theta_of_s;
    double intensity = 1.0;
};

/// rho_S(Theta) = rho_I(s) s / sin(Theta) |ds/dTheta|; sigma = rho_S / I.
/// `rho_I` is axisymmetric; pass nullptr for the uniform density I.
CrossSectionResult classical_cross_section(const PotentialSpec& potential, double energy,
                                           const std::function<double(double)>& rho_I,
                                           std::span<const double> theta_grid, const CrossSectionOptions& opts = {});

struct EmissionDensity {
    std::vector<double> s;
    std::vector<double> theta_s;  // Theta(s)
    std::vector<double> rho_I;
    std::vector<double> emission_angle;  // s / |z0|
    std::vector<double> rho_E;

    /// Interpolated rho_I(s), zero outside the tabulated range.
    double rho_I_at(double s) const;
};

/// Inverts the cross-section relation: rho_I(s) = rho_S(Theta(s)) sin(Theta) |dTheta/ds| / s
/// and rho_E(theta) = rho_I(theta |z0|).
EmissionDensity reverse_emission_density(const PotentialSpec& potential, double energy,
                                         const std::function<double(double)>& rho_S, double z0, double s_min,
                                         double s_max, const CrossSectionOptions& opts = {});

}  // namespace aml
