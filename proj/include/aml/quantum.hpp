#pragma once

// Grid Schroedinger evolution (hbar = 1), the asymptotic quantum measure as
// the large-t probability in cone regions, and semiclassical densities.

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "aml/classical.hpp"
#include "aml/geometry.hpp"

namespace aml {

using cplx = std::complex<double>;

/// Uniform grid x_j = -L + j dx, dx = 2L/n, per axis; 2D states are stored
/// row-major with index i0 * n + i1.
struct GridState {
    int dim = 1;
    int n = 0;
    double L = 0.0;
    double mass = 1.0;
    double t = 0.0;
    Eigen::ArrayXcd psi;

    static GridState zeros(int dim, int n, double L, double mass);

    double dx() const { return 2.0 * L / n; }
    double x(int j) const { return -L + j * dx(); }
    double cell_volume() const { return dim == 1 ? dx() : dx() * dx(); }
    Eigen::Index size() const { return psi.size(); }
    double norm() const { return psi.abs2().sum() * cell_volume(); }
    void validate() const;
};

/// Gaussian stand-in for the improper position eigenvector, normalised so
/// that its integral is 1: psi = (2 pi sigma^2)^(-d/2) exp(-|x - x0|^2 / (2 sigma^2)).
struct PointSourceSpec {
    Eigen::VectorXd x0;
    double sigma = 0.1;
};

struct GridSpec {
    int dim = 1;
    int n = 4096;
    double L = 25.6;
    double mass = 1.0;
};

GridState make_point_source(const PointSourceSpec& source, const GridSpec& grid);

/// Multiplies by exp(i m v0 . x): shifts the velocity distribution by v0.
GridState boost_state(GridState state, const Eigen::VectorXd& v0);

/// Central potential V(|x|), or for dim = 2 with `pair` set, the pair
/// potential V(|x_1 - x_2|) of two 1D particles of equal mass.
struct QuantumPotential {
    PotentialSpec spec;
    bool pair = false;

    QuantumPotential() = default;
    QuantumPotential(PotentialSpec s, bool pair_potential = false) : spec(s), pair(pair_potential) {}
    double at(const GridState& g, Eigen::Index k) const;
};

struct EvolveOptions {
    bool absorber = false;
    double absorber_fraction = 0.1;  // outer fraction of each axis that absorbs
    double absorber_strength = 5.0;
    double boundary_tolerance = 1e-6;  // relative mass allowed within 4 dx of the edge
    int check_every = 16;
};

/// Fraction of the norm lying within 4 dx of the grid edge.
double boundary_mass_fraction(const GridState& state);

/// Strang split-step Fourier evolution to t_target. Free evolution without an
/// absorber is done in a single exact kinetic step.
GridState evolve(GridState state, const QuantumPotential& potential, double t_target, double dt,
                 const EvolveOptions& opts = {});

/// Probability of a position-space box, with fractional overlap of edge cells.
double region_mass(const GridState& state, const IntervalBox& region);

/// Probability of the set f_X(t', I^c(t')) with f_T(t') = state.t, by
/// pulling each sub-cell sample back through the inverse of f.
double mapped_region_mass(const GridState& state, const CausalTransform& f, const IntervalBox& velocity_box,
                          int subsamples = 8);

/// Momentum-space probability of m * velocity_box, from the DFT of the state.
double momentum_mass(const GridState& state, const IntervalBox& velocity_box);

/// States at the requested increasing times from a single propagation.
class Snapshots {
public:
    Snapshots(std::vector<GridState> states) : states_(std::move(states)) {}

    const std::vector<GridState>& states() const { return states_; }
    std::size_t size() const { return states_.size(); }
    double time(std::size_t k) const { return states_[k].t; }

    /// eta_Qt(region) at snapshot k.
    double region_mass(std::size_t k, const IntervalBox& region) const { return aml::region_mass(states_[k], region); }
    /// eta_Qt(Delta^c(t)) at snapshot k.
    double cone_mass(std::size_t k, const IntervalBox& velocity_box) const;

private:
    std::vector<GridState> states_;
};

Snapshots propagate_snapshots(GridState initial, const QuantumPotential& potential, std::span<const double> t_list,
                              double dt, const EvolveOptions& opts = {});

/// Box masses of the regularised source at each t plus the largest-t value
/// and its last-decade change as the error bar.
struct GridMeasure {
    std::vector<IntervalBox> boxes;
    std::vector<double> t;
    std::vector<std::vector<double>> mass;  // [time][box]
    std::vector<double> limit;
    std::vector<double> last_decade_delta;
    double sigma = 0.0;

    double total(std::size_t time_index) const;
};

GridMeasure asymptotic_quantum_measure(const PointSourceSpec& source, const QuantumPotential& potential,
                                       std::span<const IntervalBox> boxes, std::span<const double> t_list, double dt,
                                       const GridSpec& grid, const EvolveOptions& opts = {});

/// GridMeasure from existing snapshots (boxes checked for resolvability).
GridMeasure measure_from_snapshots(const Snapshots& snaps, std::span<const IntervalBox> boxes, double sigma);

struct VelocityCheckRow {
    IntervalBox box;
    double position_mass = 0.0;
    double momentum_mass = 0.0;
    double relative_difference = 0.0;
};

/// Compares the cone mass at time t with the momentum-space mass of m * Delta
/// for free evolution (V+ = P / m).
std::vector<VelocityCheckRow> quantum_asymptotic_velocity_check(const GridState& initial,
                                                                std::span<const IntervalBox> boxes, double t);

struct SandwichRow {
    double t = 0.0;
    double mass_I = 0.0;
    double mass_fI = 0.0;
    double mass_minus = 0.0;  // I_{-eps}
    double mass_plus = 0.0;   // I_{+eps}
    bool holds = false;
};

struct AetEpsilonReport {
    double epsilon = 0.0;
    std::vector<SandwichRow> rows;
    std::optional<double> t0;  // first t from which the sandwich holds for all later t
};

struct AetInvarianceReport {
    TransformClass kind = TransformClass::Other;
    std::vector<AetEpsilonReport> by_epsilon;
    double final_relative_gap = 0.0;  // |mu_t[f(I)] - mu_t[I]| / mu_t[I] at the largest t
    bool violation = false;
};

struct AetCheckOptions {
    bool require_identical = true;
    double gap_tolerance = 0.05;
    int subsamples = 8;
};

/// Compares mu_Qt over f(I^c)(t) with mu_Qt(I) and the eps-sandwich.
AetInvarianceReport aet_invariance_check(const Snapshots& snaps, const CausalTransform& f, const IntervalBox& I,
                                         std::span<const double> eps_list, const AetCheckOptions& opts = {});

/// Free propagator K(x1, x2, t) = sqrt(m / (2 pi i t)) exp(i m (x2 - x1)^2 / (2t)) in 1D.
cplx free_propagator(double m, double x1, double x2, double t);

struct SemiclassicalDensities {
    std::vector<double> x;
    std::vector<double> rho_C;
    std::vector<double> rho_Q;
    std::vector<double> interference;  // rho_C - rho_Q
};

/// rho_C from the Van Vleck determinant |d^2 W / dx1 dx2| / (2 pi) of the
/// single free path, rho_Q = |K(0, x, t)|^2.
SemiclassicalDensities semiclassical_density_compare(double m, double t, std::span<const double> x_grid);

/// Cross term of two single-path contributions from sources x1 and x2,
/// (1/2pi) sum_{i != j} |W_i''|^(1/2) |W_j''|^(1/2) exp(i (W_i - W_j)).
double semiclassical_cross_term(double m, double t, double x, double x1, double x2);

/// |K1 + K2|^2 - |K1|^2 - |K2|^2 from the propagators directly.
double two_source_interference(double m, double t, double x, double x1, double x2);

}  // namespace aml
