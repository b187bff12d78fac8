#pragma once

// Space-time geometry: sampled semitrajectories, N-bigbangs, causal
// transforms, asymptotic velocities and the asymptotic transform f+.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aml {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct SpaceTimePoint {
    double t = 0.0;
    Vec3 x = Vec3::Zero();
};

/// Half-open axis-aligned box (lo, hi] in k dimensions. Zero-width sides are
/// allowed (empty box); `is_proper()` requires every side to be positive.
class IntervalBox {
public:
    IntervalBox() = default;
    IntervalBox(Eigen::VectorXd lo, Eigen::VectorXd hi);
    static IntervalBox interval(double lo, double hi);
    static IntervalBox cube(const Vec3& lo, const Vec3& hi);

    Eigen::Index dimension() const { return lo_.size(); }
    const Eigen::VectorXd& lo() const { return lo_; }
    const Eigen::VectorXd& hi() const { return hi_; }
    Eigen::VectorXd sides() const { return hi_ - lo_; }
    Eigen::VectorXd center() const { return 0.5 * (lo_ + hi_); }
    double min_side() const { return sides().minCoeff(); }
    double volume() const { return sides().prod(); }
    bool is_proper() const { return (hi_.array() > lo_.array()).all(); }

    bool contains(const Eigen::VectorXd& p) const;
    /// Closed-box membership with slack, used where the boundary is immaterial.
    bool contains_closed(const Eigen::VectorXd& p, double slack = 0.0) const;

    IntervalBox shrunk(double eps) const;  // I_{-eps}
    IntervalBox grown(double eps) const;   // I_{+eps}
    IntervalBox scaled(double factor) const;
    IntervalBox translated(const Eigen::VectorXd& shift) const;
    /// Volume of the intersection with `other`.
    double overlap_volume(const IntervalBox& other) const;

private:
    Eigen::VectorXd lo_;
    Eigen::VectorXd hi_;
};

/// Cone region {(t, v t) : v in base}; `at(t)` is its spatial cross-section.
struct ConePatch {
    IntervalBox base;
    IntervalBox at(double t) const { return base.scaled(t); }
};

/// Time-stamped samples of a semitrajectory, strictly increasing in t.
class SampledTrajectory {
public:
    SampledTrajectory(std::vector<double> times, Eigen::Matrix3Xd positions);

    /// Samples `curve` on the geometric grid t0, t0 r, ..., t_final.
    static SampledTrajectory sample(const std::function<Vec3(double)>& curve, double t0, double t_final,
                                    double ratio = 1.25);

    double t0() const { return times_.front(); }
    double final_time() const { return times_.back(); }
    Eigen::Index size() const { return static_cast<Eigen::Index>(times_.size()); }
    const std::vector<double>& times() const { return times_; }
    const Eigen::Matrix3Xd& positions() const { return positions_; }
    Vec3 position(Eigen::Index i) const { return positions_.col(i); }
    SpaceTimePoint point(Eigen::Index i) const { return {times_[static_cast<std::size_t>(i)], position(i)}; }
    SpaceTimePoint origin() const { return point(0); }

private:
    std::vector<double> times_;
    Eigen::Matrix3Xd positions_;
};

/// N semitrajectories sharing a common origin, pairwise separated at every
/// shared sample time after the origin.
class NBigBang {
public:
    NBigBang(SpaceTimePoint origin, std::vector<SampledTrajectory> trajectories, double min_separation = 1e-9);

    const SpaceTimePoint& origin() const { return origin_; }
    const std::vector<SampledTrajectory>& trajectories() const { return trajectories_; }
    std::size_t size() const { return trajectories_.size(); }

private:
    SpaceTimePoint origin_;
    std::vector<SampledTrajectory> trajectories_;
};

/// f(t, x) = (f_T(t), f_X(t, x)). Inverse maps are optional; when the inverse
/// time map is absent it is recovered by root finding on f_T.
struct CausalTransform {
    using TimeMap = std::function<double(double)>;
    using SpaceMap = std::function<Vec3(double, const Vec3&)>;
    using VelocityMap = std::function<Vec3(const Vec3&)>;

    std::string name;
    TimeMap time_map;
    SpaceMap space_map;
    std::optional<VelocityMap> analytic_plus;
    TimeMap inverse_time_map;    // t' -> t with f_T(t) = t'
    SpaceMap inverse_space_map;  // (t, y) -> x with f_X(t, x) = y

    SpaceTimePoint operator()(const SpaceTimePoint& p) const { return {time_map(p.t), space_map(p.t, p.x)}; }
    bool has_inverse() const { return static_cast<bool>(inverse_space_map); }
    /// Solves f_T(t) = target.
    double preimage_time(double target) const;
};

CausalTransform identity_transform();
/// (g . f)(t, x) = g(f(t, x)).
CausalTransform compose(const CausalTransform& g, const CausalTransform& f);
CausalTransform inverse(const CausalTransform& f);

namespace transforms {
/// f(t, x) = (t + t_shift, R x - v0 t + x_shift); f+(v) = R v - v0.
CausalTransform galilean(const Mat3& rotation, const Vec3& v0, double t_shift = 0.0,
                         const Vec3& x_shift = Vec3::Zero());
CausalTransform boost(const Vec3& v0);
/// f(t, x) = (a t, a x); f+(v) = v.
CausalTransform scale(double a);
/// f(t, x) = (t, x + c log(1 + t) axis); asymptotically identical.
CausalTransform log_drift(double c, const Vec3& axis = Vec3::UnitX());
/// f(t, x) = (t, x / t); f+ = 0, inverse not asymptotically regular.
CausalTransform shear_over_t();
/// f(t, x) = (t, t x); not asymptotically regular anywhere.
CausalTransform time_stretch();
/// Rotation about z by theta_inf * t / (1 + t); f+ = R_z(theta_inf).
CausalTransform swirl(double theta_inf);
/// f(t, x) = (t, x + v0 t sin(omega t)); not asymptotically regular.
CausalTransform sine_boost(const Vec3& v0, double omega);
/// f(t, x) = (t, 2 x)-style linear scaling of space only; f+(v) = a v.
CausalTransform space_scale(double a);
}  // namespace transforms

struct DecadeEstimate {
    double T = 0.0;  // right end of the window
    Vec3 value = Vec3::Zero();
    double residual = 0.0;  // |gamma(T)/T - value|
};

struct AsymptoticVelocityEstimate {
    Vec3 value = Vec3::Zero();
    double residual = 0.0;
    double decade_delta = 0.0;  // |estimate(T) - estimate(T/10)|
    bool converged = false;
    std::vector<DecadeEstimate> decades;  // most recent window first
};

/// Limit of gamma(t)/t from the tail of the samples. Throws NotConverged when
/// no tail model fits the latest window and the misfit is not shrinking
/// (oscillation), and TooFewSamples when the record spans less than a decade.
AsymptoticVelocityEstimate estimate_asymptotic_velocity(const SampledTrajectory& traj, double tol);

/// Per-trajectory estimates stacked into a 3N vector.
Eigen::VectorXd estimate_asymptotic_velocity(const NBigBang& bigbang, double tol);

/// Maps every sample through f. Throws NonCausal when output times are not
/// strictly increasing.
SampledTrajectory apply_transform(const CausalTransform& f, const SampledTrajectory& traj);
NBigBang apply_transform(const CausalTransform& f, const NBigBang& bigbang);

struct RayOptions {
    double t_start = 1.0;
    double t_end = 1e6;
    double ratio = 1.25;
};

struct AsymptoticTransformEstimate {
    Vec3 value = Vec3::Zero();
    std::optional<Vec3> analytic;
    double discrepancy = 0.0;  // |value - analytic| when analytic is known
    double residual = 0.0;
};

/// omega(f(v^c)) for the ray v^c(t) = v t. Throws NotRegular if the limit
/// does not settle.
AsymptoticTransformEstimate estimate_asymptotic_transform(const CausalTransform& f, const Vec3& v, double tol,
                                                          const RayOptions& ray = {});

enum class TransformClass { AsymptoticallyIdentical, AsymptoticallyEuclidean, Other };

struct TransformClassification {
    TransformClass kind = TransformClass::Other;
    Mat3 rotation = Mat3::Identity();
    Vec3 v0 = Vec3::Zero();
    double orthogonality_defect = 0.0;  // max |R^T R - I|
    double fit_residual = 0.0;          // max |R v - v0 - f+(v)|
    bool used_analytic = false;
};

/// {0, ±e_i, ±(e_i + e_j)/sqrt(2)}: 13 unit-or-zero probes.
std::vector<Vec3> default_probe_velocities();

/// Fits f+(v) ~ R v - v0 over the probes. Uses the analytic f+ when present
/// and `prefer_analytic`, otherwise the estimator.
TransformClassification classify_transform(const CausalTransform& f, std::span<const Vec3> probes, double tol,
                                           bool prefer_analytic = true, const RayOptions& ray = {});

template <typename Scalar>
struct CompactPoint {
    Scalar s;
    Eigen::Matrix<Scalar, 3, 1> w;
};

/// h(t, x) = (1/t, x/t) onto F+.
template <typename Scalar>
CompactPoint<Scalar> compactify(Scalar t, const Eigen::Matrix<Scalar, 3, 1>& x);
template <typename Scalar>
std::pair<Scalar, Eigen::Matrix<Scalar, 3, 1>> decompactify(const CompactPoint<Scalar>& p);

CompactPoint<double> compactify(const SpaceTimePoint& p);
SpaceTimePoint decompactify(const CompactPoint<double>& p);

struct SandwichReport {
    std::vector<double> times;
    std::vector<bool> outer;  // f(I^c)(t) within I_{+eps}^c(t)
    std::vector<bool> inner;  // I_{-eps}^c(t) covered by f(I^c)(t)
    std::vector<double> max_displacement;  // sup_v |f(v^c)(t)/t - v|_inf
    std::optional<double> t0;  // first tested t from which both hold for all later t

    bool holds(std::size_t i) const { return outer[i] && inner[i]; }
};

/// Tests I_{-eps}^c(t) ⊆ f(I^c)(t) ⊆ I_{+eps}^c(t) on sampled velocities.
SandwichReport cone_sandwich_check(const CausalTransform& f, const IntervalBox& box, double eps,
                                   std::span<const double> times, int samples_per_axis = 5);

}  // namespace aml

#include "aml/detail/compactify_impl.hpp"
