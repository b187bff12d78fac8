#pragma once

// Box-discretised measures: transfer along maps, the corrected transfer
// through the flow X_t, quotient measures, and the pi_C / pi_Q / mu_C / mu_Q
// comparison.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aml/classical.hpp"
#include "aml/geometry.hpp"
#include "aml/quantum.hpp"

namespace aml {

struct WeightedBox {
    IntervalBox box;
    double mass = 0.0;
};

/// Masses on non-overlapping boxes, spread uniformly inside each box.
/// Zero-volume boxes hold atoms.
class DiscreteMeasure {
public:
    explicit DiscreteMeasure(int dimension = 1) : dim_(dimension) {}

    void add(const IntervalBox& box, double mass);
    /// Uniform density over `cells` per axis covering `window`.
    static DiscreteMeasure uniform(const IntervalBox& window, int cells, double density);

    int dimension() const { return dim_; }
    const std::vector<WeightedBox>& support() const { return support_; }
    std::size_t size() const { return support_.size(); }
    double total() const;
    /// Mass inside `query`, pro rata by overlap volume.
    double mass_of(const IntervalBox& query) const;

private:
    int dim_;
    std::vector<WeightedBox> support_;
};

struct MeasurableMap {
    using Forward = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
    std::string name;
    int dim_in = 1;
    int dim_out = 1;
    Forward forward;
    bool admits_pullback = true;
};

MeasurableMap identity_map(int dim);
/// v -> a v + b componentwise.
MeasurableMap affine_map(double a, double b, int dim = 1);
/// Trajectory-consistent omega_V for the barrier: sign(v) sqrt(v^2 + 2 V0 / m), 0 -> 0.
MeasurableMap barrier_omega_V(double m, double V0);

struct PushforwardOptions {
    double resolution_ratio = 8.0;  // leaves need image diameter below target side / ratio
                                    // and an image inside a single target
    int max_level = -1;             // defaults to 40 in 1D, 12 otherwise
    double mass_tolerance = 1e-12;  // relative to the total, for leaves left straddling
};

struct PushforwardResult {
    DiscreteMeasure measure;
    double unassigned_mass = 0.0;  // landed outside every target box
};

/// mu_B(Delta_B) = mu_A(f^-1(Delta_B)) on the given target partition.
PushforwardResult pushforward(const DiscreteMeasure& mu, const MeasurableMap& f, std::span<const IntervalBox> targets,
                              const PushforwardOptions& opts = {});

/// Image of a 1D box as merged intervals and atoms, splitting at jumps.
struct ImageSet {
    std::vector<IntervalBox> intervals;
    std::vector<double> atoms;
};

ImageSet image_set_1d(const MeasurableMap& f, const IntervalBox& box, int max_level = 48);

/// mu_A(Delta_A) = mu_B(f(Delta_A)) for 1D maps. Throws DiscontinuityDetected
/// when bisection finds a piece whose image does not shrink with it.
DiscreteMeasure pullback(const DiscreteMeasure& mu_target, const MeasurableMap& f,
                         std::span<const IntervalBox> source_boxes);

using IntervalMass = std::function<double(const IntervalBox&)>;

/// The naive transfer mu(f(Delta)) with f(Delta) built by image_set_1d.
double naive_transfer(const IntervalMass& mu, const MeasurableMap& f, const IntervalBox& box);

/// eta_Qt on a position-space region at time t.
using EtaProvider = std::function<double(double t, const IntervalBox& region)>;
/// X_t(v_I): position at time t of the trajectory with initial velocity v_I.
using FlowMap = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& v_I)>;

EtaProvider snapshot_provider(const Snapshots& snaps);
FlowMap free_flow();
FlowMap barrier_flow(double m, double V0, double a);

struct TransferReport {
    std::vector<double> t;
    std::vector<double> values;
    std::vector<IntervalBox> images;
    double value = 0.0;
    double last_decade_delta = 0.0;
};

/// pi_Q(Delta_I) = lim eta_Qt[X_t(Delta_I)]; the image is the bounding box of
/// sampled X_t values, exact when X_t is monotone along each axis.
TransferReport corrected_transfer(const EtaProvider& eta, const FlowMap& X, const IntervalBox& box_I,
                                  std::span<const double> t_list, int samples_per_axis = 257);

struct GroupActionSpec {
    enum class Kind { TranslationsAlongAxis, EuclideanOnV };
    Kind kind = Kind::TranslationsAlongAxis;
    int axis = 0;        // translated axis; the transversal B runs along the other one
    double g_lo = 0.0;   // parameter window Delta_G (shift, or rotation angle)
    double g_hi = 1.0;
    double transversal_offset = 0.0;  // position of B along the action

    double haar_mass() const { return g_hi - g_lo; }
    void validate() const;
};

struct QuotientOptions {
    double invariance_tolerance = 1e-9;
    double window_tolerance = 1e-9;
    int sector_subsamples = 64;  // per axis per box, rotations only
};

struct QuotientResult {
    DiscreteMeasure nu;
    double window_defect = 0.0;  // max |nu(Delta_B; Delta_G) - nu(Delta_B; Delta_G')|
};

/// nu(Delta_B) = mu[k(Delta_B x Delta_G)] / mu_H(Delta_G) on A = R^2. For
/// rotations B is the positive ray at angle `transversal_offset`, Delta_B a radial interval.
QuotientResult quotient_measure(const DiscreteMeasure& mu, const GroupActionSpec& action,
                                std::span<const IntervalBox> b_boxes, const QuotientOptions& opts = {});

/// Uniform measure with density prod_i m_i^(dim/N) / (2 pi)^dim on the window.
DiscreteMeasure build_pi_C(const IntervalBox& window, std::span<const double> masses, int cells_per_axis = 1);

struct NcdicRow {
    IntervalBox box;
    double pi_C = 0.0;
    double pi_Q = 0.0;
    double mu_C = 0.0;
    double mu_Q = 0.0;
    double gap = 0.0;  // pi_Q - pi_C
    double pi_Q_delta = 0.0;
};

/// 1D comparison for a free particle or the square barrier. The quantum
/// quantities come from the snapshots of a point source, the classical ones
/// from pi_C and omega_V.
std::vector<NcdicRow> ncdic_report(const Snapshots& snaps, const PotentialSpec& potential,
                                   std::span<const IntervalBox> boxes);

}  // namespace aml
