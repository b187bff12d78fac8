#include "aml/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "aml/errors.hpp"
#include "aml/parallel.hpp"

namespace aml {

namespace {

constexpr double kPi = std::numbers::pi;

// Corners plus centre of a box.
std::vector<Eigen::VectorXd> probe_points(const IntervalBox& b) {
    const Eigen::Index d = b.dimension();
    std::vector<Eigen::VectorXd> pts;
    for (long mask = 0; mask < (1L << d); ++mask) {
        Eigen::VectorXd p(d);
        for (Eigen::Index i = 0; i < d; ++i) p[i] = (mask >> i) & 1 ? b.hi()[i] : b.lo()[i];
        pts.push_back(p);
    }
    pts.push_back(b.center());
    return pts;
}

// Bounding box of the images of the probe points.
std::pair<Eigen::VectorXd, Eigen::VectorXd> image_bounds(const MeasurableMap& f, const IntervalBox& b) {
    Eigen::VectorXd lo, hi;
    bool first = true;
    for (const auto& p : probe_points(b)) {
        const Eigen::VectorXd y = f.forward(p);
        if (first) {
            lo = hi = y;
            first = false;
        } else {
            lo = lo.cwiseMin(y);
            hi = hi.cwiseMax(y);
        }
    }
    return {lo, hi};
}

// Whether the closed box [lo, hi] meets the half-open target.
bool meets(const IntervalBox& t, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return (lo.array() <= t.hi().array()).all() && (hi.array() > t.lo().array()).all();
}

std::vector<IntervalBox> split_box(const IntervalBox& b) {
    const Eigen::Index d = b.dimension();
    const Eigen::VectorXd mid = b.center();
    std::vector<IntervalBox> out;
    for (long mask = 0; mask < (1L << d); ++mask) {
        Eigen::VectorXd lo(d), hi(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const bool upper = (mask >> i) & 1;
            lo[i] = upper ? mid[i] : b.lo()[i];
            hi[i] = upper ? b.hi()[i] : mid[i];
        }
        out.emplace_back(lo, hi);
    }
    return out;
}

void check_non_overlapping(std::span<const IntervalBox> boxes) {
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j)
            if (boxes[i].dimension() == boxes[j].dimension() && boxes[i].overlap_volume(boxes[j]) > 0.0)
                throw ConfigError("boxes overlap");
}

// Merges intervals that touch or overlap.
std::vector<IntervalBox> merge_intervals(std::vector<std::pair<double, double>> iv) {
    std::sort(iv.begin(), iv.end());
    std::vector<IntervalBox> out;
    for (const auto& [lo, hi] : iv) {
        if (!out.empty() && lo <= out.back().hi()[0]) {
            if (hi > out.back().hi()[0]) out.back() = IntervalBox::interval(out.back().lo()[0], hi);
        } else {
            out.push_back(IntervalBox::interval(lo, hi));
        }
    }
    return out;
}

double f1(const MeasurableMap& f, double x) { return f.forward(Eigen::VectorXd::Constant(1, x))[0]; }

}  // namespace

void DiscreteMeasure::add(const IntervalBox& box, double mass) {
    if (box.dimension() != dim_) throw ConfigError("box dimension does not match the measure");
    if (!(mass >= 0.0)) throw ConfigError("measure masses must be non-negative");
    support_.push_back({box, mass});
}

DiscreteMeasure DiscreteMeasure::uniform(const IntervalBox& window, int cells, double density) {
    if (cells < 1) throw ConfigError("cells must be positive");
    const Eigen::Index d = window.dimension();
    DiscreteMeasure mu(static_cast<int>(d));
    const Eigen::VectorXd step = window.sides() / cells;
    long count = 1;
    for (Eigen::Index i = 0; i < d; ++i) count *= cells;
    for (long c = 0; c < count; ++c) {
        Eigen::VectorXd lo(d), hi(d);
        long rest = c;
        for (Eigen::Index i = 0; i < d; ++i) {
            const long k = rest % cells;
            rest /= cells;
            lo[i] = window.lo()[i] + step[i] * k;
            hi[i] = k + 1 == cells ? window.hi()[i] : window.lo()[i] + step[i] * (k + 1);
        }
        IntervalBox b(lo, hi);
        mu.add(b, density * b.volume());
    }
    return mu;
}

double DiscreteMeasure::total() const {
    double s = 0.0;
    for (const auto& w : support_) s += w.mass;
    return s;
}

double DiscreteMeasure::mass_of(const IntervalBox& query) const {
    if (query.dimension() != dim_) throw ConfigError("query dimension does not match the measure");
    double s = 0.0;
    for (const auto& w : support_) {
        if (w.mass == 0.0) continue;
        const double vol = w.box.volume();
        if (vol > 0.0)
            s += w.mass * w.box.overlap_volume(query) / vol;
        else if (query.contains(w.box.center()))
            s += w.mass;
    }
    return s;
}

MeasurableMap identity_map(int dim) {
    return {"identity", dim, dim, [](const Eigen::VectorXd& v) { return v; }, true};
}

MeasurableMap affine_map(double a, double b, int dim) {
    std::ostringstream os;
    os << "affine(" << a << "," << b << ")";
    return {os.str(), dim, dim,
            [a, b](const Eigen::VectorXd& v) -> Eigen::VectorXd { return (a * v.array() + b).matrix(); }, true};
}

MeasurableMap barrier_omega_V(double m, double V0) {
    return {"omega_V_barrier", 1, 1,
            [m, V0](const Eigen::VectorXd& v) {
                return Eigen::VectorXd::Constant(1, v[0] == 0.0 ? 0.0 : omega_V_from_trajectory(m, V0, v[0]));
            },
            true};
}

PushforwardResult pushforward(const DiscreteMeasure& mu, const MeasurableMap& f, std::span<const IntervalBox> targets,
                              const PushforwardOptions& opts) {
    if (mu.dimension() != f.dim_in) throw ConfigError("map domain dimension does not match the measure");
    for (const auto& t : targets)
        if (t.dimension() != f.dim_out) throw ConfigError("target box dimension does not match the map");
    check_non_overlapping(targets);

    double side = std::numeric_limits<double>::infinity();
    for (const auto& t : targets)
        if (t.is_proper()) side = std::min(side, t.min_side());
    const double resolution = std::isfinite(side) ? side / opts.resolution_ratio : 0.0;
    const int max_level = opts.max_level >= 0 ? opts.max_level : (f.dim_in == 1 ? 40 : 12);
    const double tol = opts.mass_tolerance * mu.total();

    const auto& support = mu.support();
    std::vector<std::vector<double>> per_source(support.size(), std::vector<double>(targets.size(), 0.0));
    std::vector<double> lost(support.size(), 0.0);

    parallel_for(support.size(), [&](std::size_t s) {
        auto assign = [&](const IntervalBox& b, double mass) {
            const Eigen::VectorXd y = f.forward(b.center());
            for (std::size_t k = 0; k < targets.size(); ++k)
                if (targets[k].contains(y)) {
                    per_source[s][k] += mass;
                    return;
                }
            lost[s] += mass;
        };
        auto recurse = [&](auto&& self, const IntervalBox& b, double mass, int level) -> void {
            if (mass == 0.0) return;
            if (!b.is_proper()) {
                assign(b, mass);
                return;
            }
            const auto [ylo, yhi] = image_bounds(f, b);
            const double diam = (yhi - ylo).maxCoeff();
            if (diam < resolution) {
                int hit = -1, count = 0;
                for (std::size_t k = 0; k < targets.size(); ++k)
                    if (meets(targets[k], ylo, yhi)) {
                        hit = static_cast<int>(k);
                        ++count;
                    }
                if (count == 0) {
                    lost[s] += mass;
                    return;
                }
                if (count == 1 && targets[hit].contains(ylo) && targets[hit].contains(yhi)) {
                    per_source[s][hit] += mass;
                    return;
                }
            }
            if (level >= max_level) {
                if (mass > tol) {
                    std::ostringstream os;
                    os << "mass " << mass << " still straddles target boundaries after " << level << " subdivisions";
                    throw UnresolvedBoundary(os.str());
                }
                assign(b, mass);
                return;
            }
            const auto kids = split_box(b);
            for (const auto& k : kids) self(self, k, mass / static_cast<double>(kids.size()), level + 1);
        };
        recurse(recurse, support[s].box, support[s].mass, 0);
    });

    PushforwardResult out{DiscreteMeasure(f.dim_out), 0.0};
    for (std::size_t k = 0; k < targets.size(); ++k) {
        double m = 0.0;
        for (std::size_t s = 0; s < support.size(); ++s) m += per_source[s][k];
        out.measure.add(targets[k], m);
    }
    for (double l : lost) out.unassigned_mass += l;
    return out;
}

ImageSet image_set_1d(const MeasurableMap& f, const IntervalBox& box, int max_level) {
    if (f.dim_in != 1 || f.dim_out != 1 || box.dimension() != 1) throw ConfigError("image sets are 1D only");
    ImageSet out;
    const double lo = box.lo()[0], hi = box.hi()[0];
    if (!(hi > lo)) {
        out.atoms.push_back(f1(f, hi));
        return out;
    }
    // Image resolution from a coarse scan of the range.
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (int i = 0; i <= 64; ++i) {
        const double y = f1(f, lo + (hi - lo) * i / 64.0);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    const double resolution = (ymax - ymin) / 16384.0;
    const double min_width = (hi - lo) * std::ldexp(1.0, -max_level);

    std::vector<std::pair<double, double>> pieces;
    auto recurse = [&](auto&& self, double a, double fa, double b, double fb) -> void {
        const double m = 0.5 * (a + b);
        const double fm = f1(f, m);
        const double d = std::max({fa, fm, fb}) - std::min({fa, fm, fb});
        if (d <= resolution) {
            pieces.emplace_back(std::min({fa, fm, fb}), std::max({fa, fm, fb}));
            return;
        }
        if (b - a <= min_width) {
            // The image did not shrink with the box: a jump.
            out.atoms.push_back(fm);
            return;
        }
        self(self, a, fa, m, fm);
        self(self, m, fm, b, fb);
    };
    recurse(recurse, lo, f1(f, lo), hi, f1(f, hi));
    out.intervals = merge_intervals(std::move(pieces));
    return out;
}

DiscreteMeasure pullback(const DiscreteMeasure& mu_target, const MeasurableMap& f,
                         std::span<const IntervalBox> source_boxes) {
    if (f.dim_in != 1 || f.dim_out != 1 || mu_target.dimension() != 1) throw ConfigError("pullback is 1D only");
    if (!f.admits_pullback) throw ConfigError(f.name + " does not admit pullback");
    check_non_overlapping(source_boxes);
    DiscreteMeasure out(1);
    std::vector<double> masses(source_boxes.size(), 0.0);
    parallel_for(source_boxes.size(), [&](std::size_t i) {
        const ImageSet img = image_set_1d(f, source_boxes[i]);
        if (source_boxes[i].is_proper() && !img.atoms.empty()) {
            std::ostringstream os;
            os << f.name << " is discontinuous inside (" << source_boxes[i].lo()[0] << ", "
               << source_boxes[i].hi()[0] << "]; use the corrected transfer";
            throw DiscontinuityDetected(os.str());
        }
        for (const auto& iv : img.intervals) masses[i] += mu_target.mass_of(iv);
    });
    for (std::size_t i = 0; i < source_boxes.size(); ++i) out.add(source_boxes[i], masses[i]);
    return out;
}

double naive_transfer(const IntervalMass& mu, const MeasurableMap& f, const IntervalBox& box) {
    const ImageSet img = image_set_1d(f, box);
    double s = 0.0;
    for (const auto& iv : img.intervals) s += mu(iv);
    for (double a : img.atoms) s += mu(IntervalBox::interval(a, a));
    return s;
}

EtaProvider snapshot_provider(const Snapshots& snaps) {
    return [&snaps](double t, const IntervalBox& region) {
        for (std::size_t k = 0; k < snaps.size(); ++k)
            if (std::abs(snaps.time(k) - t) <= 1e-12 * std::max(1.0, t)) return snaps.region_mass(k, region);
        std::ostringstream os;
        os << "no snapshot at t = " << t;
        throw ConfigError(os.str());
    };
}

FlowMap free_flow() {
    return [](double t, const Eigen::VectorXd& v) -> Eigen::VectorXd { return v * t; };
}

FlowMap barrier_flow(double m, double V0, double a) {
    return [m, V0, a](double t, const Eigen::VectorXd& v) {
        return Eigen::VectorXd::Constant(1, barrier_trajectory_oracle(m, V0, a, v[0], t));
    };
}

TransferReport corrected_transfer(const EtaProvider& eta, const FlowMap& X, const IntervalBox& box_I,
                                  std::span<const double> t_list, int samples_per_axis) {
    if (t_list.empty()) throw ConfigError("t_list is empty");
    if (samples_per_axis < 2) throw ConfigError("need at least 2 samples per axis");
    const Eigen::Index d = box_I.dimension();
    long count = 1;
    for (Eigen::Index i = 0; i < d; ++i) count *= samples_per_axis;

    TransferReport rep;
    for (double t : t_list) {
        if (!(t > 0.0)) throw NonPositiveTime("transfer times must be positive");
        Eigen::VectorXd lo, hi;
        for (long c = 0; c < count; ++c) {
            Eigen::VectorXd v(d);
            long rest = c;
            for (Eigen::Index i = 0; i < d; ++i) {
                const long k = rest % samples_per_axis;
                rest /= samples_per_axis;
                v[i] = box_I.lo()[i] + box_I.sides()[i] * static_cast<double>(k) / (samples_per_axis - 1);
            }
            const Eigen::VectorXd x = X(t, v);
            if (c == 0) {
                lo = hi = x;
            } else {
                lo = lo.cwiseMin(x);
                hi = hi.cwiseMax(x);
            }
        }
        const IntervalBox image(lo, hi);
        rep.t.push_back(t);
        rep.images.push_back(image);
        rep.values.push_back(box_I.is_proper() ? eta(t, image) : 0.0);
    }
    const std::size_t n = rep.t.size();
    std::size_t ref = 0;
    for (std::size_t k = 0; k + 1 < n; ++k)
        if (rep.t[k] <= rep.t.back() / 10.0 * (1.0 + 1e-9)) ref = k;
    rep.value = rep.values.back();
    rep.last_decade_delta =
        n > 1 ? std::abs(rep.values.back() - rep.values[ref]) : std::numeric_limits<double>::infinity();
    return rep;
}

void GroupActionSpec::validate() const {
    if (!(haar_mass() > 0.0) || !std::isfinite(haar_mass()))
        throw ConfigError("parameter window must have finite positive Haar mass");
    if (kind == Kind::TranslationsAlongAxis && axis != 0 && axis != 1) throw ConfigError("axis must be 0 or 1");
    if (kind == Kind::EuclideanOnV && haar_mass() > 2.0 * kPi) throw ConfigError("rotation window exceeds 2 pi");
}

namespace {

IntervalBox support_hull(const DiscreteMeasure& mu) {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(mu.dimension(), std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (const auto& w : mu.support()) {
        lo = lo.cwiseMin(w.box.lo());
        hi = hi.cwiseMax(w.box.hi());
    }
    return IntervalBox(lo, hi);
}

// mu of the annular sector r in (r0, r1], angle in (a0, a1], by sub-cell sampling.
double sector_mass(const DiscreteMeasure& mu, double r0, double r1, double a0, double a1, int sub) {
    double s = 0.0;
    for (const auto& w : mu.support()) {
        if (w.mass == 0.0) continue;
        const Eigen::VectorXd step = w.box.sides() / sub;
        int hits = 0;
        for (int i = 0; i < sub; ++i)
            for (int j = 0; j < sub; ++j) {
                const double x = w.box.lo()[0] + (i + 0.5) * step[0];
                const double y = w.box.lo()[1] + (j + 0.5) * step[1];
                const double r = std::hypot(x, y);
                if (r <= r0 || r > r1) continue;
                double a = std::atan2(y, x) - a0;
                a -= 2.0 * kPi * std::floor(a / (2.0 * kPi));
                if (a > 0.0 && a <= a1 - a0) ++hits;
            }
        s += w.mass * hits / (static_cast<double>(sub) * sub);
    }
    return s;
}

}  // namespace

QuotientResult quotient_measure(const DiscreteMeasure& mu, const GroupActionSpec& action,
                                std::span<const IntervalBox> b_boxes, const QuotientOptions& opts) {
    action.validate();
    if (mu.dimension() != 2) throw ConfigError("quotient measures act on R^2");
    for (const auto& b : b_boxes)
        if (b.dimension() != 1) throw ConfigError("transversal boxes are 1D");
    const IntervalBox hull = support_hull(mu);

    // mu[k(Delta_B x [g0, g1])] for the configured action.
    auto orbit_mass = [&](const IntervalBox& b, double g0, double g1, double offset) {
        if (action.kind == GroupActionSpec::Kind::TranslationsAlongAxis) {
            Eigen::Vector2d lo, hi;
            const int a = action.axis, o = 1 - action.axis;
            lo[a] = offset + g0;
            hi[a] = offset + g1;
            lo[o] = b.lo()[0];
            hi[o] = b.hi()[0];
            return mu.mass_of(IntervalBox(lo, hi));
        }
        return sector_mass(mu, b.lo()[0], b.hi()[0], offset + g0, offset + g1, opts.sector_subsamples);
    };

    const double g0 = action.g_lo, g1 = action.g_hi, h = action.haar_mass();
    // Second window: doubled when the orbit stays inside the support, halved otherwise.
    double g1b = g0 + 2.0 * h;
    if (action.kind == GroupActionSpec::Kind::TranslationsAlongAxis) {
        const int a = action.axis;
        if (action.transversal_offset + g1b > hull.hi()[a]) g1b = g0 + 0.5 * h;
    } else if (2.0 * h > 2.0 * kPi) {
        g1b = g0 + 0.5 * h;
    }

    QuotientResult out{DiscreteMeasure(1), 0.0};
    for (const auto& b : b_boxes) {
        const double m = orbit_mass(b, g0, g1, action.transversal_offset);
        // Invariance: the same orbit piece shifted by a quarter window.
        const double shifted = orbit_mass(b, g0 + 0.25 * h, g1 + 0.25 * h, action.transversal_offset);
        if (std::abs(shifted - m) > opts.invariance_tolerance * std::max(1.0, std::abs(m))) {
            std::ostringstream os;
            os << "measure is not invariant under the action: " << m << " vs " << shifted;
            throw NotInvariant(os.str());
        }
        const double nu = m / h;
        const double nu2 = orbit_mass(b, g0, g1b, action.transversal_offset) / (g1b - g0);
        out.window_defect = std::max(out.window_defect, std::abs(nu - nu2));
        out.nu.add(b, nu);
    }
    if (out.window_defect > opts.window_tolerance * std::max(1.0, out.nu.total()))
        throw NotInvariant("quotient measure depends on the parameter window");
    return out;
}

DiscreteMeasure build_pi_C(const IntervalBox& window, std::span<const double> masses, int cells_per_axis) {
    const Eigen::Index dim = window.dimension();
    const auto N = static_cast<Eigen::Index>(masses.size());
    if (N == 0 || dim % N != 0) throw ConfigError("window dimension must be a multiple of the particle count");
    const double d_space = static_cast<double>(dim / N);
    double density = std::pow(2.0 * kPi, -static_cast<double>(dim));
    for (double m : masses) {
        if (!(m > 0.0)) throw ConfigError("masses must be positive");
        density *= std::pow(m, d_space);
    }
    return DiscreteMeasure::uniform(window, cells_per_axis, density);
}

std::vector<NcdicRow> ncdic_report(const Snapshots& snaps, const PotentialSpec& potential,
                                   std::span<const IntervalBox> boxes) {
    if (snaps.size() == 0) throw ConfigError("no snapshots");
    const GridState& last = snaps.states().back();
    if (last.dim != 1) throw ConfigError("the comparison is 1D");
    const double m = last.mass;

    FlowMap flow;
    MeasurableMap omega = identity_map(1);
    if (potential.is_zero()) {
        flow = free_flow();
    } else if (potential.kind == PotentialSpec::Kind::SquareBarrier) {
        flow = barrier_flow(m, potential.p1, potential.p2);
        omega = barrier_omega_V(m, potential.p1);
    } else {
        throw ConfigError("comparison supports the free particle and the square barrier");
    }

    std::vector<double> times;
    for (std::size_t k = 0; k < snaps.size(); ++k) times.push_back(snaps.time(k));
    const EtaProvider eta = snapshot_provider(snaps);

    std::vector<NcdicRow> rows(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        NcdicRow& r = rows[i];
        r.box = boxes[i];
        if (boxes[i].dimension() != 1) throw ConfigError("comparison boxes are 1D");
        if (!boxes[i].is_proper()) continue;
        const double lo = boxes[i].lo()[0], hi = boxes[i].hi()[0];
        const double ms[] = {m};
        r.pi_C = build_pi_C(boxes[i], ms).total();
        const TransferReport tr = corrected_transfer(eta, flow, boxes[i], times);
        r.pi_Q = tr.value;
        r.pi_Q_delta = tr.last_decade_delta;
        r.mu_Q = snaps.cone_mass(snaps.size() - 1, boxes[i]);
        const double W = std::max(std::abs(lo), std::abs(hi)) + 1.0;
        const DiscreteMeasure piC = build_pi_C(IntervalBox::interval(-W, W), ms, 64);
        const IntervalBox target[] = {boxes[i]};
        r.mu_C = pushforward(piC, omega, target).measure.total();
        r.gap = r.pi_Q - r.pi_C;
    }
    return rows;
}

}  // namespace aml
