#include "aml/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "aml/errors.hpp"
#include "aml/numerics.hpp"

namespace aml {

// ---------------------------------------------------------------------------
// IntervalBox

IntervalBox::IntervalBox(Eigen::VectorXd lo, Eigen::VectorXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.size() == 0)
        throw std::invalid_argument("IntervalBox: lo/hi dimension mismatch");
    if (!lo_.allFinite() || !hi_.allFinite()) throw std::invalid_argument("IntervalBox: non-finite bounds");
    if ((hi_.array() < lo_.array()).any()) throw std::invalid_argument("IntervalBox: hi < lo");
}

IntervalBox IntervalBox::interval(double lo, double hi) {
    return IntervalBox(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi));
}

IntervalBox IntervalBox::cube(const Vec3& lo, const Vec3& hi) { return IntervalBox(lo, hi); }

bool IntervalBox::contains(const Eigen::VectorXd& p) const {
    return (p.array() > lo_.array()).all() && (p.array() <= hi_.array()).all();
}

bool IntervalBox::contains_closed(const Eigen::VectorXd& p, double slack) const {
    return (p.array() >= lo_.array() - slack).all() && (p.array() <= hi_.array() + slack).all();
}

IntervalBox IntervalBox::shrunk(double eps) const {
    if (!(eps >= 0.0) || 2.0 * eps >= min_side()) throw std::invalid_argument("IntervalBox::shrunk: eps too large");
    return IntervalBox(lo_.array() + eps, hi_.array() - eps);
}

IntervalBox IntervalBox::grown(double eps) const {
    if (!(eps >= 0.0)) throw std::invalid_argument("IntervalBox::grown: eps must be >= 0");
    return IntervalBox(lo_.array() - eps, hi_.array() + eps);
}

IntervalBox IntervalBox::scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("IntervalBox::scaled: factor must be positive");
    return IntervalBox(lo_ * factor, hi_ * factor);
}

IntervalBox IntervalBox::translated(const Eigen::VectorXd& shift) const {
    return IntervalBox(lo_ + shift, hi_ + shift);
}

double IntervalBox::overlap_volume(const IntervalBox& other) const {
    if (other.dimension() != dimension()) throw std::invalid_argument("overlap_volume: dimension mismatch");
    const Eigen::ArrayXd lo = lo_.array().max(other.lo_.array());
    const Eigen::ArrayXd hi = hi_.array().min(other.hi_.array());
    return (hi - lo).max(0.0).prod();
}

// ---------------------------------------------------------------------------
// Trajectories

SampledTrajectory::SampledTrajectory(std::vector<double> times, Eigen::Matrix3Xd positions)
    : times_(std::move(times)), positions_(std::move(positions)) {
    if (times_.size() < 2) throw TooFewSamples("SampledTrajectory: need at least 2 samples");
    if (static_cast<Eigen::Index>(times_.size()) != positions_.cols())
        throw std::invalid_argument("SampledTrajectory: times/positions size mismatch");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i])) throw std::invalid_argument("SampledTrajectory: non-finite time");
        if (i > 0 && !(times_[i] > times_[i - 1]))
            throw std::invalid_argument("SampledTrajectory: times must be strictly increasing");
    }
    if (!positions_.allFinite()) throw std::invalid_argument("SampledTrajectory: non-finite position");
}

SampledTrajectory SampledTrajectory::sample(const std::function<Vec3(double)>& curve, double t0, double t_final,
                                            double ratio) {
    std::vector<double> times = numerics::geometric_grid(t0, t_final, ratio);
    Eigen::Matrix3Xd pos(3, static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) pos.col(static_cast<Eigen::Index>(i)) = curve(times[i]);
    return SampledTrajectory(std::move(times), std::move(pos));
}

NBigBang::NBigBang(SpaceTimePoint origin, std::vector<SampledTrajectory> trajectories, double min_separation)
    : origin_(std::move(origin)), trajectories_(std::move(trajectories)) {
    if (trajectories_.empty()) throw std::invalid_argument("NBigBang: no trajectories");
    for (const auto& tr : trajectories_) {
        const double scale = std::max(1.0, std::abs(origin_.t));
        if (std::abs(tr.t0() - origin_.t) > 1e-12 * scale || (tr.position(0) - origin_.x).norm() > 1e-12 * scale)
            throw std::invalid_argument("NBigBang: trajectory does not start at the common origin");
    }
    for (std::size_t i = 0; i < trajectories_.size(); ++i) {
        for (std::size_t j = i + 1; j < trajectories_.size(); ++j) {
            const auto& a = trajectories_[i];
            const auto& b = trajectories_[j];
            Eigen::Index p = 1, q = 1;
            while (p < a.size() && q < b.size()) {
                const double ta = a.times()[static_cast<std::size_t>(p)];
                const double tb = b.times()[static_cast<std::size_t>(q)];
                if (std::abs(ta - tb) <= 1e-12 * std::max(1.0, std::abs(ta))) {
                    if ((a.position(p) - b.position(q)).norm() < min_separation)
                        throw std::invalid_argument("NBigBang: trajectories " + std::to_string(i) + " and " +
                                                    std::to_string(j) + " meet at t=" + std::to_string(ta));
                    ++p;
                    ++q;
                } else if (ta < tb) {
                    ++p;
                } else {
                    ++q;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Causal transforms

double CausalTransform::preimage_time(double target) const {
    if (inverse_time_map) return inverse_time_map(target);
    const double lo = target > 0 ? 0.5 * target : target - 1.0;
    const double hi = target > 0 ? 2.0 * target : target + 1.0;
    return numerics::invert_increasing(time_map, target, lo, hi);
}

CausalTransform identity_transform() {
    CausalTransform f;
    f.name = "identity";
    f.time_map = [](double t) { return t; };
    f.space_map = [](double, const Vec3& x) { return x; };
    f.analytic_plus = [](const Vec3& v) { return v; };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = f.space_map;
    return f;
}

CausalTransform compose(const CausalTransform& g, const CausalTransform& f) {
    CausalTransform h;
    h.name = g.name + "*" + f.name;
    h.time_map = [g, f](double t) { return g.time_map(f.time_map(t)); };
    h.space_map = [g, f](double t, const Vec3& x) { return g.space_map(f.time_map(t), f.space_map(t, x)); };
    if (f.analytic_plus && g.analytic_plus) {
        h.analytic_plus = [gp = *g.analytic_plus, fp = *f.analytic_plus](const Vec3& v) { return gp(fp(v)); };
    }
    if (f.has_inverse() && g.has_inverse()) {
        h.inverse_time_map = [g, f](double t) { return f.preimage_time(g.preimage_time(t)); };
        h.inverse_space_map = [g, f](double t, const Vec3& y) {
            const double s = f.time_map(t);
            return f.inverse_space_map(t, g.inverse_space_map(s, y));
        };
    }
    return h;
}

CausalTransform inverse(const CausalTransform& f) {
    if (!f.has_inverse()) throw std::invalid_argument("inverse: transform '" + f.name + "' has no inverse map");
    CausalTransform inv;
    inv.name = f.name + "^-1";
    inv.time_map = [f](double t) { return f.preimage_time(t); };
    inv.space_map = [f](double t, const Vec3& y) { return f.inverse_space_map(f.preimage_time(t), y); };
    inv.inverse_time_map = f.time_map;
    inv.inverse_space_map = [f](double t, const Vec3& x) { return f.space_map(t, x); };
    return inv;
}

// ---------------------------------------------------------------------------
// Asymptotic velocity

namespace {

struct Window {
    std::vector<double> t;
    std::vector<Vec3> x;
};

Window collect_window(const SampledTrajectory& traj, double t_lo, double t_hi) {
    Window w;
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        const double t = traj.times()[static_cast<std::size_t>(i)];
        if (t > 0 && t >= t_lo * (1 - 1e-12) && t <= t_hi * (1 + 1e-12)) {
            w.t.push_back(t);
            w.x.push_back(traj.position(i));
        }
    }
    return w;
}

// Richardson-style estimate of lim x(t)/t on one window. Three tail models
// are fitted per component: a bounded perturbation (x = v t + b), a power-law
// decay of x/t, and a logarithmic drift (x = v t + c log t + b, the Coulomb
// tail). A richer model replaces the line fit only when it explains the data
// clearly better, so oscillating perturbations fall back to the line fit.
// `misfit` is the largest deviation of x/t from the chosen model.
struct WindowFit {
    Vec3 value = Vec3::Zero();
    double misfit = 0.0;
};

WindowFit window_estimate(const Window& w) {
    if (w.t.size() < 4) throw TooFewSamples("estimate_asymptotic_velocity: fewer than 4 samples in a window");
    WindowFit out;
    const std::size_t n = w.t.size();
    const Eigen::Index ni = static_cast<Eigen::Index>(n);
    std::vector<double> xs(n), qs(n);
    Eigen::MatrixXd dev(3, ni);
    Eigen::MatrixXd logdesign(ni, 3);
    for (std::size_t i = 0; i < n; ++i)
        logdesign.row(static_cast<Eigen::Index>(i)) << 1.0, std::log(w.t[i]) / w.t[i], 1.0 / w.t[i];
    const auto logqr = logdesign.colPivHouseholderQr();

    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd q(ni);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = w.x[i](c);
            qs[i] = xs[i] / w.t[i];
            q(static_cast<Eigen::Index>(i)) = qs[i];
        }
        const auto line = numerics::fit_line(w.t, xs);
        Eigen::VectorXd best_dev(ni);
        for (std::size_t i = 0; i < n; ++i)
            best_dev(static_cast<Eigen::Index>(i)) = (xs[i] - line.slope * w.t[i] - line.intercept) / w.t[i];
        double best_sse = best_dev.squaredNorm();
        out.value(c) = line.slope;

        const auto power = numerics::fit_power_tail(w.t, qs);
        if (power.sse < 0.25 * best_sse) {
            out.value(c) = power.limit;
            for (std::size_t i = 0; i < n; ++i)
                best_dev(static_cast<Eigen::Index>(i)) =
                    qs[i] - power.limit - power.coeff * std::pow(w.t[i], -power.exponent);
            best_sse = best_dev.squaredNorm();
        }
        const Eigen::Vector3d coef = logqr.solve(q);
        const Eigen::VectorXd log_dev = q - logdesign * coef;
        if (log_dev.squaredNorm() < 0.05 * best_sse) {
            out.value(c) = coef(0);
            best_dev = log_dev;
        }
        dev.row(c) = best_dev.transpose();
    }
    out.misfit = dev.colwise().norm().maxCoeff();
    return out;
}

}  // namespace

AsymptoticVelocityEstimate estimate_asymptotic_velocity(const SampledTrajectory& traj, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("estimate_asymptotic_velocity: tol must be positive");
    double t_min = std::numeric_limits<double>::infinity();
    for (double t : traj.times())
        if (t > 0) {
            t_min = t;
            break;
        }
    const double T = traj.final_time();
    if (!std::isfinite(t_min) || T < 10.0 * t_min * (1 - 1e-12))
        throw TooFewSamples("estimate_asymptotic_velocity: record must span at least a decade of positive time");

    const double span = T / t_min;
    const double width = span >= 100.0 * (1 - 1e-12) ? 10.0 : std::sqrt(span);
    const int n_windows = span >= 1000.0 * (1 - 1e-12) ? 3 : 2;

    std::vector<double> misfit;
    AsymptoticVelocityEstimate est;
    for (int k = 0; k < n_windows; ++k) {
        const double hi = T / std::pow(width, k);
        Window w = collect_window(traj, hi / width, hi);
        DecadeEstimate d;
        d.T = hi;
        const WindowFit fit = window_estimate(w);
        d.value = fit.value;
        d.residual = (w.x.back() / w.t.back() - d.value).norm();
        est.decades.push_back(d);
        misfit.push_back(fit.misfit);
    }

    est.value = est.decades[0].value;
    est.residual = est.decades[0].residual;
    est.decade_delta = (est.decades[0].value - est.decades[1].value).norm();
    est.converged = est.decade_delta < tol;

    // Neither tail model describes gamma(t)/t and the misfit is not shrinking:
    // the record oscillates (or grows) instead of settling.
    if (misfit[0] >= tol && misfit[0] > 0.5 * misfit[1])
        throw NotConverged("estimate_asymptotic_velocity: gamma(t)/t oscillates without settling "
                           "(misfit " + std::to_string(misfit[0]) + " vs " + std::to_string(misfit[1]) +
                           " one window earlier)");
    return est;
}

Eigen::VectorXd estimate_asymptotic_velocity(const NBigBang& bigbang, double tol) {
    Eigen::VectorXd out(3 * static_cast<Eigen::Index>(bigbang.size()));
    for (std::size_t i = 0; i < bigbang.size(); ++i)
        out.segment<3>(3 * static_cast<Eigen::Index>(i)) =
            estimate_asymptotic_velocity(bigbang.trajectories()[i], tol).value;
    return out;
}

SampledTrajectory apply_transform(const CausalTransform& f, const SampledTrajectory& traj) {
    std::vector<double> times(static_cast<std::size_t>(traj.size()));
    Eigen::Matrix3Xd pos(3, traj.size());
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        const auto p = f(traj.point(i));
        times[static_cast<std::size_t>(i)] = p.t;
        pos.col(i) = p.x;
        if (i > 0 && !(times[static_cast<std::size_t>(i)] > times[static_cast<std::size_t>(i - 1)]))
            throw NonCausal("apply_transform: '" + f.name + "' does not preserve time ordering at t=" +
                            std::to_string(traj.times()[static_cast<std::size_t>(i)]));
    }
    return SampledTrajectory(std::move(times), std::move(pos));
}

NBigBang apply_transform(const CausalTransform& f, const NBigBang& bigbang) {
    std::vector<SampledTrajectory> out;
    out.reserve(bigbang.size());
    for (const auto& tr : bigbang.trajectories()) out.push_back(apply_transform(f, tr));
    return NBigBang(f(bigbang.origin()), std::move(out));
}

AsymptoticTransformEstimate estimate_asymptotic_transform(const CausalTransform& f, const Vec3& v, double tol,
                                                          const RayOptions& ray) {
    const auto ray_traj = SampledTrajectory::sample([&](double t) -> Vec3 { return v * t; }, ray.t_start,
                                                    ray.t_end, ray.ratio);
    AsymptoticTransformEstimate out;
    try {
        const auto est = estimate_asymptotic_velocity(apply_transform(f, ray_traj), tol);
        if (!est.converged)
            throw NotRegular("estimate_asymptotic_transform: '" + f.name + "' has no settled limit at v=(" +
                             std::to_string(v.x()) + "," + std::to_string(v.y()) + "," + std::to_string(v.z()) +
                             ")");
        out.value = est.value;
        out.residual = est.residual;
    } catch (const NotConverged& e) {
        throw NotRegular("estimate_asymptotic_transform: '" + f.name + "' is not asymptotically regular: " +
                         e.what());
    }
    if (f.analytic_plus) {
        out.analytic = (*f.analytic_plus)(v);
        out.discrepancy = (out.value - *out.analytic).norm();
    }
    return out;
}

std::vector<Vec3> default_probe_velocities() {
    std::vector<Vec3> probes{Vec3::Zero()};
    for (int i = 0; i < 3; ++i) {
        probes.push_back(Vec3::Unit(i));
        probes.push_back(-Vec3::Unit(i));
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const Vec3 d = (Vec3::Unit(i) + Vec3::Unit(j)) / std::numbers::sqrt2;
            probes.push_back(d);
            probes.push_back(-d);
        }
    return probes;
}

TransformClassification classify_transform(const CausalTransform& f, std::span<const Vec3> probes, double tol,
                                           bool prefer_analytic, const RayOptions& ray) {
    if (probes.size() < 13) throw std::invalid_argument("classify_transform: need at least 13 probe velocities");
    TransformClassification out;
    out.used_analytic = prefer_analytic && f.analytic_plus.has_value();

    const Eigen::Index n = static_cast<Eigen::Index>(probes.size());
    Eigen::MatrixXd design(n, 4);
    Eigen::MatrixXd images(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& v = probes[static_cast<std::size_t>(i)];
        const Vec3 w = out.used_analytic ? (*f.analytic_plus)(v) : estimate_asymptotic_transform(f, v, tol, ray).value;
        design.row(i) << v.transpose(), 1.0;
        images.row(i) = w.transpose();
    }
    const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(images);  // 4 x 3
    out.rotation = coef.topRows<3>().transpose();
    out.v0 = -coef.row(3).transpose();
    out.orthogonality_defect = (out.rotation.transpose() * out.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    out.fit_residual = (design * coef - images).cwiseAbs().maxCoeff();

    if (out.orthogonality_defect < tol && out.fit_residual < tol) {
        const bool identity = (out.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
                              out.v0.cwiseAbs().maxCoeff() < tol;
        out.kind = identity ? TransformClass::AsymptoticallyIdentical : TransformClass::AsymptoticallyEuclidean;
    }
    return out;
}

CompactPoint<double> compactify(const SpaceTimePoint& p) { return compactify<double>(p.t, p.x); }

SpaceTimePoint decompactify(const CompactPoint<double>& p) {
    const auto [t, x] = decompactify<double>(p);
    return {t, x};
}

// ---------------------------------------------------------------------------
// Cone sandwich

namespace {

std::vector<Eigen::VectorXd> box_samples(const IntervalBox& box, int per_axis) {
    const Eigen::Index k = box.dimension();
    std::vector<Eigen::VectorXd> pts;
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    while (true) {
        Eigen::VectorXd p(k);
        for (Eigen::Index d = 0; d < k; ++d)
            p(d) = box.lo()(d) + box.sides()(d) * idx[static_cast<std::size_t>(d)] / (per_axis - 1);
        pts.push_back(p);
        Eigen::Index d = 0;
        while (d < k && ++idx[static_cast<std::size_t>(d)] == per_axis) idx[static_cast<std::size_t>(d++)] = 0;
        if (d == k) break;
    }
    return pts;
}

Vec3 embed(const Eigen::VectorXd& v) {
    Vec3 out = Vec3::Zero();
    out.head(v.size()) = v;
    return out;
}

}  // namespace

SandwichReport cone_sandwich_check(const CausalTransform& f, const IntervalBox& box, double eps,
                                   std::span<const double> times, int samples_per_axis) {
    if (box.dimension() > 3) throw std::invalid_argument("cone_sandwich_check: box dimension must be <= 3");
    if (!box.is_proper() || !(eps > 0) || !(eps < 0.5 * box.min_side()))
        throw std::invalid_argument("cone_sandwich_check: need 0 < eps < min side / 2");
    if (samples_per_axis < 2) throw std::invalid_argument("cone_sandwich_check: samples_per_axis must be >= 2");

    const Eigen::Index k = box.dimension();
    const IntervalBox outer_box = box.grown(eps);
    const IntervalBox inner_box = box.shrunk(eps);
    const auto velocity_samples = box_samples(box, samples_per_axis);
    const auto inner_samples = box_samples(inner_box, samples_per_axis);

    SandwichReport rep;
    for (double t : times) {
        if (!(t > 0)) throw NonPositiveTime("cone_sandwich_check: times must be positive");
        const double tp = f.preimage_time(t);
        if (std::abs(f.time_map(tp) - t) > 1e-9 * std::max(1.0, t))
            throw NonCausal("cone_sandwich_check: cannot invert f_T at t=" + std::to_string(t));
        bool outer_ok = true;
        double max_disp = 0;
        for (const auto& v : velocity_samples) {
            const Eigen::VectorXd u = f.space_map(tp, embed(v) * tp).head(k) / t;
            max_disp = std::max(max_disp, (u - v).cwiseAbs().maxCoeff());
            if (!outer_box.contains_closed(u, 1e-12)) outer_ok = false;
        }
        bool inner_ok = true;
        if (f.has_inverse()) {
            for (const auto& w : inner_samples) {
                const Eigen::VectorXd x = f.inverse_space_map(tp, embed(w) * t).head(k) / tp;
                if (!box.contains_closed(x, 1e-12)) inner_ok = false;
            }
        } else {
            // A continuous map moving every point of the closed box by at most
            // eps covers the box shrunk by eps.
            inner_ok = max_disp <= eps;
        }
        rep.times.push_back(t);
        rep.outer.push_back(outer_ok);
        rep.inner.push_back(inner_ok);
        rep.max_displacement.push_back(max_disp);
    }
    for (std::size_t i = rep.times.size(); i-- > 0;) {
        if (!rep.holds(i)) break;
        rep.t0 = rep.times[i];
    }
    return rep;
}

}  // namespace aml
