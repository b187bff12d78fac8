#include "aml/quantum.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "aml/errors.hpp"

namespace aml {

namespace {

constexpr double kPi = std::numbers::pi;

double interval_overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Fraction of each grid cell [x_j - dx/2, x_j + dx/2] inside [lo, hi].
Eigen::ArrayXd cell_weights(const GridState& g, double lo, double hi) {
    const double dx = g.dx();
    Eigen::ArrayXd w = Eigen::ArrayXd::Zero(g.n);
    if (!(hi > lo)) return w;
    const int j0 = std::max(0, static_cast<int>(std::floor((lo + g.L) / dx - 0.5)));
    const int j1 = std::min(g.n - 1, static_cast<int>(std::ceil((hi + g.L) / dx + 0.5)));
    for (int j = j0; j <= j1; ++j) {
        const double c = g.x(j);
        w[j] = interval_overlap(c - 0.5 * dx, c + 0.5 * dx, lo, hi) / dx;
    }
    return w;
}

double weighted_sum(const GridState& g, const Eigen::ArrayXd& w0, const Eigen::ArrayXd* w1) {
    if (g.dim == 1) return (g.psi.abs2() * w0).sum() * g.cell_volume();
    double s = 0.0;
    for (int i = 0; i < g.n; ++i) {
        if (w0[i] == 0.0) continue;
        s += w0[i] * (g.psi.segment(static_cast<Eigen::Index>(i) * g.n, g.n).abs2() * *w1).sum();
    }
    return s * g.cell_volume();
}

double wavenumber(int j, int n, double L) {
    const int k = j < (n + 1) / 2 ? j : j - n;
    return kPi / L * k;
}

class Fourier {
public:
    Fourier(int dim, int n) : dim_(dim), n_(n), buf_in_(n), buf_out_(n) {}

    void forward(Eigen::ArrayXcd& a) { apply(a, false); }
    void backward(Eigen::ArrayXcd& a) { apply(a, true); }

private:
    void line(bool inv) {
        if (inv)
            fft_.inv(buf_out_, buf_in_);
        else
            fft_.fwd(buf_out_, buf_in_);
    }

    void apply(Eigen::ArrayXcd& a, bool inv) {
        if (dim_ == 1) {
            buf_in_ = a.matrix();
            line(inv);
            a = buf_out_.array();
            return;
        }
        const Eigen::Index n = n_;
        for (Eigen::Index i = 0; i < n; ++i) {
            buf_in_ = a.segment(i * n, n).matrix();
            line(inv);
            a.segment(i * n, n) = buf_out_.array();
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) buf_in_[i] = a[i * n + j];
            line(inv);
            for (Eigen::Index i = 0; i < n; ++i) a[i * n + j] = buf_out_[i];
        }
    }

    int dim_;
    int n_;
    Eigen::FFT<double> fft_;
    Eigen::VectorXcd buf_in_;
    Eigen::VectorXcd buf_out_;
};

Eigen::ArrayXd k_squared(const GridState& g) {
    Eigen::ArrayXd k2(g.size());
    if (g.dim == 1) {
        for (int j = 0; j < g.n; ++j) k2[j] = std::pow(wavenumber(j, g.n, g.L), 2);
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                k2[static_cast<Eigen::Index>(i) * g.n + j] =
                    std::pow(wavenumber(i, g.n, g.L), 2) + std::pow(wavenumber(j, g.n, g.L), 2);
    }
    return k2;
}

Eigen::ArrayXcd phase(const Eigen::ArrayXd& generator, double factor) {
    Eigen::ArrayXcd out(generator.size());
    for (Eigen::Index k = 0; k < generator.size(); ++k) out[k] = std::polar(1.0, -factor * generator[k]);
    return out;
}

// Quadratic ramp over the outer fraction of each axis.
Eigen::ArrayXd absorber_profile(const GridState& g, double fraction) {
    const double width = fraction * g.L;
    auto ramp = [&](double x) {
        const double d = std::abs(x) - (g.L - width);
        return d > 0.0 ? (d / width) * (d / width) : 0.0;
    };
    Eigen::ArrayXd out(g.size());
    if (g.dim == 1) {
        for (int j = 0; j < g.n; ++j) out[j] = ramp(g.x(j));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) out[static_cast<Eigen::Index>(i) * g.n + j] = ramp(g.x(i)) + ramp(g.x(j));
    }
    return out;
}

void check_boundary(const GridState& g, const EvolveOptions& opts) {
    if (opts.absorber) return;
    const double frac = boundary_mass_fraction(g);
    if (frac > opts.boundary_tolerance) {
        std::ostringstream os;
        os << "probability " << frac << " within 4 cells of the grid edge at t = " << g.t;
        throw GridTooSmall(os.str(), g.t);
    }
}

Vec3 embed(const Eigen::VectorXd& p) {
    Vec3 out = Vec3::Zero();
    out.head(p.size()) = p;
    return out;
}

void require_box_dim(const GridState& g, const IntervalBox& box) {
    if (box.dimension() != g.dim) throw ConfigError("box dimension does not match the grid dimension");
}

}  // namespace

GridState GridState::zeros(int dim, int n, double L, double mass) {
    GridState g;
    g.dim = dim;
    g.n = n;
    g.L = L;
    g.mass = mass;
    g.psi = Eigen::ArrayXcd::Zero(dim == 1 ? n : static_cast<Eigen::Index>(n) * n);
    g.validate();
    return g;
}

void GridState::validate() const {
    if (dim != 1 && dim != 2) throw ConfigError("grid dimension must be 1 or 2");
    if (n < 16) throw ConfigError("grid needs at least 16 points per axis");
    if (!(L > 0.0)) throw ConfigError("grid half-width must be positive");
    if (!(mass > 0.0)) throw ConfigError("mass must be positive");
    const Eigen::Index expected = dim == 1 ? n : static_cast<Eigen::Index>(n) * n;
    if (psi.size() != expected) throw ConfigError("wavefunction size does not match the grid");
}

GridState make_point_source(const PointSourceSpec& source, const GridSpec& grid) {
    GridState g = GridState::zeros(grid.dim, grid.n, grid.L, grid.mass);
    const Eigen::VectorXd x0 = source.x0.size() ? source.x0 : Eigen::VectorXd::Zero(grid.dim);
    if (x0.size() != grid.dim) throw ConfigError("source position dimension does not match the grid");
    if (!(source.sigma >= 4.0 * g.dx() * (1.0 - 1e-12)))
        throw ConfigError("source width must span at least 4 grid cells");
    const double s2 = source.sigma * source.sigma;
    const double amp = std::pow(2.0 * kPi * s2, -0.5 * grid.dim);
    if (grid.dim == 1) {
        for (int j = 0; j < g.n; ++j) g.psi[j] = amp * std::exp(-std::pow(g.x(j) - x0[0], 2) / (2.0 * s2));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                const double r2 = std::pow(g.x(i) - x0[0], 2) + std::pow(g.x(j) - x0[1], 2);
                g.psi[static_cast<Eigen::Index>(i) * g.n + j] = amp * std::exp(-r2 / (2.0 * s2));
            }
    }
    check_boundary(g, {});
    return g;
}

GridState boost_state(GridState state, const Eigen::VectorXd& v0) {
    state.validate();
    if (v0.size() != state.dim) throw ConfigError("boost dimension does not match the grid");
    const double m = state.mass;
    if (state.dim == 1) {
        for (int j = 0; j < state.n; ++j) state.psi[j] *= std::polar(1.0, m * v0[0] * state.x(j));
    } else {
        for (int i = 0; i < state.n; ++i)
            for (int j = 0; j < state.n; ++j)
                state.psi[static_cast<Eigen::Index>(i) * state.n + j] *=
                    std::polar(1.0, m * (v0[0] * state.x(i) + v0[1] * state.x(j)));
    }
    return state;
}

double QuantumPotential::at(const GridState& g, Eigen::Index k) const {
    if (g.dim == 1) return spec.value(std::abs(g.x(static_cast<int>(k))));
    const double x1 = g.x(static_cast<int>(k / g.n));
    const double x2 = g.x(static_cast<int>(k % g.n));
    return spec.value(pair ? std::abs(x1 - x2) : std::hypot(x1, x2));
}

double boundary_mass_fraction(const GridState& g) {
    const double total = g.psi.abs2().sum();
    if (total == 0.0) return 0.0;
    constexpr int band = 4;
    double edge = 0.0;
    if (g.dim == 1) {
        edge = g.psi.head(band).abs2().sum() + g.psi.tail(band).abs2().sum();
    } else {
        for (int i = 0; i < g.n; ++i) {
            const auto row = g.psi.segment(static_cast<Eigen::Index>(i) * g.n, g.n);
            if (i < band || i >= g.n - band)
                edge += row.abs2().sum();
            else
                edge += row.head(band).abs2().sum() + row.tail(band).abs2().sum();
        }
    }
    return edge / total;
}

GridState evolve(GridState state, const QuantumPotential& potential, double t_target, double dt,
                 const EvolveOptions& opts) {
    state.validate();
    if (t_target < state.t) throw ConfigError("cannot evolve backwards in time");
    if (t_target == state.t) return state;
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (potential.pair && state.dim != 2) throw ConfigError("pair potential needs a 2D grid");

    Fourier fourier(state.dim, state.n);
    const Eigen::ArrayXd k2 = k_squared(state);
    const double span = t_target - state.t;

    if (potential.spec.is_zero() && !opts.absorber) {
        fourier.forward(state.psi);
        state.psi *= phase(k2, span / (2.0 * state.mass));
        fourier.backward(state.psi);
        state.t = t_target;
        check_boundary(state, opts);
        return state;
    }

    const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt - 1e-9)));
    const double h = span / static_cast<double>(steps);
    const Eigen::ArrayXcd kinetic = phase(k2, h / (2.0 * state.mass));
    Eigen::ArrayXd v(state.size());
    for (Eigen::Index k = 0; k < state.size(); ++k) v[k] = potential.at(state, k);
    const Eigen::ArrayXcd half_v = phase(v, 0.5 * h);
    Eigen::ArrayXd damp;
    if (opts.absorber) damp = (-opts.absorber_strength * h * absorber_profile(state, opts.absorber_fraction)).exp();

    const double t_start = state.t;
    for (long s = 0; s < steps; ++s) {
        state.psi *= half_v;
        fourier.forward(state.psi);
        state.psi *= kinetic;
        fourier.backward(state.psi);
        state.psi *= half_v;
        if (opts.absorber) state.psi *= damp;
        state.t = t_start + h * static_cast<double>(s + 1);
        if (opts.check_every > 0 && (s + 1) % opts.check_every == 0) check_boundary(state, opts);
    }
    state.t = t_target;
    check_boundary(state, opts);
    return state;
}

double region_mass(const GridState& state, const IntervalBox& region) {
    require_box_dim(state, region);
    const Eigen::ArrayXd w0 = cell_weights(state, region.lo()[0], region.hi()[0]);
    if (state.dim == 1) return weighted_sum(state, w0, nullptr);
    const Eigen::ArrayXd w1 = cell_weights(state, region.lo()[1], region.hi()[1]);
    return weighted_sum(state, w0, &w1);
}

double mapped_region_mass(const GridState& state, const CausalTransform& f, const IntervalBox& velocity_box,
                          int subsamples) {
    require_box_dim(state, velocity_box);
    if (!f.has_inverse()) throw ConfigError("region mapping needs the inverse space map of " + f.name);
    if (subsamples < 1) throw ConfigError("subsamples must be positive");
    if (!(state.t > 0.0)) throw NonPositiveTime("mapped region needs t > 0");
    const double tp = f.preimage_time(state.t);
    if (!(tp > 0.0)) throw NonPositiveTime("preimage time is not positive");
    const double dx = state.dx();
    const double sub = dx / subsamples;
    const double per_sample = 1.0 / std::pow(subsamples, state.dim);

    auto inside = [&](const Eigen::VectorXd& y) {
        const Vec3 x = f.inverse_space_map(tp, embed(y));
        return velocity_box.contains(x.head(state.dim) / tp);
    };

    double total = 0.0;
    Eigen::VectorXd y(state.dim);
    if (state.dim == 1) {
        for (int j = 0; j < state.n; ++j) {
            const double p = std::norm(state.psi[j]);
            if (p == 0.0) continue;
            int hits = 0;
            for (int a = 0; a < subsamples; ++a) {
                y[0] = state.x(j) - 0.5 * dx + (a + 0.5) * sub;
                hits += inside(y);
            }
            total += p * hits * per_sample;
        }
    } else {
        for (int i = 0; i < state.n; ++i)
            for (int j = 0; j < state.n; ++j) {
                const double p = std::norm(state.psi[static_cast<Eigen::Index>(i) * state.n + j]);
                if (p == 0.0) continue;
                int hits = 0;
                for (int a = 0; a < subsamples; ++a)
                    for (int b = 0; b < subsamples; ++b) {
                        y[0] = state.x(i) - 0.5 * dx + (a + 0.5) * sub;
                        y[1] = state.x(j) - 0.5 * dx + (b + 0.5) * sub;
                        hits += inside(y);
                    }
                total += p * hits * per_sample;
            }
    }
    return total * state.cell_volume();
}

double momentum_mass(const GridState& state, const IntervalBox& velocity_box) {
    state.validate();
    require_box_dim(state, velocity_box);
    Eigen::ArrayXcd a = state.psi;
    Fourier fourier(state.dim, state.n);
    fourier.forward(a);
    const double dx = state.dx();
    const double dp = kPi / state.L;
    const double m = state.mass;

    auto weights = [&](int axis) {
        const double lo = m * velocity_box.lo()[axis];
        const double hi = m * velocity_box.hi()[axis];
        Eigen::ArrayXd w(state.n);
        for (int j = 0; j < state.n; ++j) {
            const double p = wavenumber(j, state.n, state.L);
            w[j] = interval_overlap(p - 0.5 * dp, p + 0.5 * dp, lo, hi);
        }
        return w;
    };
    // |psi~(p_k)|^2 = (dx^2 / 2pi)^d |F_k|^2; the weights already carry dp.
    const double scale = std::pow(dx * dx / (2.0 * kPi), state.dim);
    const Eigen::ArrayXd w0 = weights(0);
    if (state.dim == 1) return scale * (a.abs2() * w0).sum();
    const Eigen::ArrayXd w1 = weights(1);
    double s = 0.0;
    for (int i = 0; i < state.n; ++i) {
        if (w0[i] == 0.0) continue;
        s += w0[i] * (a.segment(static_cast<Eigen::Index>(i) * state.n, state.n).abs2() * w1).sum();
    }
    return scale * s;
}

double Snapshots::cone_mass(std::size_t k, const IntervalBox& velocity_box) const {
    const double t = states_[k].t;
    if (!(t > 0.0)) throw NonPositiveTime("cone region needs t > 0");
    return aml::region_mass(states_[k], velocity_box.scaled(t));
}

Snapshots propagate_snapshots(GridState initial, const QuantumPotential& potential, std::span<const double> t_list,
                              double dt, const EvolveOptions& opts) {
    if (t_list.empty()) throw ConfigError("t_list is empty");
    std::vector<GridState> states;
    states.reserve(t_list.size());
    GridState current = std::move(initial);
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        if (t_list[k] <= 0.0) throw NonPositiveTime("snapshot times must be positive");
        if (k > 0 && t_list[k] <= t_list[k - 1]) throw ConfigError("snapshot times must increase");
        current = evolve(std::move(current), potential, t_list[k], dt, opts);
        states.push_back(current);
    }
    return Snapshots(std::move(states));
}

double GridMeasure::total(std::size_t time_index) const {
    double s = 0.0;
    for (double m : mass[time_index]) s += m;
    return s;
}

GridMeasure measure_from_snapshots(const Snapshots& snaps, std::span<const IntervalBox> boxes, double sigma) {
    if (snaps.size() == 0) throw ConfigError("no snapshots");
    const GridState& last = snaps.states().back();
    GridMeasure out;
    out.sigma = sigma;
    out.boxes.assign(boxes.begin(), boxes.end());
    for (const auto& b : boxes) {
        require_box_dim(last, b);
        if (b.min_side() * last.t < 4.0 * last.dx()) {
            std::ostringstream os;
            os << "box side " << b.min_side() << " spans fewer than 4 cells at t = " << last.t;
            throw BoxUnresolvable(os.str());
        }
    }
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        out.t.push_back(snaps.time(k));
        std::vector<double> row;
        for (const auto& b : boxes) row.push_back(snaps.cone_mass(k, b));
        out.mass.push_back(std::move(row));
    }
    const std::size_t n = out.t.size();
    std::size_t ref = 0;
    for (std::size_t k = 0; k + 1 < n; ++k)
        if (out.t[k] <= out.t.back() / 10.0 * (1.0 + 1e-9)) ref = k;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        out.limit.push_back(out.mass.back()[b]);
        out.last_decade_delta.push_back(n > 1 ? std::abs(out.mass.back()[b] - out.mass[ref][b])
                                              : std::numeric_limits<double>::infinity());
    }
    return out;
}

GridMeasure asymptotic_quantum_measure(const PointSourceSpec& source, const QuantumPotential& potential,
                                       std::span<const IntervalBox> boxes, std::span<const double> t_list, double dt,
                                       const GridSpec& grid, const EvolveOptions& opts) {
    GridState init = make_point_source(source, grid);
    const Snapshots snaps = propagate_snapshots(std::move(init), potential, t_list, dt, opts);
    return measure_from_snapshots(snaps, boxes, source.sigma);
}

std::vector<VelocityCheckRow> quantum_asymptotic_velocity_check(const GridState& initial,
                                                                std::span<const IntervalBox> boxes, double t) {
    if (!(t > 0.0)) throw NonPositiveTime("velocity check needs t > 0");
    const GridState later = evolve(initial, QuantumPotential{}, initial.t + t, t);
    std::vector<VelocityCheckRow> rows;
    for (const auto& b : boxes) {
        VelocityCheckRow r;
        r.box = b;
        r.position_mass = region_mass(later, b.scaled(t));
        r.momentum_mass = momentum_mass(initial, b);
        r.relative_difference = r.momentum_mass != 0.0
                                    ? std::abs(r.position_mass - r.momentum_mass) / r.momentum_mass
                                    : std::abs(r.position_mass);
        rows.push_back(r);
    }
    return rows;
}

AetInvarianceReport aet_invariance_check(const Snapshots& snaps, const CausalTransform& f, const IntervalBox& I,
                                         std::span<const double> eps_list, const AetCheckOptions& opts) {
    if (snaps.size() == 0) throw ConfigError("no snapshots");
    AetInvarianceReport report;
    const std::vector<Vec3> probes = default_probe_velocities();
    report.kind = classify_transform(f, probes, 1e-6).kind;
    if (opts.require_identical && report.kind != TransformClass::AsymptoticallyIdentical)
        throw NotAsymptoticallyIdentical(f.name + " is not asymptotically identical");

    std::vector<double> mass_I, mass_fI;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        mass_I.push_back(snaps.cone_mass(k, I));
        mass_fI.push_back(mapped_region_mass(snaps.states()[k], f, I, opts.subsamples));
    }
    bool last_holds = true;
    for (double eps : eps_list) {
        if (!(eps > 0.0) || !(eps < 0.5 * I.min_side())) throw ConfigError("eps must lie in (0, min_side / 2)");
        AetEpsilonReport er;
        er.epsilon = eps;
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            SandwichRow r;
            r.t = snaps.time(k);
            r.mass_I = mass_I[k];
            r.mass_fI = mass_fI[k];
            r.mass_minus = snaps.cone_mass(k, I.shrunk(eps));
            r.mass_plus = snaps.cone_mass(k, I.grown(eps));
            const double slack = 1e-9 * r.mass_plus;
            r.holds = r.mass_minus <= r.mass_fI + slack && r.mass_fI <= r.mass_plus + slack;
            er.rows.push_back(r);
        }
        for (std::size_t k = er.rows.size(); k-- > 0;) {
            if (!er.rows[k].holds) break;
            er.t0 = er.rows[k].t;
        }
        last_holds = last_holds && er.rows.back().holds;
        report.by_epsilon.push_back(std::move(er));
    }
    const double mI = mass_I.back();
    report.final_relative_gap = mI != 0.0 ? std::abs(mass_fI.back() - mI) / mI : std::abs(mass_fI.back());
    report.violation = !last_holds || report.final_relative_gap > opts.gap_tolerance;
    return report;
}

cplx free_propagator(double m, double x1, double x2, double t) {
    if (!(t > 0.0)) throw NonPositiveTime("propagator needs t > 0");
    const double dx = x2 - x1;
    return std::sqrt(m / (2.0 * kPi * t)) * std::polar(1.0, m * dx * dx / (2.0 * t) - 0.25 * kPi);
}

SemiclassicalDensities semiclassical_density_compare(double m, double t, std::span<const double> x_grid) {
    if (!(t > 0.0)) throw NonPositiveTime("density comparison needs t > 0");
    SemiclassicalDensities out;
    // Single free path: W = m (x2 - x1)^2 / (2t), d^2W / dx1 dx2 = -m / t.
    const double van_vleck = std::abs(-m / t);
    for (double x : x_grid) {
        const double rc = van_vleck / (2.0 * kPi);
        const double rq = std::norm(free_propagator(m, 0.0, x, t));
        out.x.push_back(x);
        out.rho_C.push_back(rc);
        out.rho_Q.push_back(rq);
        out.interference.push_back(rc - rq);
    }
    return out;
}

double semiclassical_cross_term(double m, double t, double x, double x1, double x2) {
    if (!(t > 0.0)) throw NonPositiveTime("cross term needs t > 0");
    const double w1 = m * (x - x1) * (x - x1) / (2.0 * t);
    const double w2 = m * (x - x2) * (x - x2) / (2.0 * t);
    const double d = m / t;  // |d^2 W_i / dx_i dx| for each path
    // i != j over the two ordered pairs gives 2 cos(W_1 - W_2).
    return (1.0 / (2.0 * kPi)) * std::sqrt(d) * std::sqrt(d) * 2.0 * std::cos(w1 - w2);
}

double two_source_interference(double m, double t, double x, double x1, double x2) {
    const cplx k1 = free_propagator(m, x1, x, t);
    const cplx k2 = free_propagator(m, x2, x, t);
    return std::norm(k1 + k2) - std::norm(k1) - std::norm(k2);
}

}  // namespace aml
