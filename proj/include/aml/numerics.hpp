#pragma once

// Small numerical kernels shared by the modules: bracketed root finding,
// power-law tail extrapolation, quadrature and grids.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aml/errors.hpp"

namespace aml::numerics {

/// Geometric grid start, start*ratio, ... ending exactly at `end`.
inline std::vector<double> geometric_grid(double start, double end, double ratio = 1.25) {
    if (!(start > 0.0) || !(end >= start) || !(ratio > 1.0))
        throw std::invalid_argument("geometric_grid: need 0 < start <= end and ratio > 1");
    std::vector<double> grid;
    for (double t = start; t < end * (1.0 - 1e-12); t *= ratio) grid.push_back(t);
    grid.push_back(end);
    return grid;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return out;
}

/// Brent's method on a sign-changing bracket [a, b].
inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double xtol = 1e-14, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0)) throw NoRoot("brent_root: bracket does not change sign");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) return b;
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
        fb = f(b);
    }
    return b;
}

/// Solves g(x) = target for increasing g, expanding the bracket upward from `lo`.
inline double invert_increasing(const std::function<double(double)>& g, double target, double lo,
                                double hi, double xtol = 1e-13) {
    for (int i = 0; i < 200 && g(hi) < target; ++i) hi = lo + 2.0 * (hi - lo);
    for (int i = 0; i < 200 && g(lo) > target; ++i) lo = hi - 2.0 * (hi - lo);
    return brent_root([&](double x) { return g(x) - target; }, lo, hi, xtol);
}

/// Result of fitting y(t) = limit + coeff * t^(-exponent).
struct PowerTailFit {
    double limit = 0.0;
    double coeff = 0.0;
    double exponent = 0.0;
    double sse = 0.0;        // residual of the power model
    double sse_constant = 0.0;  // residual of y = mean(y)
};

namespace detail {
inline PowerTailFit fit_for_exponent(std::span<const double> t, std::span<const double> y, double p) {
    const std::size_t n = t.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::pow(t[i], -p);
        sx += x;
        sy += y[i];
        sxx += x * x;
        sxy += x * y[i];
    }
    const double det = n * sxx - sx * sx;
    PowerTailFit fit;
    fit.exponent = p;
    if (std::abs(det) < 1e-300) {
        fit.limit = sy / n;
    } else {
        fit.coeff = (n * sxy - sx * sy) / det;
        fit.limit = (sy - fit.coeff * sx) / n;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.limit - fit.coeff * std::pow(t[i], -p);
        fit.sse += r * r;
    }
    return fit;
}
}  // namespace detail

/// Least-squares fit of y = v + c t^-p with p searched on [p_min, p_max]
/// (grid scan, then golden-section refinement).
inline PowerTailFit fit_power_tail(std::span<const double> t, std::span<const double> y,
                                   double p_min = 0.1, double p_max = 3.0) {
    if (t.size() != y.size() || t.size() < 3)
        throw TooFewSamples("fit_power_tail: need at least 3 samples");
    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double sse_const = 0;
    for (double v : y) sse_const += (v - mean) * (v - mean);

    const int n_grid = 59;
    double best_p = p_min;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_grid; ++i) {
        const double p = p_min + (p_max - p_min) * i / (n_grid - 1);
        const double s = detail::fit_for_exponent(t, y, p).sse;
        if (s < best) {
            best = s;
            best_p = p;
        }
    }
    const double step = (p_max - p_min) / (n_grid - 1);
    double a = std::max(p_min, best_p - step), b = std::min(p_max, best_p + step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = detail::fit_for_exponent(t, y, c).sse, fd = detail::fit_for_exponent(t, y, d).sse;
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = detail::fit_for_exponent(t, y, c).sse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = detail::fit_for_exponent(t, y, d).sse;
        }
    }
    PowerTailFit fit = detail::fit_for_exponent(t, y, 0.5 * (a + b));
    if (best < fit.sse) fit = detail::fit_for_exponent(t, y, best_p);
    fit.sse_constant = sse_const;
    return fit;
}

/// Ordinary least-squares line y = slope * x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxx > 0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

/// Composite Simpson on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 1000) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Gauss-Legendre nodes/weights on [-1, 1] (Newton on P_n).
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[static_cast<std::size_t>(i)] = x;
            weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    /// Composite rule: `panels` equal sub-intervals of [a, b].
    double integrate(const std::function<double(double)>& f, double a, double b, int panels = 1) const {
        const double h = (b - a) / panels;
        double sum = 0;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * h;
            for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + 0.5 * h * nodes[i]);
        }
        return 0.5 * h * sum;
    }
};

/// Piecewise-linear interpolation on an increasing abscissa, clamped at the ends.
inline double interp_linear(std::span<const double> x, std::span<const double> y, double xq) {
    if (xq <= x.front()) return y.front();
    if (xq >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), xq);
    const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
    const double w = (xq - x[i]) / (x[i + 1] - x[i]);
    return (1 - w) * y[i] + w * y[i + 1];
}

}  // namespace aml::numerics
