#include "aml/probability.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aml/errors.hpp"
#include "aml/parallel.hpp"

namespace aml {

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw ConfigError("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    num_ = num / (g ? g : 1);
    den_ = den / (g ? g : 1);
}

std::string Rational::str() const {
    std::ostringstream os;
    os << num_ << "/" << den_;
    return os.str();
}

bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num()) * b.den() < static_cast<__int128>(b.num()) * a.den();
}

Rational doubling(const Rational& x) {
    if (x.den() > (std::int64_t{1} << 61)) throw ConfigError("denominator too large for exact doubling");
    std::int64_t n = 2 * x.num();
    if (n >= x.den()) n -= x.den();
    return Rational(n, x.den());
}

std::vector<Rational> orbit(const Rational& x0, int horizon) {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (x0.num() < 0 || !(x0 < Rational(1))) throw ConfigError("initial condition must lie in [0, 1)");
    std::vector<Rational> out{x0};
    for (int i = 1; i < horizon; ++i) out.push_back(doubling(out.back()));
    return out;
}

std::vector<double> orbit(double x0, int horizon) {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (!(x0 >= 0.0 && x0 < 1.0)) throw ConfigError("initial condition must lie in [0, 1)");
    std::vector<double> out{x0};
    for (int i = 1; i < horizon; ++i) {
        const double y = 2.0 * out.back();
        out.push_back(y >= 1.0 ? y - 1.0 : y);
    }
    return out;
}

namespace {

bool satisfies(const Rational& state, const TickCondition& c) {
    const bool below = state < c.threshold;
    return c.below ? below : !below;
}

}  // namespace

bool EventSpec::holds(const std::vector<Rational>& states) const {
    for (const auto& c : all_of) {
        if (c.tick < 0 || static_cast<std::size_t>(c.tick) >= states.size())
            throw ConfigError("event refers to a tick beyond the horizon");
        if (!satisfies(states[static_cast<std::size_t>(c.tick)], c)) return false;
    }
    return true;
}

Rational relative_frequency(const Rational& x0, int horizon, const TickCondition& per_tick) {
    const auto states = orbit(x0, horizon);
    std::int64_t hits = 0;
    for (const auto& s : states) hits += satisfies(s, per_tick);
    return Rational(hits, horizon);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t CounterRng::next() {
    return splitmix64(splitmix64(seed_ ^ splitmix64(stream_)) + counter_++);
}

namespace {

constexpr std::size_t kChunks = 64;

struct Range {
    long begin, end;
};

Range chunk(long n, std::size_t c) {
    const long per = (n + static_cast<long>(kChunks) - 1) / static_cast<long>(kChunks);
    const long b = std::min(n, per * static_cast<long>(c));
    return {b, std::min(n, b + per)};
}

// Reads successive r-bit blocks from the digit stream of x0.
class DigitStream {
public:
    explicit DigitStream(CounterRng rng) : rng_(rng) {}

    std::uint64_t take(int r) {
        std::uint64_t out = 0;
        for (int k = 0; k < r; ++k) {
            if (left_ == 0) {
                word_ = rng_.next();
                left_ = 64;
            }
            out = (out << 1) | (word_ >> 63);
            word_ <<= 1;
            --left_;
        }
        return out;
    }

private:
    CounterRng rng_;
    std::uint64_t word_ = 0;
    int left_ = 0;
};

}  // namespace

FrequencyStats sampled_frequency(int horizon, long n_samples, std::uint64_t seed) {
    if (horizon < 1 || n_samples < 2) throw ConfigError("need horizon >= 1 and at least 2 samples");
    std::vector<double> sum(kChunks, 0.0), sum2(kChunks, 0.0);
    parallel_for(kChunks, [&](std::size_t c) {
        const Range r = chunk(n_samples, c);
        for (long s = r.begin; s < r.end; ++s) {
            CounterRng rng(seed, static_cast<std::uint64_t>(s));
            long zeros = 0;
            int left = horizon;
            while (left > 0) {
                const std::uint64_t w = rng.next();
                const int take = std::min(left, 64);
                const std::uint64_t bits = take == 64 ? w : (w >> (64 - take));
                zeros += take - std::popcount(bits);
                left -= take;
            }
            const double f = static_cast<double>(zeros) / horizon;
            sum[c] += f;
            sum2[c] += f * f;
        }
    });
    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < kChunks; ++c) {
        s += sum[c];
        s2 += sum2[c];
    }
    FrequencyStats st;
    st.samples = n_samples;
    st.mean = s / static_cast<double>(n_samples);
    st.stddev = std::sqrt(std::max(0.0, (s2 - n_samples * st.mean * st.mean) / static_cast<double>(n_samples - 1)));
    st.standard_error = st.stddev / std::sqrt(static_cast<double>(n_samples));
    return st;
}

DeviationEstimate lln_deviation_measure(double P, int n, double epsilon, long n_samples, std::uint64_t seed) {
    if (!(P > 0.0 && P < 1.0)) throw ConfigError("P must lie in (0, 1)");
    if (n < 1 || n_samples < 1) throw ConfigError("need n >= 1 and at least one sample");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    int r = 0;
    while (r <= 16 && std::ldexp(P, r) != std::floor(std::ldexp(P, r))) ++r;
    if (r > 16) throw ConfigError("P must be a dyadic rational k / 2^r with r <= 16");
    const auto k = static_cast<std::uint64_t>(std::ldexp(P, r));

    std::vector<long> hits(kChunks, 0);
    parallel_for(kChunks, [&](std::size_t c) {
        const Range rg = chunk(n_samples, c);
        for (long s = rg.begin; s < rg.end; ++s) {
            DigitStream digits(CounterRng(seed, static_cast<std::uint64_t>(s)));
            long eta = 0;
            for (int i = 0; i < n; ++i) eta += digits.take(r) < k;
            // |eta - nP| >= n eps, with slack for the rounding of n eps.
            if (std::abs(static_cast<double>(eta) - n * P) >= n * epsilon * (1.0 - 1e-12)) ++hits[c];
        }
    });
    long total = 0;
    for (long h : hits) total += h;

    DeviationEstimate est;
    est.n = n;
    est.epsilon = epsilon;
    est.P = P;
    est.samples = n_samples;
    est.measure = static_cast<double>(total) / static_cast<double>(n_samples);
    est.mc_sigma = std::sqrt(est.measure * (1.0 - est.measure) / static_cast<double>(n_samples));
    est.chebyshev_bound = P * (1.0 - P) / (n * epsilon * epsilon);
    return est;
}

ChiSquare digit_pair_chi2(int i, int j, long n_samples, std::uint64_t seed) {
    if (i < 1 || j < 1 || i == j) throw ConfigError("digit positions must be distinct and 1-based");
    if (n_samples < 100) throw ConfigError("need at least 100 samples");
    const int depth = std::max(i, j);
    std::vector<std::array<long, 4>> counts(kChunks, {0, 0, 0, 0});
    parallel_for(kChunks, [&](std::size_t c) {
        const Range rg = chunk(n_samples, c);
        for (long s = rg.begin; s < rg.end; ++s) {
            DigitStream digits(CounterRng(seed, static_cast<std::uint64_t>(s)));
            int di = 0, dj = 0;
            for (int p = 1; p <= depth; ++p) {
                const int d = static_cast<int>(digits.take(1));
                if (p == i) di = d;
                if (p == j) dj = d;
            }
            ++counts[c][static_cast<std::size_t>(2 * di + dj)];
        }
    });
    std::array<long, 4> all{0, 0, 0, 0};
    for (const auto& cc : counts)
        for (std::size_t q = 0; q < 4; ++q) all[q] += cc[q];
    ChiSquare out;
    const double expect = static_cast<double>(n_samples) / 4.0;
    for (long o : all) out.statistic += (o - expect) * (o - expect) / expect;
    out.dof = 3;
    out.critical = 16.266;
    out.independent = out.statistic < out.critical;
    return out;
}

double measurement_probability(const MeasurementQuery& q) {
    if (!(q.experiment_mass > 0.0)) throw ZeroExperimentMass("experiment event has zero measure");
    if (q.result_mass < 0.0 || q.result_mass > q.experiment_mass * (1.0 + 1e-12))
        throw ConfigError("result mass must lie in [0, experiment mass]");
    return std::min(1.0, q.result_mass / q.experiment_mass);
}

}  // namespace aml
