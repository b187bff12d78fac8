#pragma once

// The doubling-map universe, law-of-large-numbers deviation sets over
// dyadic digit events, and the measurement probability ratio.

#include <cstdint>
#include <string>
#include <vector>

namespace aml {

/// Exact fraction num/den with den > 0, kept in lowest terms.
class Rational {
public:
    Rational(std::int64_t num = 0, std::int64_t den = 1);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const;

    friend bool operator==(const Rational&, const Rational&) = default;
    friend bool operator<(const Rational& a, const Rational& b);

private:
    std::int64_t num_;
    std::int64_t den_;
};

/// x -> 2x mod 1.
Rational doubling(const Rational& x);

/// States at ticks 0 .. horizon-1 starting from x0 in [0, 1).
std::vector<Rational> orbit(const Rational& x0, int horizon);
/// Same for a double, which is a dyadic rational, so doubling is exact.
std::vector<double> orbit(double x0, int horizon);

/// "state < threshold at tick `tick`" (or >= when below is false).
struct TickCondition {
    int tick = 0;
    Rational threshold{1, 2};
    bool below = true;
};

/// Conjunction of tick conditions.
struct EventSpec {
    std::vector<TickCondition> all_of;
    bool holds(const std::vector<Rational>& states) const;
};

/// Fraction of ticks whose state satisfies the per-tick condition (tick field ignored).
Rational relative_frequency(const Rational& x0, int horizon, const TickCondition& per_tick = {});

/// Splitmix64 counter stream: word k of stream s depends only on (seed, s, k).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    std::uint64_t next();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

struct FrequencyStats {
    double mean = 0.0;
    double stddev = 0.0;         // of one sample's frequency
    double standard_error = 0.0; // of the mean
    long samples = 0;
};

/// Frequency of "state < 1/2" over `horizon` ticks for uniformly drawn x0:
/// state at tick i is below 1/2 exactly when binary digit i+1 of x0 is 0.
FrequencyStats sampled_frequency(int horizon, long n_samples, std::uint64_t seed);

struct DeviationEstimate {
    int n = 0;
    double epsilon = 0.0;
    double P = 0.0;
    double measure = 0.0;         // fraction of samples with |eta/n - P| >= eps
    double mc_sigma = 0.0;
    double chebyshev_bound = 0.0; // P(1-P) / (n eps^2)
    long samples = 0;
};

/// Monte Carlo measure of the deviation set for n independent events of
/// probability P. P must be dyadic, k / 2^r with r <= 16: event i is
/// "digit block i of x0, read as an r-bit integer, is below k".
DeviationEstimate lln_deviation_measure(double P, int n, double epsilon, long n_samples, std::uint64_t seed);

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double critical = 0.0;  // 99.9% quantile
    bool independent = false;
};

/// Goodness of fit of the four joint outcomes of digits i and j (1-based)
/// against the product rule 1/4 each.
ChiSquare digit_pair_chi2(int i, int j, long n_samples, std::uint64_t seed);

struct MeasurementQuery {
    double experiment_mass = 0.0;
    double result_mass = 0.0;
};

/// P(R|E) = nu(R) / nu(E).
double measurement_probability(const MeasurementQuery& q);

}  // namespace aml
