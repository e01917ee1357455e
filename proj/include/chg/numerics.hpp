#pragma once

// Small numerical helpers shared by every module: node sets, summation, RNG.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace chg {

inline constexpr double kPi = std::numbers::pi;

/// n points log-spaced on [lo, hi] inclusive.
std::vector<double> log_space(double lo, double hi, int n);
std::vector<double> lin_space(double lo, double hi, int n);

/// Gauss-Legendre nodes/weights on [-1, 1].
struct GaussRule {
    std::vector<double> x, w;
};
const GaussRule& gauss_legendre(int n);

/// Composite Gauss-Legendre over [a, b] split into `panels`, q points per panel.
GaussRule composite_gauss(double a, double b, int panels, int q);

/// Fixed-order pairwise summation (deterministic, lower rounding than naive).
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Trapezoid in log-variable: ∫ g(x) dx over log-spaced nodes, using g(x_k) x_k h.
double log_trapezoid(const std::vector<double>& nodes, const std::vector<double>& values);

/// Power-law extrapolation of a positive sampled integrand beyond the last two nodes:
/// returns ∫_{x1}^{∞} g dx assuming g ∝ x^p fitted through (x0,g0),(x1,g1); 0 if not decaying.
double power_tail(double x0, double g0, double x1, double g1);
/// Same towards zero: ∫_0^{x0} g dx with g ∝ x^p fitted through (x0,g0),(x1,g1), x0 < x1.
double power_head(double x0, double g0, double x1, double g1);

/// Regularized incomplete gamma functions (thin wrappers).
double gamma_p(double a, double x);
double gamma_q(double a, double x);
/// Γ at any non-pole real argument; negative arguments go through reflection.
double gamma_fn(double z);

/// Counter-based generator: value depends only on (seed, stream, counter).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}
    std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + mix(counter)); }
    /// Uniform in (0,1).
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }
    /// Standard normal via Box-Muller on counters (2c, 2c+1).
    double normal(std::uint64_t counter) const;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
};

/// Smallest 2^a 3^b 5^c >= n (FFT-friendly length).
int good_fft_size(int n);

/// Golden-section maximisation of a unimodal function on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-10);

}  // namespace chg
