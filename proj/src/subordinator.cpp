#include "chg/subordinator.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include "chg/error.hpp"
#include "chg/numerics.hpp"

namespace chg {

using cd = std::complex<double>;

void StableDensityParams::validate() const {
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "stable density needs 0 < alpha < 1");
    require(t > 0, ErrorKind::domain, "stable density needs t > 0");
    require(nodes >= 64, ErrorKind::domain, "too few quadrature nodes");
}

double stable_density_half(double t, double s) {
    if (s <= 0) return 0.0;
    return t / (2.0 * std::sqrt(kPi)) * std::pow(s, -1.5) * std::exp(-t * t / (4.0 * s));
}

namespace {

// Ray angle for the inversion contour ρ e^{iψ}. Both exponentials decay along the ray
// when ψ < π/2 and |αψ − πα| < π/2.
double ray_angle(double a) {
    const double lo = std::max(0.0, kPi - kPi / (2 * a));
    return 0.5 * (lo + 0.5 * kPi);
}

// (1/π) Im ∫ (-ρ e^{iψ})^m e^{iψ} e^{-σρe^{iψ}} (e^{-ρ^α e^{i(αψ-πα)}} - 1) dρ, m = 0 or 1.
// The "-1" removes a term whose integral is known in closed form (zero imaginary part).
struct Inversion {
    double value, residual;
};

Inversion invert(double a, double sigma, int nodes, double tol, int m) {
    const double psi = ray_angle(a);
    const cd eps = std::polar(1.0, psi);
    const cd eb = std::polar(1.0, a * psi - kPi * a);
    const double c1 = sigma * std::cos(psi);
    const double c2 = std::cos(a * psi - kPi * a);
    const double logtol = -std::log(tol);
    // Upper cut: decay exponent exceeds log(1/tol) + log ρ.
    double hi = 1.0;
    while (c1 * hi + c2 * std::pow(hi, a) < logtol + std::log(hi) + 3.0) hi *= 2.0;
    const double lo = std::pow(tol, 1.0 / (1.0 + a)) * std::min(1.0, 1.0 / (1.0 + sigma));
    nodes |= 1;
    const double v0 = std::log(lo), v1 = std::log(hi);
    const double h = (v1 - v0) / (nodes - 1);
    double full = 0, half = 0;
    for (int k = 0; k < nodes; ++k) {
        const double rho = std::exp(v0 + k * h);
        const cd z = -std::pow(rho, a) * eb;
        const cd em1 = std::abs(z) < 1e-5 ? z * (1.0 + z * (0.5 + z / 6.0)) : std::exp(z) - 1.0;
        cd g = eps * std::exp(-sigma * rho * eps) * em1;
        if (m == 1) g *= -rho * eps;
        const double val = g.imag() * rho;
        const double w = (k == 0 || k == nodes - 1) ? 0.5 : 1.0;
        full += w * val;
        if (k % 2 == 0) half += w * val;
    }
    full *= h / kPi;
    half *= 2 * h / kPi;
    return {full, std::abs(full - half)};
}

// Left side of the density (σ small): the ray integral is dominated by cancellation, so use
// the non-oscillatory Zolotarev representation
//   f₁(σ) = α/(1−α)/π · σ^{−1/(1−α)} ∫_0^π A(φ) exp(−σ^{−α/(1−α)} A(φ)) dφ,
//   A(φ) = (sin αφ / sin φ)^{1/(1−α)} · sin((1−α)φ) / sin αφ.
double small_sigma_exponent(double a, double sigma) {
    return (1 - a) * std::pow(a, a / (1 - a)) * std::pow(sigma, -a / (1 - a));
}

double zolotarev(double a, double sigma) {
    const double X = std::pow(sigma, -a / (1 - a));
    const GaussRule& g = gauss_legendre(32);
    double sum = 0, hi = kPi;
    for (int k = 0; k < 40; ++k) {
        const double lo = k == 39 ? 0.0 : hi * 0.5;
        for (int i = 0; i < 32; ++i) {
            const double p = lo + 0.5 * (hi - lo) * (g.x[i] + 1);
            const double A = std::pow(std::sin(a * p) / std::sin(p), 1 / (1 - a)) * std::sin((1 - a) * p) /
                             std::sin(a * p);
            sum += 0.5 * (hi - lo) * g.w[i] * A * std::exp(-X * A);
        }
        hi = lo;
    }
    return a / (1 - a) / kPi * std::pow(sigma, -1 / (1 - a)) * sum;
}

}  // namespace

double stable_density_generic(const StableDensityParams& p, double s) {
    p.validate();
    if (s <= 0) return 0.0;
    const double scale = std::pow(p.t, -1.0 / p.alpha);
    const double sigma = s * scale;
    if (small_sigma_exponent(p.alpha, sigma) > 2.0) return scale * zolotarev(p.alpha, sigma);
    const Inversion r = invert(p.alpha, sigma, p.nodes, p.tail_tol, 0);
    const double v = scale * r.value;
    if (r.residual * scale > 1e-7 * std::max(1.0, std::abs(v)))
        throw AccuracyError("stable density inversion did not converge", r.residual * scale);
    return std::max(0.0, v);
}

double stable_density(const StableDensityParams& p, double s) {
    if (p.use_fast_path && p.alpha == 0.5) {
        p.validate();
        return stable_density_half(p.t, s);
    }
    return stable_density_generic(p, s);
}

double stable_density_dt(const StableDensityParams& p, double s) {
    p.validate();
    if (s <= 0) return 0.0;
    if (p.use_fast_path && p.alpha == 0.5) return stable_density_half(p.t, s) * (1.0 / p.t - p.t / (2.0 * s));
    // f = t^{-1/α} f₁(σ), σ = s t^{-1/α}  ⇒  ∂_t f = -(1/α) t^{-1/α-1} (f₁(σ) + σ f₁'(σ)).
    const double scale = std::pow(p.t, -1.0 / p.alpha);
    const double sigma = s * scale;
    if (small_sigma_exponent(p.alpha, sigma) > 2.0) {
        const double h = 1e-4 * p.t;
        auto at = [&](double t) {
            const double sc = std::pow(t, -1.0 / p.alpha);
            return sc * zolotarev(p.alpha, s * sc);
        };
        return (at(p.t + h) - at(p.t - h)) / (2 * h);
    }
    const double f1 = invert(p.alpha, sigma, p.nodes, p.tail_tol, 0).value;
    const double d1 = invert(p.alpha, sigma, p.nodes, p.tail_tol, 1).value;
    return -(1.0 / p.alpha) * scale / p.t * (f1 + sigma * d1);
}

double stable_density_series(double a, double t, double s, int terms) {
    double sum = 0, fact = 1;
    for (int k = 1; k <= terms; ++k) {
        fact *= k;
        const double term = std::tgamma(k * a + 1) / fact * std::sin(kPi * k * a) * std::pow(t, k) *
                            std::pow(s, -k * a - 1);
        sum += (k % 2 == 1 ? term : -term);
    }
    return sum / kPi;
}

// Series tail ∫_S^∞ f_{t,α}(s) s^δ ds, valid for δ < α.
static double series_tail_moment(double a, double t, double S, double delta, int terms = 40) {
    double sum = 0, fact = 1;
    for (int k = 1; k <= terms; ++k) {
        fact *= k;
        const double c = std::tgamma(k * a + 1) / fact * std::sin(kPi * k * a) * std::pow(t, k);
        const double term = c * std::pow(S, delta - k * a) / (k * a - delta);
        sum += (k % 2 == 1 ? term : -term);
    }
    return sum / kPi;
}

std::shared_ptr<const StableTable> StableTable::get(const StableDensityParams& p) {
    p.validate();
    static std::mutex mu;
    static std::map<std::tuple<double, double, int, bool>, std::shared_ptr<const StableTable>> cache;
    const auto key = std::make_tuple(p.alpha, p.t, p.nodes, p.use_fast_path);
    {
        std::lock_guard<std::mutex> lk(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto tab = std::make_shared<StableTable>();
    tab->alpha = p.alpha;
    tab->t = p.t;
    const double sc = std::pow(p.t, 1.0 / p.alpha);
    // 30 nodes per e-fold over σ ∈ [1e-7, 1e8].
    const int n = static_cast<int>(std::ceil(std::log(1e15) * 30)) + 1;
    tab->s = log_space(1e-7 * sc, 1e8 * sc, n);
    tab->f.resize(n);
    for (int i = 0; i < n; ++i) tab->f[i] = stable_density(p, tab->s[i]);
    std::lock_guard<std::mutex> lk(mu);
    cache[key] = tab;
    return tab;
}

double laplace_check(const StableDensityParams& p, double lambda) {
    require(lambda > 0, ErrorKind::domain, "laplace_check needs lambda > 0");
    auto tab = StableTable::get(p);
    std::vector<double> g(tab->s.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = tab->f[i] * std::exp(-lambda * tab->s[i]);
    double v = log_trapezoid(tab->s, g);
    // Tail beyond the table: bounded by the series tail of the mass (e^{-λs} <= e^{-λS}).
    const double S = tab->s.back();
    v += std::exp(-lambda * S) * series_tail_moment(p.alpha, p.t, S, 0.0);
    return v;
}

double moment_formula(double a, double t, double delta) {
    if (delta >= a) return kInfinity;
    return std::tgamma(1 - delta / a) / std::tgamma(1 - delta) * std::pow(t, delta / a);
}

double moment(const StableDensityParams& p, double delta) {
    p.validate();
    if (delta >= p.alpha) return kInfinity;
    auto tab = StableTable::get(p);
    std::vector<double> g(tab->s.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = tab->f[i] * std::pow(tab->s[i], delta);
    return log_trapezoid(tab->s, g) + series_tail_moment(p.alpha, p.t, tab->s.back(), delta);
}

}  // namespace chg
