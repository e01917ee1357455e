#include "chg/numerics.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <map>
#include <mutex>

#include "chg/error.hpp"

namespace chg {

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::domain: return "domain";
        case ErrorKind::capability: return "capability";
        case ErrorKind::accuracy: return "accuracy";
        case ErrorKind::spec_mismatch: return "spec-mismatch";
        case ErrorKind::singularity: return "singularity";
        case ErrorKind::data: return "data";
        case ErrorKind::construction: return "construction";
        case ErrorKind::usage: return "usage";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

std::vector<double> log_space(double lo, double hi, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i) v[i] = std::exp(a + (b - a) * i / (n - 1));
    v.front() = lo;
    v.back() = hi;
    return v;
}

std::vector<double> lin_space(double lo, double hi, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

static GaussRule make_gauss(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1 - x * x) * dp * dp);
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

const GaussRule& gauss_legendre(int n) {
    static std::mutex m;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lk(m);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
    return it->second;
}

GaussRule composite_gauss(double a, double b, int panels, int q) {
    const GaussRule& g = gauss_legendre(q);
    GaussRule r;
    r.x.reserve(panels * q);
    r.w.reserve(panels * q);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (int i = 0; i < q; ++i) {
            r.x.push_back(lo + 0.5 * h * (g.x[i] + 1));
            r.w.push_back(0.5 * h * g.w[i]);
        }
    }
    return r;
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 16) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double log_trapezoid(const std::vector<double>& x, const std::vector<double>& g) {
    const std::size_t n = x.size();
    if (n < 2) return 0;
    double s = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = std::log(x[i + 1] / x[i]);
        s += 0.5 * h * (g[i] * x[i] + g[i + 1] * x[i + 1]);
    }
    return s;
}

double power_tail(double x0, double g0, double x1, double g1) {
    if (g1 == 0.0) return 0.0;
    if (g0 == 0.0 || (g0 > 0) != (g1 > 0)) return 0.0;
    const double p = std::log(g1 / g0) / std::log(x1 / x0);
    if (p >= -1.0) return 0.0;
    return -g1 * x1 / (p + 1.0);
}

double power_head(double x0, double g0, double x1, double g1) {
    if (g0 == 0.0) return 0.0;
    if (g1 == 0.0 || (g0 > 0) != (g1 > 0)) return 0.0;
    const double p = std::log(g1 / g0) / std::log(x1 / x0);
    if (p <= -1.0) return 0.0;
    return g0 * x0 / (p + 1.0);
}

double gamma_p(double a, double x) { return x <= 0 ? 0.0 : boost::math::gamma_p(a, x); }
double gamma_q(double a, double x) { return x <= 0 ? 1.0 : boost::math::gamma_q(a, x); }

double gamma_fn(double z) {
    if (z > 0) return std::tgamma(z);
    require(z != std::floor(z), ErrorKind::domain, "gamma pole at non-positive integer");
    return kPi / (std::sin(kPi * z) * std::tgamma(1.0 - z));
}

double CounterRng::normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double golden_max(const std::function<double(double)>& f, double a, double b, double tol) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

int good_fft_size(int n) {
    int best = 1 << 30;
    for (int a = 1; a <= 2 * n; a *= 2)
        for (int b = a; b <= 2 * n; b *= 3)
            for (int c = b; c <= 2 * n; c *= 5)
                if (c >= n) best = std::min(best, c);
    return best;
}

}  // namespace chg
