#include "chg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "chg/error.hpp"
#include "chg/numerics.hpp"
#include "chg/subordinator.hpp"

namespace chg {

std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::heat: return "heat";
        case KernelKind::frac_heat: return "frac_heat";
        case KernelKind::poisson: return "poisson";
        case KernelKind::riesz: return "riesz";
        case KernelKind::tilde_riesz: return "tilde_riesz";
    }
    return "?";
}

std::string to_string(Backend b) {
    switch (b) {
        case Backend::closed_form: return "closed_form";
        case Backend::quadrature: return "quadrature";
        case Backend::pde_grid: return "pde_grid";
        case Backend::monte_carlo: return "monte_carlo";
    }
    return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
    for (auto k : {KernelKind::heat, KernelKind::frac_heat, KernelKind::poisson, KernelKind::riesz,
                   KernelKind::tilde_riesz})
        if (to_string(k) == s) return k;
    fail(ErrorKind::usage, "unknown kernel kind '" + s + "'");
}

Backend backend_from_string(const std::string& s) {
    for (auto b : {Backend::closed_form, Backend::quadrature, Backend::pde_grid, Backend::monte_carlo})
        if (to_string(b) == s) return b;
    fail(ErrorKind::usage, "unknown backend '" + s + "'");
}

std::size_t KernelCache::Hash::operator()(const Key& k) const {
    auto bits = [](double d) {
        std::uint64_t u;
        std::memcpy(&u, &d, sizeof u);
        return u;
    };
    return CounterRng::mix(std::get<0>(k) ^ CounterRng::mix(bits(std::get<1>(k)) ^
                                                         CounterRng::mix(bits(std::get<2>(k)) ^ CounterRng::mix(bits(std::get<3>(k))))));
}

bool KernelCache::find(const Key& k, double& v) const {
    std::shared_lock lk(mu_);
    auto it = map_.find(k);
    if (it == map_.end()) return false;
    v = it->second;
    return true;
}

void KernelCache::insert(const Key& k, double v) {
    std::unique_lock lk(mu_);
    map_.emplace(k, v);
}

std::size_t KernelCache::size() const {
    std::shared_lock lk(mu_);
    return map_.size();
}

KernelHandle KernelHandle::make(KernelKind kind, const std::string& group, double alpha, bool memo) {
    KernelHandle h;
    h.kind = kind;
    h.alpha = alpha;
    h.group = make_group(group);
    h.backend = h.group->is_euclidean() ? Backend::closed_form : Backend::quadrature;
    if (memo) h.cache = std::make_shared<KernelCache>();
    h.validate();
    return h;
}

void KernelHandle::validate() const {
    require(group != nullptr, ErrorKind::construction, "kernel handle without a group");
    switch (kind) {
        case KernelKind::heat: break;
        case KernelKind::frac_heat:
        case KernelKind::poisson:
            require(alpha > 0 && alpha < 1, ErrorKind::domain, to_string(kind) + " needs 0 < alpha < 1");
            break;
        case KernelKind::riesz:
            require(alpha > 0 && alpha < group->Q, ErrorKind::domain, "riesz needs 0 < alpha < Q");
            break;
        case KernelKind::tilde_riesz:
            require(alpha < 0 && std::fmod(-alpha, 2.0) != 0.0, ErrorKind::domain,
                    "tilde_riesz needs alpha < 0 outside {-2, -4, ...}");
            break;
    }
    require(quad.nodes_per_efold >= 4 && quad.head > 0 && quad.tail > 1 && quad.mc_paths > 0, ErrorKind::domain,
            "invalid quadrature settings");
    const bool euclid = group->is_euclidean();
    if (euclid)
        require(backend == Backend::closed_form, ErrorKind::capability,
                "Euclidean kernels use the closed_form backend");
    else if (group->is_heisenberg())
        require(backend != Backend::closed_form, ErrorKind::capability, "no closed-form heat kernel on H1");
    else
        fail(ErrorKind::capability, "no heat kernel backend for group " + group->name);
    if (kind != KernelKind::heat)
        require(backend == Backend::closed_form || backend == Backend::quadrature, ErrorKind::capability,
                "subordinated kernels need the closed_form or quadrature heat backend");
}

nlohmann::json KernelHandle::to_json() const {
    return {{"kind", to_string(kind)},
            {"alpha", alpha},
            {"group", group->name},
            {"backend", to_string(backend)},
            {"quad",
             {{"nodes_per_efold", quad.nodes_per_efold},
              {"head", quad.head},
              {"tail", quad.tail},
              {"heat_table", quad.heat_table},
              {"mc_paths", quad.mc_paths}}},
            {"memo", cache != nullptr}};
}

namespace {

struct Shell {
    double rho2, v, n2;  // |first layer|², |second layer|, homogeneous norm²
};

Shell shell_of(const KernelHandle& k, const GroupElement& x) {
    require(x.spec && *x.spec == *k.group, ErrorKind::spec_mismatch, "point and kernel live on different groups");
    const GroupSpec& g = *k.group;
    double rho2 = 0, v2 = 0;
    for (int i = 0; i < g.dim(); ++i) (i < g.horizontal_dim() ? rho2 : v2) += x[i] * x[i];
    const double n = homogeneous_norm(x);
    return {rho2, std::sqrt(v2), n * n};
}

double mc_heat(const KernelHandle& k, double t, double rho2, double v) {
    H1HeatMonteCarlo::Options o;
    o.paths = k.quad.mc_paths;
    std::uint64_t u[3];
    std::memcpy(&u[0], &t, 8);
    std::memcpy(&u[1], &rho2, 8);
    std::memcpy(&u[2], &v, 8);
    o.seed = CounterRng::mix(u[0] ^ CounterRng::mix(u[1] ^ CounterRng::mix(u[2] ^ k.quad.mc_seed)));
    return H1HeatMonteCarlo(o).eval(t, rho2, v).value;
}

double pde_heat(const KernelHandle& k, double t, double rho2, double v) {
    auto& st = *k.pde;
    std::lock_guard<std::mutex> lk(st.mu);
    const bool have = std::any_of(st.times.begin(), st.times.end(),
                                  [&](double s) { return std::abs(s - t) <= 1e-12 * t; });
    if (!have) {
        st.times.push_back(t);
        std::sort(st.times.begin(), st.times.end());
        st.pde = std::make_unique<H1HeatPDE>();
        st.pde->run(st.times);
    }
    return st.pde->eval(t, rho2, v);
}

// Heat kernel value used inside subordination integrals.
double heat_inner(const KernelHandle& k, double s, double rho2, double v) {
    if (k.group->is_euclidean()) {
        const int n = k.group->dim();
        return std::pow(4 * kPi * s, -0.5 * n) * std::exp(-rho2 / (4 * s));
    }
    if (k.quad.heat_table) return H1HeatTable::instance()->eval(s, rho2, v);
    return h1_heat_quadrature(s, rho2, v);
}

// ∫_0^∞ w(s) h(s, x) ds on log nodes between lo and hi plus fitted power remainders.
template <class W>
double subordinate(const KernelHandle& k, const Shell& x, double lo, double hi, W weight) {
    const int n = std::max(8, static_cast<int>(std::ceil(std::log(hi / lo) * k.quad.nodes_per_efold)) + 1);
    const auto s = log_space(lo, hi, n);
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        const double w = weight(s[i]);
        g[i] = w == 0 ? 0.0 : w * heat_inner(k, s[i], x.rho2, x.v);
    }
    return log_trapezoid(s, g) + power_tail(s[n - 2], g[n - 2], s[n - 1], g[n - 1]) +
           power_head(s[0], g[0], s[1], g[1]);
}

// Cubic Lagrange interpolation of log f on the log-uniform subordinator table.
double table_density(const StableTable& tab, double u) {
    const std::size_t n = tab.s.size();
    const double h = std::log(tab.s[1] / tab.s[0]);
    const double x = std::log(u / tab.s[0]) / h;
    const long k = std::clamp(static_cast<long>(std::floor(x)), 1L, static_cast<long>(n) - 3);
    const double f = x - k;
    const double w[4] = {-f * (f - 1) * (f - 2) / 6, (f + 1) * (f - 1) * (f - 2) / 2, -(f + 1) * f * (f - 2) / 2,
                         (f + 1) * f * (f - 1) / 6};
    double lv = 0;
    for (int m = 0; m < 4; ++m) {
        const double v = tab.f[k - 1 + m];
        if (v <= 0) return 0.0;
        lv += w[m] * std::log(v);
    }
    return std::exp(lv);
}

std::uint64_t fingerprint(const KernelHandle& k) {
    auto bits = [](double d) {
        std::uint64_t u;
        std::memcpy(&u, &d, sizeof u);
        return u;
    };
    const QuadSettings& q = k.quad;
    std::uint64_t h = CounterRng::mix(static_cast<std::uint64_t>(k.kind) * 16 + static_cast<std::uint64_t>(k.backend));
    for (std::uint64_t v : {bits(k.alpha), static_cast<std::uint64_t>(q.nodes_per_efold), bits(q.head), bits(q.tail),
                            static_cast<std::uint64_t>(q.heat_table), static_cast<std::uint64_t>(q.mc_paths), q.mc_seed})
        h = CounterRng::mix(h ^ v);
    return h;
}

template <class F>
double memo(const KernelHandle& k, double t, const Shell& x, F compute) {
    const KernelCache::Key key{fingerprint(k), t, x.rho2, x.v};
    double v;
    if (k.cache && k.cache->find(key, v)) return v;
    v = compute();
    if (k.cache) k.cache->insert(key, v);
    return v;
}

void require_kind(const KernelHandle& k, KernelKind kind) {
    k.validate();
    require(k.kind == kind, ErrorKind::usage, "kernel handle is " + to_string(k.kind) + ", not " + to_string(kind));
}

}  // namespace

double heat_shell(const KernelHandle& k, double t, double rho2, double v) {
    require(t > 0, ErrorKind::domain, "heat kernel needs t > 0");
    if (k.group->is_euclidean()) return heat_inner(k, t, rho2, v);
    const Shell x{rho2, v, 0};
    return memo(k, t, x, [&] {
        switch (k.backend) {
            case Backend::quadrature: return h1_heat_quadrature(t, rho2, v);
            case Backend::pde_grid: return pde_heat(k, t, rho2, v);
            case Backend::monte_carlo: return mc_heat(k, t, rho2, v);
            default: fail(ErrorKind::capability, "unsupported heat backend");
        }
    });
}

double heat_eval(const KernelHandle& k, double t, const GroupElement& x) {
    require_kind(k, KernelKind::heat);
    require(t > 0, ErrorKind::domain, "heat kernel needs t > 0");
    const Shell s = shell_of(k, x);
    return heat_shell(k, t, s.rho2, s.v);
}

void prepare_pde(const KernelHandle& k, std::vector<double> times) {
    require(k.backend == Backend::pde_grid, ErrorKind::usage, "prepare_pde needs the pde_grid backend");
    auto& st = *k.pde;
    std::lock_guard<std::mutex> lk(st.mu);
    for (double t : st.times) times.push_back(t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    st.times = times;
    st.pde = std::make_unique<H1HeatPDE>();
    st.pde->run(st.times);
}

double frac_heat_eval(const KernelHandle& k, double t, const GroupElement& x) {
    require_kind(k, KernelKind::frac_heat);
    require(t > 0, ErrorKind::domain, "fractional heat kernel needs t > 0");
    const Shell s = shell_of(k, x);
    return memo(k, t, s, [&] {
        // h_α(t,x) = ∫ h(s,x) f_{t,α}(s) ds, nodes taken from the cached subordinator table.
        auto tab = StableTable::get({k.alpha, t});
        const double scale = std::pow(t, 1 / k.alpha);
        const double lo = std::max(tab->s.front(), k.quad.head * s.n2);
        const double hi = std::min(tab->s.back(), k.quad.tail * std::max(scale, s.n2));
        const int stride = std::max(1, static_cast<int>(std::lround(30.0 / k.quad.nodes_per_efold)));
        std::vector<double> ss, g;
        for (std::size_t i = 0; i < tab->s.size(); i += stride) {
            if (tab->s[i] < lo) continue;
            if (tab->s[i] > hi) break;
            ss.push_back(tab->s[i]);
            g.push_back(tab->f[i] == 0 ? 0.0 : tab->f[i] * heat_inner(k, tab->s[i], s.rho2, s.v));
        }
        const std::size_t n = ss.size();
        if (tab->s.back() < k.quad.tail * std::max(scale, s.n2)) {
            // Far field reaching past the table: interpolate the table, then the large-s series.
            return subordinate(k, s, lo, k.quad.tail * std::max(scale, s.n2), [&](double u) {
                return u >= tab->s.back() ? stable_density_series(k.alpha, t, u, 30) : table_density(*tab, u);
            });
        }
        return log_trapezoid(ss, g) + power_tail(ss[n - 2], g[n - 2], ss[n - 1], g[n - 1]) +
               power_head(ss[0], g[0], ss[1], g[1]);
    });
}

double poisson_constant(double alpha) { return 1.0 / (std::pow(4.0, alpha) * std::tgamma(alpha)); }

double poisson_eval(const KernelHandle& k, double t, const GroupElement& x) {
    require_kind(k, KernelKind::poisson);
    require(t > 0, ErrorKind::domain, "Poisson kernel needs t > 0");
    const Shell s = shell_of(k, x);
    return memo(k, t, s, [&] {
        const double a = k.alpha, C = poisson_constant(a) * std::pow(t, 2 * a);
        const double scale = std::max(t * t, s.n2);
        return subordinate(k, s, k.quad.head * scale, k.quad.tail * scale,
                           [&](double r) { return C * std::pow(r, -1 - a) * std::exp(-t * t / (4 * r)); });
    });
}

double riesz_eval(const KernelHandle& k, const GroupElement& x) {
    require_kind(k, KernelKind::riesz);
    const Shell s = shell_of(k, x);
    require(s.n2 > 0, ErrorKind::singularity, "Riesz kernel is singular at 0");
    return memo(k, 0.0, s, [&] {
        const double a = k.alpha, c = 1 / std::tgamma(a / 2);
        return subordinate(k, s, k.quad.head * s.n2, k.quad.tail * s.n2,
                           [&](double u) { return c * std::pow(u, a / 2 - 1); });
    });
}

double tilde_riesz_eval(const KernelHandle& k, const GroupElement& x) {
    require_kind(k, KernelKind::tilde_riesz);
    const Shell s = shell_of(k, x);
    require(s.n2 > 0, ErrorKind::singularity, "Riesz kernel is singular at 0");
    return memo(k, 0.0, s, [&] {
        const double a = k.alpha, c = (a / 2) / gamma_fn(a / 2);
        return subordinate(k, s, k.quad.head * s.n2, k.quad.tail * s.n2,
                           [&](double u) { return c * std::pow(u, a / 2 - 1); });
    });
}

double kernel_eval(const KernelHandle& k, double t, const GroupElement& x) {
    switch (k.kind) {
        case KernelKind::heat: return heat_eval(k, t, x);
        case KernelKind::frac_heat: return frac_heat_eval(k, t, x);
        case KernelKind::poisson: return poisson_eval(k, t, x);
        case KernelKind::riesz: return riesz_eval(k, x);
        case KernelKind::tilde_riesz: return tilde_riesz_eval(k, x);
    }
    return 0;
}

double h1_grid_mass(const KernelHandle& k, double t, int na, int nc, double La, double Lc) {
    require_kind(k, KernelKind::heat);
    require(k.group->is_heisenberg(), ErrorKind::capability, "grid mass is defined for H1");
    require(na >= 3 && nc >= 3 && La > 0 && Lc > 0, ErrorKind::domain, "invalid mass grid");
    const double da = 2 * La / (na - 1), dc = 2 * Lc / (nc - 1);
    // c-segments of [0, Lc] aligned with the lattice cells (symmetric lattice).
    std::vector<std::pair<double, double>> seg;
    {
        std::vector<double> cuts{0.0};
        for (int j = 0; j < nc; ++j) {
            const double c = (j - 0.5 * (nc - 1)) * dc;
            if (c > 0) cuts.push_back(c);
        }
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) seg.push_back({cuts[i], cuts[i + 1]});
    }
    const GaussRule& g4 = gauss_legendre(4);
    std::map<double, double> line;  // r² → ∫ h dc over [−Lc, Lc]
    double total = 0;
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < na; ++j) {
            const double a = (i - 0.5 * (na - 1)) * da, b = (j - 0.5 * (na - 1)) * da;
            const double w = (i == 0 || i == na - 1 ? 0.5 : 1.0) * (j == 0 || j == na - 1 ? 0.5 : 1.0);
            const double r2 = a * a + b * b;
            auto it = line.find(r2);
            if (it == line.end()) {
                double s = 0;
                for (auto [c0, c1] : seg)
                    for (int q = 0; q < 4; ++q)
                        s += 0.5 * (c1 - c0) * g4.w[q] * heat_shell(k, t, r2, c0 + 0.5 * (c1 - c0) * (g4.x[q] + 1));
                it = line.emplace(r2, 2 * s).first;
            }
            total += w * it->second;
        }
    return total * da * da;
}

// ---------------------------------------------------------------------------------------------
// Property report

bool KernelReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const KernelCheck& c) { return c.pass; });
}

nlohmann::json KernelReport::to_json() const {
    nlohmann::json j = {{"handle", handle}, {"checks", nlohmann::json::array()}};
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"measured", c.measured},
                               {"residual", c.residual}, {"detail", c.detail}});
    return j;
}

namespace {

// Test points: norms in [lo, hi] along the first axis, the last axis and a mixed direction.
std::vector<GroupElement> test_points(const GroupPtr& g, const std::vector<double>& norms) {
    std::vector<GroupElement> pts;
    const int n = g->dim();
    for (double r : norms) {
        std::vector<double> e(n, 0.0);
        e[0] = r;
        pts.emplace_back(g, e);
        if (g->is_heisenberg()) {
            pts.emplace_back(g, std::vector<double>{0, 0, r * r / 4});
            // |(a, b, c)| = r with a = b and 16c² = r⁴ − (a² + b²)², half of r² horizontal.
            const double h2 = 0.5 * r * r;
            pts.emplace_back(g, std::vector<double>{std::sqrt(h2 / 2), -std::sqrt(h2 / 2),
                                                    std::sqrt(std::max(0.0, r * r * r * r - h2 * h2)) / 4});
        } else if (n > 1) {
            std::vector<double> d(n, r / std::sqrt(double(n)));
            pts.emplace_back(g, d);
        }
    }
    return pts;
}

// Natural time at which the kernel family is evaluated for the scale-1 point.
double time_scale(const KernelHandle& k, double lam) {
    switch (k.kind) {
        case KernelKind::heat: return lam * lam;
        case KernelKind::frac_heat: return std::pow(lam, 2 * k.alpha);
        case KernelKind::poisson: return lam;
        default: return 1.0;
    }
}

// Radial integral of the kernel with the sphere rule: ∫ K dx = ∫ r^{Q-1} Σ w K(δ_r ω) dr.
double polar_mass(const KernelHandle& k, double t, double scale) {
    const GroupSpec& g = *k.group;
    const SphereRule rule = sphere_rule(g, g.is_heisenberg() ? 16 : 8);
    // Merge sphere nodes with identical shells.
    std::map<std::pair<double, double>, double> shells;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
        double rho2 = 0, v2 = 0;
        for (int d = 0; d < g.dim(); ++d) (d < g.horizontal_dim() ? rho2 : v2) += rule.points[i][d] * rule.points[i][d];
        shells[{rho2, std::sqrt(v2)}] += rule.weights[i];
    }
    const int n = 10 * 23 + 1;
    const auto r = log_space(1e-5 * scale, 1e5 * scale, n);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (const auto& [sh, w] : shells) {
            std::vector<double> c(g.dim(), 0.0);
            c[0] = r[i] * std::sqrt(sh.first);
            if (g.is_heisenberg()) c[2] = r[i] * r[i] * sh.second;
            s += w * kernel_eval(k, t, GroupElement(k.group, c));
        }
        f[i] = s * std::pow(r[i], g.Q - 1);
    }
    return log_trapezoid(r, f) + power_tail(r[n - 2], f[n - 2], r[n - 1], f[n - 1]);
}

KernelCheck check_mass(const KernelHandle& k) {
    require(k.kind == KernelKind::heat || k.kind == KernelKind::frac_heat || k.kind == KernelKind::poisson,
            ErrorKind::capability, "mass check is not defined for Riesz kernels");
    KernelCheck c;
    c.name = "mass";
    const double t = 1.0;
    double m;
    if (k.kind == KernelKind::heat && k.group->is_heisenberg()) {
        m = h1_grid_mass(k, t, 64, 96, 6.0, 12.0);
        c.detail = "H1 lattice 64x64x96 on [-6,6]^2 x [-12,12], t = 1";
    } else {
        m = polar_mass(k, t, 1.0);
        c.detail = "polar quadrature, t = 1";
    }
    c.measured = m;
    c.residual = std::abs(m - 1);
    c.pass = c.residual <= 1e-3;
    return c;
}

KernelCheck check_homogeneity(const KernelHandle& k) {
    KernelCheck c;
    c.name = "homogeneity";
    const double lam = 2.0;
    const GroupSpec& g = *k.group;
    const bool riesz = k.kind == KernelKind::riesz || k.kind == KernelKind::tilde_riesz;
    const double degree = riesz ? k.alpha - g.Q : -g.Q;
    double worst = 0;
    const std::vector<double> times = riesz ? std::vector<double>{1.0} : std::vector<double>{0.25, 1.0, 4.0};
    if (k.backend == Backend::pde_grid) {
        std::vector<double> all = times;
        for (double t : times) all.push_back(t * time_scale(k, lam));
        prepare_pde(k, all);
    }
    for (double t : times)
        for (const auto& x : test_points(k.group, {0.5, 1.0, 2.0})) {
            const double base = kernel_eval(k, t, x);
            const double scaled = kernel_eval(k, t * time_scale(k, lam), dilate(lam, x));
            worst = std::max(worst, std::abs(scaled * std::pow(lam, -degree) / base - 1));
        }
    c.residual = worst;
    c.measured = worst;
    const double tol = (k.backend == Backend::pde_grid || k.backend == Backend::monte_carlo) ? 3e-2 : 1e-2;
    c.pass = worst <= tol;
    c.detail = "lambda = 2, relative residual";
    return c;
}

KernelCheck check_symmetry(const KernelHandle& k) {
    KernelCheck c;
    c.name = "symmetry";
    double worst = 0;
    if (k.backend == Backend::pde_grid) prepare_pde(k, {0.25, 1.0, 4.0});
    for (double t : {0.25, 1.0, 4.0})
        for (const auto& x : test_points(k.group, {0.3, 1.0, 2.5}))
            worst = std::max(worst, std::abs(kernel_eval(k, t, x) - kernel_eval(k, t, group_inverse(x))));
    c.residual = worst;
    c.pass = worst <= 1e-10;
    c.detail = "max |K(x) - K(x^-1)|";
    return c;
}

KernelCheck check_sandwich(const KernelHandle& k) {
    require(k.kind == KernelKind::heat, ErrorKind::capability, "Gaussian sandwich applies to the heat kernel");
    KernelCheck c;
    c.name = "gaussian_sandwich";
    const int Q = k.group->Q;
    double cmax = 1;
    std::vector<double> norms;
    for (int i = 0; i <= 12; ++i) norms.push_back(0.25 * i);
    for (double t : {0.25, 1.0, 4.0})
        for (const auto& x : test_points(k.group, norms)) {
            const double h = heat_eval(k, t, x), n2 = std::pow(homogeneous_norm(x), 2);
            const double base = std::pow(t, -0.5 * Q);
            // Smallest c with c⁻¹ e^{-c n²/t} ≤ h/base ≤ c e^{-n²/(ct)}; both sides are monotone in c.
            auto ok = [&](double cc) {
                return h <= cc * base * std::exp(-n2 / (cc * t)) && h >= base / cc * std::exp(-cc * n2 / t);
            };
            double lo = 1, hi = 2;
            while (!ok(hi) && hi < 1e6) hi *= 2;
            if (ok(lo)) hi = lo;
            for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (ok(mid) ? hi : lo) = mid;
            }
            cmax = std::max(cmax, hi);
        }
    c.measured = cmax;
    c.pass = cmax < 1e6;
    c.detail = "smallest c >= 1 over t in {0.25,1,4}, |x| <= 3";
    return c;
}

// Envelope each kernel is compared against; the measured constant is sup(K / envelope).
double envelope(const KernelHandle& k, double t, double n) {
    const double Q = k.group->Q, a = k.alpha;
    switch (k.kind) {
        case KernelKind::frac_heat:
            return std::pow(n, 2 * a) >= t ? std::pow(n, -Q) : std::pow(t, -Q / (2 * a));
        case KernelKind::poisson: return std::pow(t, 2 * a) / std::pow(t * t + n * n, 0.5 * (Q + 2 * a));
        case KernelKind::riesz:
        case KernelKind::tilde_riesz: return std::pow(n, a - Q);
        default: fail(ErrorKind::capability, "decay bound is not defined for the heat kernel");
    }
}

KernelCheck check_decay(const KernelHandle& k) {
    KernelCheck c;
    c.name = "decay_bound";
    std::vector<double> norms = log_space(0.05, 20, 9);
    const bool riesz = k.kind == KernelKind::riesz || k.kind == KernelKind::tilde_riesz;
    const std::vector<double> times = riesz ? std::vector<double>{1.0} : log_space(0.1, 10, 5);
    double hi = 0, lo = kInfinity;
    for (double t : times)
        for (const auto& x : test_points(k.group, norms)) {
            const double r = kernel_eval(k, t, x) / envelope(k, t, homogeneous_norm(x));
            hi = std::max(hi, r);
            lo = std::min(lo, r);
        }
    c.measured = hi;
    c.residual = lo;
    c.pass = std::isfinite(hi) && hi > 0 && lo > 0;
    c.detail = "sup and inf of kernel / envelope over t in [0.1,10], |x| in [0.05,20]";
    return c;
}

KernelCheck check_semigroup(const KernelHandle& k) {
    require(k.kind == KernelKind::heat && k.group->is_euclidean() && k.group->dim() == 1, ErrorKind::capability,
            "semigroup check is implemented for the heat kernel on R1");
    KernelCheck c;
    c.name = "semigroup";
    const double t = 0.7, s = 1.3;
    double worst = 0;
    const GaussRule q = composite_gauss(-40, 40, 400, 8);
    for (double x : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        double conv = 0;
        for (std::size_t i = 0; i < q.x.size(); ++i)
            conv += q.w[i] * heat_shell(k, t, (x - q.x[i]) * (x - q.x[i]), 0) * heat_shell(k, s, q.x[i] * q.x[i], 0);
        worst = std::max(worst, std::abs(conv - heat_shell(k, t + s, x * x, 0)));
    }
    c.residual = worst;
    c.pass = worst <= 1e-6;
    c.detail = "h_0.7 * h_1.3 vs h_2.0 at x in {0,0.5,1,2,4}";
    return c;
}

}  // namespace

KernelReport kernel_property_report(const KernelHandle& k, const std::vector<std::string>& checks) {
    k.validate();
    KernelReport rep;
    rep.handle = k.to_json();
    for (const auto& name : checks) {
        if (name == "mass") rep.checks.push_back(check_mass(k));
        else if (name == "homogeneity") rep.checks.push_back(check_homogeneity(k));
        else if (name == "symmetry") rep.checks.push_back(check_symmetry(k));
        else if (name == "gaussian_sandwich") rep.checks.push_back(check_sandwich(k));
        else if (name == "decay_bound") rep.checks.push_back(check_decay(k));
        else if (name == "semigroup") rep.checks.push_back(check_semigroup(k));
        else fail(ErrorKind::capability, "unknown kernel check '" + name + "'");
    }
    return rep;
}

KernelTable tabulate_kernel(const KernelHandle& k, const std::vector<double>& times, const std::vector<double>& norms) {
    KernelTable tab;
    for (double t : times)
        for (double n : norms) {
            std::vector<double> c(k.group->dim(), 0.0);
            c[0] = n;
            tab.t.push_back(t);
            tab.norm.push_back(n);
            tab.value.push_back(kernel_eval(k, t, GroupElement(k.group, c)));
        }
    return tab;
}

void write_kernel_csv(const KernelTable& tab, const std::string& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path);
    out.precision(17);
    out << "t,norm,value\n";
    for (std::size_t i = 0; i < tab.t.size(); ++i) out << tab.t[i] << ',' << tab.norm[i] << ',' << tab.value[i] << '\n';
    require(static_cast<bool>(out), ErrorKind::io, "write failed for " + path);
}

}  // namespace chg
