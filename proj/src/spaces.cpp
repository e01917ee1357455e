#include "chg/spaces.hpp"

#include <algorithm>
#include <cmath>

#include "chg/error.hpp"
#include "chg/kernels.hpp"
#include "chg/numerics.hpp"

namespace chg {

namespace {

double finest_h(const GridSpec& g) {
    double h = INFINITY;
    for (int j = 0; j < g.group->horizontal_dim(); ++j) h = std::min(h, g.spacing(j));
    return h;
}

double horizontal_half_width(const GridSpec& g) {
    double L = 0;
    for (int j = 0; j < g.group->horizontal_dim(); ++j) L = std::max(L, g.extents[j]);
    return L;
}

double corner_radius(const GridSpec& g) {
    const int d = g.dim();
    double best = 0;
    std::vector<double> x(d);
    for (int mask = 0; mask < (1 << d); ++mask) {
        for (int j = 0; j < d; ++j) x[j] = (mask >> j & 1) ? g.extents[j] : -g.extents[j];
        best = std::max(best, norm_raw(*g.group, x.data()));
    }
    return best;
}

bool in_box(const GridSpec& g, const double* x) {
    for (int j = 0; j < g.dim(); ++j)
        if (std::abs(x[j]) > g.extents[j]) return false;
    return true;
}

// e^{k/n} for every integer k with lo <= e^{k/n} <= hi.
std::vector<double> anchored_nodes(double lo, double hi, int per_efold) {
    require(per_efold >= 1 && lo > 0 && hi > lo, ErrorKind::domain, "invalid node range");
    std::vector<double> t;
    const long k0 = static_cast<long>(std::ceil(std::log(lo) * per_efold - 1e-9));
    const long k1 = static_cast<long>(std::floor(std::log(hi) * per_efold + 1e-9));
    for (long k = k0; k <= k1; ++k) t.push_back(std::exp(static_cast<double>(k) / per_efold));
    return t;
}

// Gauss panels in log r on [lo, hi] with interior edges on the lattice j/per_efold.
void log_panels(double lo, double hi, int per_efold, int q, std::vector<double>& r, std::vector<double>& w) {
    std::vector<double> edges{std::log(lo)};
    const double step = 1.0 / per_efold;
    double e = std::ceil(edges.back() / step) * step;
    if (e - edges.back() < 0.25 * step) e += step;
    for (; e < std::log(hi); e += step) edges.push_back(e);
    if (std::log(hi) - edges.back() < 0.25 * step && edges.size() > 1) edges.back() = std::log(hi);
    else edges.push_back(std::log(hi));
    const auto& gl = gauss_legendre(q);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i], b = edges[i + 1];
        for (int j = 0; j < q; ++j) {
            r.push_back(std::exp(0.5 * (a + b) + 0.5 * (b - a) * gl.x[j]));
            w.push_back(0.5 * (b - a) * gl.w[j]);
        }
    }
}

bool is_zero(const ScalarField& f) { return f.max_abs() == 0; }

double vec_norm_p(const std::vector<ScalarField>& comps, double p) {
    if (comps.size() == 1) return lp_norm(comps[0], p);
    ScalarField m = ScalarField::zeros(comps[0].grid);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        double s = 0;
        for (const auto& c : comps) s += c.values[i] * c.values[i];
        m.values[i] = std::sqrt(s);
    }
    return lp_norm(m, p);
}

ScalarField magnitude(const std::vector<ScalarField>& comps) {
    ScalarField m = ScalarField::zeros(comps[0].grid);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        double s = 0;
        for (const auto& c : comps) s += c.values[i] * c.values[i];
        m.values[i] = std::sqrt(s);
    }
    return m;
}

double eta_fn(double s, double a, double b) {
    auto step = [](double x) {
        if (x <= 0) return 1.0;
        if (x >= 1) return 0.0;
        const double p = std::exp(-1 / (1 - x)), q = std::exp(-1 / x);
        return p / (p + q);
    };
    if (s <= a / 2 || s >= 2 * b) return 0;
    if (s < a) return step((a - s) / (a / 2));
    if (s > b) return step((s - b) / b);
    return 1;
}

// 4-point Lagrange on a uniform grid l0 + i·dl.
double lagrange_uniform(const std::vector<double>& v, double l0, double dl, double l) {
    const double u = (l - l0) / dl;
    const int n = static_cast<int>(v.size());
    int i = static_cast<int>(std::floor(u)) - 1;
    i = std::clamp(i, 0, n - 4);
    const double x = u - i;
    double acc = 0;
    for (int a = 0; a < 4; ++a) {
        double w = 1;
        for (int b = 0; b < 4; ++b)
            if (b != a) w *= (x - b) / (a - b);
        acc += w * v[i + a];
    }
    return acc;
}

// Poisson-extension slices u(t) and ∂_t u(t) from a flow.
ScalarField poisson_u(const HeatFlow& flow, double alpha, double t) {
    const double C = poisson_constant(alpha);
    return flow.integrate([&](double s) { return C * std::pow(t, 2 * alpha) * std::pow(s, -1 - alpha) * std::exp(-t * t / (4 * s)); },
                          "P_alpha");
}

ScalarField poisson_ut(const HeatFlow& flow, double alpha, double t) {
    const double C = poisson_constant(alpha), a = alpha;
    return flow.integrate(
        [&](double s) {
            return (2 * a * std::pow(t, 2 * a - 1) - std::pow(t, 2 * a + 1) / (2 * s)) * C * std::pow(s, -1 - a) *
                   std::exp(-t * t / (4 * s));
        },
        "dt P_alpha");
}

// Polar quadrature of a ball B(x0, rho): calls fn(point, weight); weights sum to ≈ |B|.
struct BallRule {
    std::vector<std::vector<double>> dirs;
    std::vector<double> dir_w;
    std::vector<double> u, uw;  // radial nodes on [0,1] with weights u^{Q−1}du
};

BallRule make_ball_rule(const GroupSpec& g, int radial, int sphere_res) {
    BallRule b;
    const auto rule = sphere_rule(g, std::max(2, sphere_res));
    b.dirs = rule.points;
    b.dir_w = rule.weights;
    const auto& gl = gauss_legendre(radial);
    for (int i = 0; i < radial; ++i) {
        const double u = 0.5 * (1 + gl.x[i]);
        b.u.push_back(u);
        b.uw.push_back(0.5 * gl.w[i] * std::pow(u, g.Q - 1));
    }
    return b;
}

template <class Fn>
void ball_sweep(const GroupSpec& g, const BallRule& b, const double* x0, double rho, Fn&& fn) {
    double y[8], p[8];
    const double scale = std::pow(rho, g.Q);
    for (std::size_t i = 0; i < b.u.size(); ++i)
        for (std::size_t k = 0; k < b.dirs.size(); ++k) {
            dilate_raw(g, rho * b.u[i], b.dirs[k].data(), y);
            product_raw(g, x0, y, p);
            fn(p, scale * b.uw[i] * b.dir_w[k]);
        }
}

std::vector<std::vector<double>> ball_centers(const GridSpec& g, int per_axis) {
    const int d = g.dim();
    std::vector<std::vector<double>> out;
    std::vector<int> idx(d, 0);
    const int n = std::max(1, per_axis);
    while (true) {
        std::vector<double> c(d);
        for (int j = 0; j < d; ++j)
            c[j] = n == 1 ? 0.0 : -0.5 * g.extents[j] + g.extents[j] * idx[j] / (n - 1);
        out.push_back(c);
        int j = d - 1;
        while (j >= 0 && ++idx[j] == n) idx[j--] = 0;
        if (j < 0) break;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Panel

std::vector<FieldFunction> standard_panel(const GroupSpec& g, bool reduced) {
    const int d = g.dim();
    std::vector<FieldFunction> out;
    auto make = [&](const std::string& id, double lambda, double shift) {
        FieldFunction fn;
        fn.id = id;
        fn.lambda = lambda;
        fn.center.assign(d, 0.0);
        fn.center[0] = shift;
        return fn;
    };
    if (reduced) {
        out.push_back(make("gaussian", 1, 0));
        out.push_back(make("bump", 1, 0));
    } else {
        for (double l : {0.5, 0.75, 1.0, 1.5, 2.0})
            for (const char* id : {"gaussian", "bump"}) out.push_back(make(id, l, 0));
        for (double l : {0.5, 0.75, 1.0, 1.5})
            for (const char* id : {"gaussian", "bump"}) out.push_back(make(id, l, 0.75));
    }
    FieldFunction two = make("two_bump", 1, 0);
    two.param = 1.2;
    out.push_back(two);
    FieldFunction lg = make("log_trunc", 1, 0);
    lg.sigma = 2;
    lg.param = 3;
    out.push_back(lg);
    return out;
}

std::vector<FieldFunction> bmo_pairing_panel(const GroupSpec& g) {
    std::vector<FieldFunction> out;
    auto make = [&](const std::string& id, double amp, double lambda) {
        FieldFunction fn;
        fn.id = id;
        fn.amplitude = amp;
        fn.lambda = lambda;
        fn.center.assign(g.dim(), 0.0);
        return fn;
    };
    for (double l : {1.0, 2.0}) {
        FieldFunction lg = make("log_trunc", 1, l);
        lg.sigma = 2;
        lg.param = 3;
        out.push_back(lg);
    }
    out.push_back(make("plateau", 1, 1));
    out.push_back(make("plateau", -1, 0.5));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Enums

std::string to_string(BesovVariant v) {
    switch (v) {
        case BesovVariant::direct: return "direct";
        case BesovVariant::heat_dt: return "heat_dt";
        case BesovVariant::poisson_grad: return "poisson_grad";
        case BesovVariant::poisson_dt: return "poisson_dt";
        case BesovVariant::poisson_lap: return "poisson_lap";
    }
    return "?";
}

BesovVariant besov_variant_from_string(const std::string& s) {
    for (auto v : {BesovVariant::direct, BesovVariant::heat_dt, BesovVariant::poisson_grad, BesovVariant::poisson_dt,
                   BesovVariant::poisson_lap})
        if (to_string(v) == s) return v;
    fail(ErrorKind::usage, "unknown Besov variant '" + s + "'");
}

std::string to_string(PhiVariant v) {
    switch (v) {
        case PhiVariant::grad: return "grad";
        case PhiVariant::dt: return "dt";
        case PhiVariant::lap: return "lap";
        case PhiVariant::grad_dt: return "grad_dt";
    }
    return "?";
}

PhiVariant phi_variant_from_string(const std::string& s) {
    for (auto v : {PhiVariant::grad, PhiVariant::dt, PhiVariant::lap, PhiVariant::grad_dt})
        if (to_string(v) == s) return v;
    fail(ErrorKind::usage, "unknown phi variant '" + s + "'");
}

std::string to_string(SobolevVariant v) {
    switch (v) {
        case SobolevVariant::grad: return "grad";
        case SobolevVariant::dt: return "dt";
        case SobolevVariant::hess: return "hess";
    }
    return "?";
}

SobolevVariant sobolev_variant_from_string(const std::string& s) {
    for (auto v : {SobolevVariant::grad, SobolevVariant::dt, SobolevVariant::hess})
        if (to_string(v) == s) return v;
    fail(ErrorKind::usage, "unknown square-function variant '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// Log-scale integral

double log_scale_integral(const std::vector<double>& t, const std::vector<double>& g, double head_exponent,
                          double* tail_share) {
    require(t.size() == g.size() && t.size() >= 2, ErrorKind::usage, "log_scale_integral needs two or more nodes");
    double body = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) body += 0.5 * (g[i] + g[i + 1]) * std::log(t[i + 1] / t[i]);
    const double head = head_exponent > 0 ? g.front() / head_exponent : 0;
    double tail = 0;
    const std::size_t n = t.size();
    bool decaying = true;
    if (g[n - 1] > 0) {
        if (g[n - 2] > g[n - 1]) {
            const double m = std::log(g[n - 2] / g[n - 1]) / std::log(t[n - 1] / t[n - 2]);
            tail = g[n - 1] / m;
        } else {
            decaying = false;
        }
    }
    const double total = head + body + tail;
    if (tail_share) *tail_share = !decaying ? 1.0 : (total > 0 ? (head + tail) / total : 0.0);
    return total;
}

// ---------------------------------------------------------------------------------------------
// Besov seminorms

void check_seminorm_range(const SeminormParams& prm) {
    require(prm.p >= 1, ErrorKind::domain, "Besov seminorms need p >= 1");
    require(prm.q >= 1 && std::isfinite(prm.q), ErrorKind::domain, "Besov seminorms need 1 <= q < inf");
    require(prm.alpha > 0 && prm.alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    const double s = prm.s;
    switch (prm.variant) {
        case BesovVariant::direct:
            require(s > 0 && s < 1, ErrorKind::domain, "direct Besov seminorm requires s in (0,1)");
            break;
        case BesovVariant::heat_dt:
            require(s > 0 && s < 1, ErrorKind::domain, "heat_dt seminorm requires s in (0,1)");
            break;
        case BesovVariant::poisson_grad:
            require(s > 0 && s < 1, ErrorKind::domain, "poisson_grad seminorm requires s in (0,1)");
            break;
        case BesovVariant::poisson_dt:
            require(s > 0, ErrorKind::domain, "poisson_dt seminorm requires s > 0");
            require(s < 2 * prm.alpha, ErrorKind::domain, "poisson_dt seminorm requires s < 2α");
            break;
        case BesovVariant::poisson_lap:
            require(s > 0 && s < 2, ErrorKind::domain, "poisson_lap seminorm requires s in (0,2)");
            break;
    }
}

ModulusTable modulus_table(const ScalarField& f, const SeminormParams& prm) {
    require(prm.p >= 1, ErrorKind::domain, "modulus of continuity needs p >= 1");
    const GridSpec& g = f.grid;
    const GroupSpec& G = *g.group;
    const int d = g.dim();
    const int stride = prm.stride > 0 ? prm.stride : (G.is_heisenberg() ? 2 : 1);
    for (int j = 0; j < d; ++j)
        require((g.shape[j] - 1) % stride == 0, ErrorKind::domain, "stride must divide N-1 on every axis");

    ModulusTable t;
    t.p = prm.p;
    t.Q = G.Q;
    t.r_lo = finest_h(g);
    t.R = 2 * corner_radius(g);
    const bool inf = std::isinf(prm.p);
    t.norm_p = lp_norm(f, prm.p);
    log_panels(t.r_lo, t.R, prm.panels_per_efold, 4, t.r, t.wr);
    const auto rule = sphere_rule(G, std::max(2, prm.sphere_res));
    t.dir_w = rule.weights;

    // Sub-lattice points and values.
    std::vector<std::vector<double>> pts;
    std::vector<double> vals;
    {
        std::vector<int> idx(d, 0);
        double x[8];
        while (true) {
            std::size_t flat = 0;
            for (int j = 0; j < d; ++j) {
                x[j] = g.coord(j, idx[j] * stride);
                flat += static_cast<std::size_t>(idx[j] * stride) * g.stride(j);
            }
            pts.emplace_back(x, x + d);
            vals.push_back(f.values[flat]);
            int j = d - 1;
            while (j >= 0 && (++idx[j]) * stride >= g.shape[j]) idx[j--] = 0;
            if (j < 0) break;
        }
    }
    const double cell = g.cell_volume() * std::pow(static_cast<double>(stride), d);
    const double np = inf ? 0 : std::pow(t.norm_p, prm.p);

    t.omega.assign(t.r.size(), std::vector<double>(rule.points.size(), 0.0));
    double y[8], yi[8], xp[8], xm[8];
    for (std::size_t i = 0; i < t.r.size(); ++i) {
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            dilate_raw(G, t.r[i], rule.points[k].data(), y);
            for (int j = 0; j < d; ++j) yi[j] = -y[j];
            if (inf) {
                double m = 0;
                for (std::size_t n = 0; n < pts.size(); ++n) {
                    product_raw(G, pts[n].data(), y, xp);
                    m = std::max(m, std::abs(interpolate(f, xp) - vals[n]));
                    product_raw(G, pts[n].data(), yi, xm);
                    if (!in_box(g, xm)) m = std::max(m, std::abs(vals[n]));
                }
                t.omega[i][k] = m;
            } else {
                double diff = 0, inside = 0;
                for (std::size_t n = 0; n < pts.size(); ++n) {
                    product_raw(G, pts[n].data(), y, xp);
                    const double v = interpolate(f, xp);
                    diff += std::pow(std::abs(v - vals[n]), prm.p);
                    inside += std::pow(std::abs(v), prm.p);
                }
                // Points x outside the box contribute |f(xy)|^p; their total is what the shift moved in.
                const double outside = std::max(0.0, np - inside * cell);
                t.omega[i][k] = std::pow(diff * cell + outside, 1 / prm.p);
            }
        }
    }
    return t;
}

Seminorm besov_from_table(const ModulusTable& t, double s, double q) {
    require(s > 0 && s < 1, ErrorKind::domain, "direct Besov seminorm requires s in (0,1)");
    require(q >= 1 && std::isfinite(q), ErrorKind::domain, "Besov seminorms need 1 <= q < inf");
    double body = 0, head = 0, tail = 0;
    const double Sw = pairwise_sum(t.dir_w);
    for (std::size_t i = 0; i < t.r.size(); ++i) {
        double acc = 0;
        for (std::size_t k = 0; k < t.dir_w.size(); ++k) acc += t.dir_w[k] * std::pow(t.omega[i][k], q);
        body += t.wr[i] * acc * std::pow(t.r[i], -s * q);
    }
    // ω ∝ r below the first node.
    for (std::size_t k = 0; k < t.dir_w.size(); ++k) {
        const double slope = t.omega[0][k] / t.r[0];
        head += t.dir_w[k] * std::pow(slope, q) * std::pow(t.r_lo, (1 - s) * q) / ((1 - s) * q);
    }
    const double far = std::isinf(t.p) ? t.norm_p : std::pow(2.0, 1 / t.p) * t.norm_p;
    tail = Sw * std::pow(far, q) * std::pow(t.R, -s * q) / (s * q);
    const double total = body + head + tail;
    Seminorm out;
    out.value = std::pow(total, 1 / q);
    // Head and tail are model-based; a 10% error in them propagates through the q-th root.
    out.error_estimate = total > 0 ? out.value * 0.1 * (head + tail) / (q * total) : 0;
    out.detail = {{"functional", "besov_direct"}, {"s", s}, {"p", t.p}, {"q", q},
                  {"head_share", total > 0 ? head / total : 0}, {"tail_share", total > 0 ? tail / total : 0},
                  {"r_lo", t.r_lo}, {"R", t.R}, {"radial_nodes", t.r.size()}, {"directions", t.dir_w.size()}};
    return out;
}

Seminorm besov_direct(const ScalarField& f, const SeminormParams& prm) {
    SeminormParams p = prm;
    p.variant = BesovVariant::direct;
    check_seminorm_range(p);
    if (is_zero(f)) return Seminorm{0, 0, {{"functional", "besov_direct"}}};
    return besov_from_table(modulus_table(f, p), p.s, p.q);
}

Seminorm besov_heat(const HeatFlow& flow, const SeminormParams& prm) {
    SeminormParams p = prm;
    p.variant = BesovVariant::heat_dt;
    check_seminorm_range(p);
    const ScalarField& f = flow.base();
    if (is_zero(f)) return Seminorm{0, 0, {{"functional", "besov_heat"}}};
    const double h = finest_h(f.grid), L = horizontal_half_width(f.grid), a = p.alpha;
    const auto t = anchored_nodes(std::pow(0.01 * h * h, a), std::pow(100 * L * L, a), p.t_per_efold);
    auto prof = StableProfile::get(a);
    std::vector<double> g(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double tk = t[k];
        ScalarField ut = flow.integrate([&](double s) { return prof->density_dt(tk, s); }, "dt h_alpha");
        g[k] = std::pow(std::pow(tk, 1 - p.s / 2) * lp_norm(ut, p.p), p.q);
    }
    double share = 0;
    const double total = log_scale_integral(t, g, (1 - p.s / 2) * p.q, &share);
    Seminorm out;
    out.value = std::pow(total, 1 / p.q);
    out.error_estimate = out.value * (0.1 * share + flow.tail_mismatch() * 0.1) / p.q;
    out.detail = {{"functional", "besov_heat"}, {"s", p.s}, {"alpha", a}, {"order", a * p.s}, {"p", p.p}, {"q", p.q},
                  {"t_nodes", t.size()}, {"extrapolated_share", share}, {"tail_mismatch", flow.tail_mismatch()}};
    return out;
}

Seminorm besov_poisson(const HeatFlow& flow, const SeminormParams& prm) {
    check_seminorm_range(prm);
    require(prm.variant == BesovVariant::poisson_grad || prm.variant == BesovVariant::poisson_dt ||
                prm.variant == BesovVariant::poisson_lap,
            ErrorKind::usage, "besov_poisson needs a Poisson variant");
    const ScalarField& f = flow.base();
    const std::string name = "besov_" + to_string(prm.variant);
    if (is_zero(f)) return Seminorm{0, 0, {{"functional", name}}};
    const double h = finest_h(f.grid), L = horizontal_half_width(f.grid), a = prm.alpha, s = prm.s;
    const auto t = anchored_nodes(0.1 * h, 100 * L, prm.t_per_efold);
    std::vector<double> g(t.size());
    double head = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        double nrm = 0, power = 0;
        switch (prm.variant) {
            case BesovVariant::poisson_grad:
                nrm = vec_norm_p(horizontal_gradient(poisson_u(flow, a, t[k])), prm.p);
                power = 1 - s;
                head = 1 - s;
                break;
            case BesovVariant::poisson_dt:
                nrm = lp_norm(poisson_ut(flow, a, t[k]), prm.p);
                power = 1 - s;
                head = 2 * a - s;
                break;
            default:
                nrm = lp_norm(sublaplacian(poisson_u(flow, a, t[k])), prm.p);
                power = 2 - s;
                head = 2 - s;
                break;
        }
        g[k] = std::pow(std::pow(t[k], power) * nrm, prm.q);
    }
    double share = 0;
    const double total = log_scale_integral(t, g, head * prm.q, &share);
    Seminorm out;
    out.value = std::pow(total, 1 / prm.q);
    out.error_estimate = out.value * (0.1 * share + flow.tail_mismatch() * 0.1) / prm.q;
    out.detail = {{"functional", name}, {"s", s}, {"alpha", a}, {"p", prm.p}, {"q", prm.q}, {"t_nodes", t.size()},
                  {"extrapolated_share", share}, {"tail_mismatch", flow.tail_mismatch()}};
    return out;
}

Seminorm besov(const ScalarField& f, const SeminormParams& prm) {
    check_seminorm_range(prm);
    if (prm.variant == BesovVariant::direct) return besov_direct(f, prm);
    if (is_zero(f)) return Seminorm{0, 0, {{"functional", "besov_" + to_string(prm.variant)}}};
    const HeatFlow flow(f);
    if (prm.variant == BesovVariant::heat_dt) return besov_heat(flow, prm);
    return besov_poisson(flow, prm);
}

// ---------------------------------------------------------------------------------------------
// Square functions

void check_phi_range(const PhiParams& ph) {
    require(ph.alpha > 0 && ph.alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    require(ph.t_per_efold >= 1, ErrorKind::domain, "t_per_efold must be >= 1");
    const double s = ph.s;
    switch (ph.variant) {
        case PhiVariant::grad: require(s > -1, ErrorKind::domain, "phi grad requires s > -1"); break;
        case PhiVariant::dt: require(s > -2 * ph.alpha, ErrorKind::domain, "phi dt requires s > -2α"); break;
        case PhiVariant::lap: require(s > -2, ErrorKind::domain, "phi lap requires s > -2"); break;
        case PhiVariant::grad_dt: require(s > -1 - 2 * ph.alpha, ErrorKind::domain, "phi grad_dt requires s > -1 - 2α"); break;
    }
}

ScalarField sobolev_power(const HeatFlow& flow, double s, OpReport* rep) {
    const ScalarField& f = flow.base();
    const int Q = flow.Q();
    require(s > -Q && s <= 2 && std::isfinite(s), ErrorKind::domain, "sobolev_power supports -Q < s <= 2");
    if (s == 0) return f;
    if (s == 2) return flow.Lf();
    if (is_zero(f)) return ScalarField::zeros(f.grid, "zero");
    if (s > 0) return frac_sublaplacian_balakrishnan(flow, s / 2, rep);
    return frac_integral(flow, -s, rep);
}

PhiStack phi_stack(const ScalarField& f, const PhiParams& ph) {
    check_phi_range(ph);
    PhiStack st;
    const double h = finest_h(f.grid), L = horizontal_half_width(f.grid), a = ph.alpha, s = ph.s;
    st.t = anchored_nodes(0.1 * h, 100 * L, ph.t_per_efold);
    switch (ph.variant) {
        case PhiVariant::grad: st.head_exponent = 1 + s; break;
        case PhiVariant::dt: st.head_exponent = 2 * a + s; break;
        case PhiVariant::lap: st.head_exponent = 2 + s; break;
        case PhiVariant::grad_dt: st.head_exponent = 2 * a + 1 + s; break;
    }
    if (is_zero(f)) {
        st.mag.assign(st.t.size(), ScalarField::zeros(f.grid, "zero"));
        return st;
    }
    ScalarField fs = f;
    if (s != 0) fs = sobolev_power(HeatFlow(f), s);
    const HeatFlow flow(fs);
    for (double t : st.t) {
        ScalarField m;
        double power = 0;
        switch (ph.variant) {
            case PhiVariant::grad:
                m = magnitude(horizontal_gradient(poisson_u(flow, a, t)));
                power = 1 + s;
                break;
            case PhiVariant::dt: {
                m = poisson_ut(flow, a, t);
                for (double& v : m.values) v = std::abs(v);
                power = 1 + s;
                break;
            }
            case PhiVariant::lap: {
                m = sublaplacian(poisson_u(flow, a, t));
                for (double& v : m.values) v = std::abs(v);
                power = 2 + s;
                break;
            }
            case PhiVariant::grad_dt:
                m = magnitude(horizontal_gradient(poisson_ut(flow, a, t)));
                power = 2 + s;
                break;
        }
        m *= std::pow(t, power);
        m.provenance = "|f*phi_t| " + to_string(ph.variant);
        st.mag.push_back(std::move(m));
    }
    return st;
}

ScalarField square_function(const PhiStack& st, SquareMode mode, double beta) {
    require(!st.mag.empty(), ErrorKind::usage, "empty phi stack");
    require(beta > 0, ErrorKind::domain, "cone aperture must be positive");
    const GridSpec& g = st.mag[0].grid;
    const GroupSpec& G = *g.group;
    const std::size_t n = g.size(), nt = st.t.size();
    ScalarField out = ScalarField::zeros(g, mode == SquareMode::g ? "g_phi" : "S_phi");
    std::vector<double> gk(nt);
    if (mode == SquareMode::g) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < nt; ++k) gk[k] = st.mag[k].values[i] * st.mag[k].values[i];
            out.values[i] = std::sqrt(log_scale_integral(st.t, gk, 2 * st.head_exponent));
        }
        return out;
    }
    // S: ∫ t^{-Q} ∫_{B(x, βt)} |F_t|² dt/t, the ball by polar quadrature, or the whole box once βt
    // exceeds twice the corner radius.
    const double Rb = 2 * corner_radius(g);
    const BallRule rule = make_ball_rule(G, 8, 6);
    std::vector<ScalarField> sq;
    std::vector<double> whole(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        sq.push_back(multiply(st.mag[k], st.mag[k]));
        whole[k] = sq.back().integral();
    }
    double x[8];
    for (std::size_t i = 0; i < n; ++i) {
        g.point(i, x);
        for (std::size_t k = 0; k < nt; ++k) {
            const double rho = beta * st.t[k];
            double I = 0;
            if (rho >= Rb) {
                I = whole[k];
            } else {
                const ScalarField& F = sq[k];
                ball_sweep(G, rule, x, rho, [&](const double* p, double w) { I += w * interpolate(F, p); });
            }
            gk[k] = std::max(0.0, I) * std::pow(st.t[k], -G.Q);
        }
        out.values[i] = std::sqrt(log_scale_integral(st.t, gk, 2 * st.head_exponent));
    }
    return out;
}

ScalarField square_function(const ScalarField& f, const PhiParams& ph, SquareMode mode, double beta) {
    return square_function(phi_stack(f, ph), mode, beta);
}

void check_square_sobolev_range(int Q, double s, double p, double alpha, SobolevVariant v) {
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    require(p >= 1, ErrorKind::domain, "square-function bound needs p >= 1");
    require(s > -Q, ErrorKind::domain, "square-function bound requires s > -Q");
    switch (v) {
        case SobolevVariant::grad: require(s < 1, ErrorKind::domain, "gradient square function requires -Q < s < 1"); break;
        case SobolevVariant::dt: require(s < 2 * alpha, ErrorKind::domain, "dt square function requires s < 2α"); break;
        case SobolevVariant::hess: require(s < 2, ErrorKind::domain, "second-gradient square function requires -Q < s < 2"); break;
    }
}

SquareSobolev square_norm_vs_sobolev(const ScalarField& f, double s, double p, double alpha, SobolevVariant v,
                                     int t_per_efold) {
    check_square_sobolev_range(f.grid.group->Q, s, p, alpha, v);
    SquareSobolev out;
    if (is_zero(f)) {
        out.skipped = true;
        return out;
    }
    const HeatFlow flow(f);
    OpReport rep;
    const ScalarField rhs = sobolev_power(flow, s, &rep);
    out.rhs = lp_norm(rhs, p);
    const double h = finest_h(f.grid), L = horizontal_half_width(f.grid);
    const auto t = anchored_nodes(0.1 * h, 100 * L, t_per_efold);
    std::vector<ScalarField> mag;
    double k_order = 1, head = 0;
    for (double tk : t) {
        ScalarField m;
        switch (v) {
            case SobolevVariant::grad:
                m = magnitude(horizontal_gradient(poisson_u(flow, alpha, tk)));
                break;
            case SobolevVariant::dt:
                m = poisson_ut(flow, alpha, tk);
                for (double& x : m.values) x = std::abs(x);
                break;
            case SobolevVariant::hess: {
                std::vector<ScalarField> comps;
                for (const auto& gi : horizontal_gradient(poisson_u(flow, alpha, tk)))
                    for (auto& gij : horizontal_gradient(gi)) comps.push_back(std::move(gij));
                m = magnitude(comps);
                break;
            }
        }
        mag.push_back(std::move(m));
    }
    switch (v) {
        case SobolevVariant::grad: k_order = 1; head = 1 - s; break;
        case SobolevVariant::dt: k_order = 1; head = 2 * alpha - s; break;
        case SobolevVariant::hess: k_order = 2; head = 2 - s; break;
    }
    for (std::size_t k = 0; k < t.size(); ++k) mag[k] *= std::pow(t[k], k_order - s);
    ScalarField sq = ScalarField::zeros(f.grid, "square");
    std::vector<double> gk(t.size());
    double worst_share = 0;
    for (std::size_t i = 0; i < sq.values.size(); ++i) {
        for (std::size_t k = 0; k < t.size(); ++k) gk[k] = mag[k].values[i] * mag[k].values[i];
        double share = 0;
        sq.values[i] = std::sqrt(log_scale_integral(t, gk, 2 * head, &share));
        if (sq.values[i] > 1e-3 * sq.values[0] + 1e-300) worst_share = std::max(worst_share, share);
    }
    out.lhs = lp_norm(sq, p);
    out.ratio = out.rhs > 0 ? out.lhs / out.rhs : 0;
    const double rel = rep.error_budget / std::max(lp_norm(rhs, 2), 1e-300) + 0.05 * worst_share + flow.tail_mismatch() * 0.1;
    out.error_budget = out.ratio * rel;
    return out;
}

// ---------------------------------------------------------------------------------------------
// BMO and Carleson

double unit_ball_volume(const GroupSpec& g) {
    const auto rule = sphere_rule(g, 16);
    return pairwise_sum(rule.weights) / g.Q;
}

Seminorm bmo_norm(const ScalarField& f, const BallFamily& fam) {
    const GridSpec& g = f.grid;
    const GroupSpec& G = *g.group;
    const BallRule rule = make_ball_rule(G, fam.radial_nodes, fam.sphere_res);
    Seminorm out;
    double best = 0, best_r = 0;
    std::vector<double> best_c;
    std::vector<double> vals, ws;
    for (const auto& c : ball_centers(g, fam.centers_per_axis)) {
        for (double r : fam.radii) {
            vals.clear();
            ws.clear();
            ball_sweep(G, rule, c.data(), r, [&](const double* p, double w) {
                vals.push_back(interpolate(f, p));
                ws.push_back(w);
            });
            double vol = 0, mean = 0;
            for (std::size_t i = 0; i < vals.size(); ++i) {
                vol += ws[i];
                mean += ws[i] * vals[i];
            }
            mean /= vol;
            double osc = 0;
            for (std::size_t i = 0; i < vals.size(); ++i) osc += ws[i] * std::abs(vals[i] - mean);
            osc /= vol;
            if (osc > best) {
                best = osc;
                best_r = r;
                best_c = c;
            }
        }
    }
    out.value = best;
    out.error_estimate = 1e-3 * best;
    out.detail = {{"functional", "bmo"}, {"argmax_radius", best_r}, {"argmax_center", best_c}};
    return out;
}

Seminorm carleson_functional(const PhiStack& st, const BallFamily& fam) {
    require(!st.mag.empty(), ErrorKind::usage, "empty phi stack");
    const GridSpec& g = st.mag[0].grid;
    const GroupSpec& G = *g.group;
    const BallRule rule = make_ball_rule(G, fam.radial_nodes, fam.sphere_res);
    const double B1 = unit_ball_volume(G);
    std::vector<ScalarField> sq;
    for (const auto& m : st.mag) sq.push_back(multiply(m, m));
    double best = 0, best_r = 0;
    std::vector<double> best_c;
    std::vector<double> tt, gg;
    for (const auto& c : ball_centers(g, fam.centers_per_axis)) {
        for (double r : fam.radii) {
            tt.clear();
            gg.clear();
            for (std::size_t k = 0; k < st.t.size() && st.t[k] < r; ++k) {
                double I = 0;
                ball_sweep(G, rule, c.data(), r - st.t[k], [&](const double* p, double w) { I += w * interpolate(sq[k], p); });
                tt.push_back(st.t[k]);
                gg.push_back(std::max(0.0, I));
            }
            double total = 0;
            if (!tt.empty()) {
                total = gg.front() / (2 * st.head_exponent);
                for (std::size_t i = 0; i + 1 < tt.size(); ++i) total += 0.5 * (gg[i] + gg[i + 1]) * std::log(tt[i + 1] / tt[i]);
                total += 0.5 * gg.back() * std::log(r / tt.back());
            }
            const double val = std::sqrt(total / (B1 * std::pow(r, G.Q)));
            if (val > best) {
                best = val;
                best_r = r;
                best_c = c;
            }
        }
    }
    Seminorm out;
    out.value = best;
    out.error_estimate = 0.02 * best;
    out.detail = {{"functional", "carleson"}, {"argmax_radius", best_r}, {"argmax_center", best_c}};
    return out;
}

Seminorm carleson_functional(const ScalarField& f, const PhiParams& ph, const BallFamily& fam) {
    return carleson_functional(phi_stack(f, ph), fam);
}

// ---------------------------------------------------------------------------------------------
// Maximal functions

std::vector<std::pair<double, ScalarField>> maximal_slices(const ScalarField& f, const MaxProfile& prof) {
    const GridSpec& g = f.grid;
    const GroupSpec& G = *g.group;
    std::vector<std::pair<double, ScalarField>> out;
    const double h = finest_h(g), L = horizontal_half_width(g);
    if (prof.kind == "heat") {
        const HeatFlow flow(f);
        for (std::size_t k = 0; k < flow.nodes().size(); ++k) out.emplace_back(std::sqrt(flow.nodes()[k].s), flow.slice(k));
    } else if (prof.kind == "poisson") {
        require(prof.alpha > 0 && prof.alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
        const HeatFlow flow(f);
        for (double t : anchored_nodes(0.25 * h, 100 * L, prof.t_per_efold)) out.emplace_back(t, poisson_u(flow, prof.alpha, t));
    } else if (prof.kind == "power") {
        require(prof.lambda > G.Q, ErrorKind::domain, "maximal profile decay exponent must exceed Q");
        // Z = |S| ∫ r^{Q−1}(1+r)^{−λ} dr = |S| B(Q, λ−Q).
        const double S = pairwise_sum(sphere_rule(G, 16).weights);
        const double Z = S * std::tgamma(G.Q) * std::tgamma(prof.lambda - G.Q) / std::tgamma(prof.lambda);
        double x[8], y[8];
        for (double t : anchored_nodes(0.25 * h, 100 * L, prof.t_per_efold)) {
            ScalarField k = ScalarField::zeros(g, "phi_t");
            for (std::size_t i = 0; i < g.size(); ++i) {
                g.point(i, x);
                dilate_raw(G, 1 / t, x, y);
                k.values[i] = std::pow(1 + norm_raw(G, y), -prof.lambda) / (Z * std::pow(t, G.Q));
            }
            if (t < 2 * h) k *= 1 / (k.integral());  // under-resolved: keep unit mass
            ScalarField c = group_convolve(f, k);
            c.provenance = "f*phi_t";
            out.emplace_back(t, std::move(c));
        }
    } else {
        fail(ErrorKind::usage, "unknown maximal profile '" + prof.kind + "'");
    }
    return out;
}

ScalarField maximal(const ScalarField& f, const MaxProfile& prof, MaxMode mode) {
    const auto slices = maximal_slices(f, prof);
    const GridSpec& g = f.grid;
    const GroupSpec& G = *g.group;
    ScalarField out = ScalarField::zeros(g, mode == MaxMode::M0 ? "M0" : "M");
    if (mode == MaxMode::M0) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            double m = -INFINITY;
            for (const auto& [t, s] : slices) m = std::max(m, s.values[i]);
            out.values[i] = m;
        }
        return out;
    }
    // Cone sup sampled on the axis plus radii {¼, ½, ¾, 0.999}·t along the sphere rule.
    const auto rule = sphere_rule(G, 4);
    const double Rb = 2 * corner_radius(g);
    double x[8], y[8], p[8];
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.point(i, x);
        double m = 0;
        for (const auto& [t, s] : slices) {
            m = std::max(m, std::abs(s.values[i]));
            if (t >= Rb) {
                m = std::max(m, s.max_abs());
                continue;
            }
            for (double u : {0.25, 0.5, 0.75, 0.999})
                for (const auto& w : rule.points) {
                    dilate_raw(G, u * t, w.data(), y);
                    product_raw(G, x, y, p);
                    m = std::max(m, std::abs(interpolate(s, p)));
                }
        }
        out.values[i] = m;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Calderón scalars

namespace {

// ∫ τ^{−α} e^{−τs−s/4τ} (1, −τ − 1/4τ) du over u = ln τ, trapezoid with step 0.02.
std::pair<double, double> calderon_integrals(double alpha, double s) {
    require(s > 0, ErrorKind::domain, "Calderón scalars need s > 0");
    const double lo = std::log(s / 300) - 2, hi = std::log(300 / s) + 2, du = 0.02;
    const int n = static_cast<int>(std::ceil((hi - lo) / du));
    const double step = (hi - lo) / n;
    double i0 = 0, i1 = 0;
    for (int k = 0; k <= n; ++k) {
        const double u = lo + k * step, tau = std::exp(u);
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        const double e = std::exp(-alpha * u - tau * s - s / (4 * tau));
        i0 += w * e;
        i1 += w * e * (-tau - 1 / (4 * tau));
    }
    return {i0 * step, i1 * step};
}

double calderon_pre(double alpha, double c) {
    const double theta = std::pow(2 * alpha, -2 * alpha);
    return std::pow(2.0, -(alpha + 1)) * c * std::sqrt(theta);
}

}  // namespace

double calderon_H(double alpha, double s, double c_alpha) {
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    return calderon_pre(alpha, c_alpha) * std::pow(s, alpha) * calderon_integrals(alpha, s).first;
}

double calderon_Htilde(double alpha, double s, double c_alpha) {
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    const auto [i0, i1] = calderon_integrals(alpha, s);
    return calderon_pre(alpha, c_alpha) * std::pow(s, alpha) * (alpha * i0 + s * i1);
}

namespace {
constexpr int kCalderonPerEfold = 200;
}

CalderonScalars calderon_scalars(double alpha, double a, double b, double c_alpha) {
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    require(a > 0 && b >= a && std::isfinite(b), ErrorKind::domain, "the η window needs 0 < a <= b");
    require(c_alpha != 0, ErrorKind::domain, "c_alpha must be nonzero");
    CalderonScalars cs;
    cs.alpha = alpha;
    cs.a = a;
    cs.b = b;
    cs.c_alpha = c_alpha;
    const double l0 = std::log(a / 2), l1 = std::log(2 * b);
    const int n = std::max(8, static_cast<int>(std::ceil((l1 - l0) * kCalderonPerEfold)));
    // Two extra nodes on each side keep the 4-point stencil centred at the window edges.
    for (int k = -2; k <= n + 2; ++k) {
        const double s = std::exp(l0 + (l1 - l0) * k / n);
        cs.s.push_back(s);
        cs.H.push_back(calderon_H(alpha, s, c_alpha));
        cs.Ht.push_back(calderon_Htilde(alpha, s, c_alpha));
    }
    double min_ht = INFINITY;
    for (std::size_t k = 2; k + 2 < cs.s.size(); ++k) min_ht = std::min(min_ht, std::abs(cs.Ht[k]));
    if (!(min_ht > 1e-200 * std::abs(c_alpha)))
        fail(ErrorKind::construction, "H-tilde vanishes on the η window; choose a smaller [a, b]");
    const auto q = composite_gauss(a / 2, 2 * b, 256, 8);
    double I = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) I += q.w[i] * eta_fn(q.x[i], a, b);
    cs.eta_integral = I;
    for (std::size_t k = 0; k < cs.s.size(); ++k) cs.G.push_back(cs.G_at(cs.s[k]));
    return cs;
}

double CalderonScalars::H_at(double x) const {
    const double l0 = std::log(s.front()), dl = std::log(s[1] / s[0]), l = std::log(x);
    if (l < l0 || l > std::log(s.back())) return calderon_H(alpha, x, c_alpha);
    return lagrange_uniform(H, l0, dl, l);
}

double CalderonScalars::Ht_at(double x) const {
    const double l0 = std::log(s.front()), dl = std::log(s[1] / s[0]), l = std::log(x);
    if (l < l0 || l > std::log(s.back())) return calderon_Htilde(alpha, x, c_alpha);
    return lagrange_uniform(Ht, l0, dl, l);
}

double CalderonScalars::G_at(double x) const {
    const double e = eta_fn(x, a, b);
    if (e == 0) return 0;
    return e * x / (Ht_at(x) * eta_integral);
}

double reproducing_check(const CalderonScalars& cs) {
    const auto q = composite_gauss(cs.a / 2, 2 * cs.b, 400, 6);
    double acc = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
        const double s = q.x[i];
        const double G = cs.G_at(s);
        if (G != 0) acc += q.w[i] * calderon_Htilde(cs.alpha, s, cs.c_alpha) * G / s;
    }
    return acc;
}

ScalarField euclidean_reproducing_apply(const ScalarField& f, const CalderonScalars& cs, double eps, double A) {
    require(f.grid.group->is_euclidean(), ErrorKind::capability,
            "the reproducing formula is synthesised by a Fourier multiplier on Euclidean groups only");
    require(eps > 0 && A > eps, ErrorKind::domain, "the t-window needs 0 < eps < A");
    const double a = cs.alpha;
    // t∂_t of the Poisson multiplier m(z) = 2^{1−α}/Γ(α)·z^α K_α(z) at z = t|ξ|.
    const double mc = std::pow(2.0, 1 - a) / std::tgamma(a);
    auto D = [&](double z) { return -mc * std::pow(z, a + 1) * std::cyl_bessel_k(1 - a, z); };
    // That multiplier equals H̃ at c_α = mc/θ^{1/2}; ψ is rescaled from the tabulated convention.
    const double theta = std::pow(2 * a, -2 * a);
    const double scale = cs.c_alpha * std::sqrt(theta) / mc;
    // F(x) = ∫_{a/2}^{x} ψ̂(z) t∂_t m(z) dz/z on a log grid.
    const double l0 = std::log(cs.a / 2), l1 = std::log(2 * cs.b);
    const int n = std::max(8, static_cast<int>(std::ceil((l1 - l0) * kCalderonPerEfold)));
    const double dl = (l1 - l0) / n;
    std::vector<double> F(n + 1, 0.0);
    const auto& gl = gauss_legendre(6);
    for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int j = 0; j < 6; ++j) {
            const double z = std::exp(l0 + dl * (k + 0.5 + 0.5 * gl.x[j]));
            acc += 0.5 * dl * gl.w[j] * scale * cs.G_at(z) * D(z);
        }
        F[k + 1] = F[k] + acc;
    }
    auto Fx = [&](double x) {
        if (x <= cs.a / 2) return 0.0;
        if (x >= 2 * cs.b) return F.back();
        return lagrange_uniform(F, l0, dl, std::log(x));
    };
    ScalarField out = euclidean_multiplier(f, [&](double xi2) {
        const double r = std::sqrt(xi2);
        if (r == 0) return 0.0;
        return Fx(A * r) - Fx(eps * r);
    });
    out.provenance = "calderon_reproduction(" + f.provenance + ")";
    return out;
}

// ---------------------------------------------------------------------------------------------
// Schur kernels

SchurConstants schur_constants(const GroupSpec& g, int which, double s, double alpha, int sphere_res) {
    require(which == 1 || which == 2, ErrorKind::usage, "Schur kernel index must be 1 or 2");
    require(s > 0 && s < 1 && alpha > 0 && alpha < 1, ErrorKind::domain, "Schur kernels need s, alpha in (0,1)");
    const int Q = g.Q;
    auto K = [&](double t, double r) {
        const double r2a = std::pow(r, 2 * alpha);
        if (which == 1) return r2a >= t ? std::pow(t, 1 - s / 2) * std::pow(r, alpha * s - 2 * alpha) : 0.0;
        return r2a <= t ? std::pow(t, -(Q + alpha * s) / (2 * alpha)) * std::pow(r, Q + alpha * s) : 0.0;
    };
    const double S = pairwise_sum(sphere_rule(g, std::max(2, sphere_res)).weights);
    SchurConstants c;
    // The support boundary t = |y|^{2α} is a panel edge in every integral below.
    const auto& gl = gauss_legendre(8);
    auto log_int = [&](double lo, double hi, int panels, const std::function<double(double)>& fn) {
        double acc = 0;
        const double a = std::log(lo), b = std::log(hi), w = (b - a) / panels;
        for (int p = 0; p < panels; ++p)
            for (int j = 0; j < 8; ++j) acc += 0.5 * w * gl.w[j] * fn(std::exp(a + w * (p + 0.5 + 0.5 * gl.x[j])));
        return acc;
    };
    const double span = 60;  // e-folds past the edge; the integrands decay at least like e^{−κ·span}
    for (double r : {0.3, 1.0, 3.0}) {
        const double edge = std::pow(r, 2 * alpha);
        for (double f : {0.5, 0.999, 1.0, 1.001, 2.0}) c.sup = std::max(c.sup, K(edge * f, r));
        const double ti = which == 1 ? log_int(edge * std::exp(-span), edge, 400, [&](double t) { return K(t, r); })
                                     : log_int(edge, edge * std::exp(span), 400, [&](double t) { return K(t, r); });
        c.t_integral = std::max(c.t_integral, ti);
    }
    for (double t : {0.3, 1.0, 3.0}) {
        const double edge = std::pow(t, 1 / (2 * alpha));
        const double yi = which == 1 ? log_int(edge, edge * std::exp(span), 400, [&](double r) { return K(t, r); })
                                     : log_int(edge * std::exp(-span), edge, 400, [&](double r) { return K(t, r); });
        c.y_integral = std::max(c.y_integral, S * yi);
    }
    return c;
}

// ---------------------------------------------------------------------------------------------
// Extension integrals

Seminorm extension_product_integral(const std::vector<ExtTerm>& terms, double alpha, double power, int t_per_efold) {
    require(!terms.empty(), ErrorKind::usage, "extension integral needs at least one factor");
    require(alpha > 0 && alpha < 1, ErrorKind::domain, "alpha must lie in (0,1)");
    const GridSpec& g = terms[0].flow->base().grid;
    for (const auto& tm : terms) require(tm.flow->base().grid == g, ErrorKind::usage, "extension factors live on different grids");
    Seminorm out;
    for (const auto& tm : terms)
        if (is_zero(tm.flow->base())) return out;
    const double h = finest_h(g), L = horizontal_half_width(g);
    const auto t = anchored_nodes(0.1 * h, 100 * L, t_per_efold);
    double head = power;
    for (const auto& tm : terms)
        if (tm.factor != ExtFactor::value && tm.factor != ExtFactor::grad) head += std::min(0.0, 2 * alpha - 1);
    std::vector<double> I(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        ScalarField prod;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const HeatFlow& fl = *terms[i].flow;
            ScalarField m;
            switch (terms[i].factor) {
                case ExtFactor::value:
                    m = poisson_u(fl, alpha, t[k]);
                    for (double& x : m.values) x = std::abs(x);
                    break;
                case ExtFactor::grad: m = magnitude(horizontal_gradient(poisson_u(fl, alpha, t[k]))); break;
                case ExtFactor::dt:
                    m = poisson_ut(fl, alpha, t[k]);
                    for (double& x : m.values) x = std::abs(x);
                    break;
                case ExtFactor::tilde_grad: {
                    auto comps = horizontal_gradient(poisson_u(fl, alpha, t[k]));
                    comps.push_back(poisson_ut(fl, alpha, t[k]));
                    m = magnitude(comps);
                    break;
                }
                case ExtFactor::grad_tilde_grad: {
                    std::vector<ScalarField> comps;
                    for (const auto& gi : horizontal_gradient(poisson_u(fl, alpha, t[k])))
                        for (auto& gij : horizontal_gradient(gi)) comps.push_back(std::move(gij));
                    for (auto& gt : horizontal_gradient(poisson_ut(fl, alpha, t[k]))) comps.push_back(std::move(gt));
                    m = magnitude(comps);
                    break;
                }
            }
            prod = i == 0 ? std::move(m) : multiply(prod, m);
        }
        I[k] = std::pow(t[k], power) * prod.integral();
    }
    double share = 0;
    out.value = log_scale_integral(t, I, head, &share);
    double mismatch = 0;
    for (const auto& tm : terms) mismatch = std::max(mismatch, tm.flow->tail_mismatch());
    out.error_estimate = out.value * (0.1 * share + 0.1 * mismatch);
    out.detail = {{"t_nodes", t.size()}, {"head_exponent", head}, {"extrapolated_share", share}};
    return out;
}

}  // namespace chg
