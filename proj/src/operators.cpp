#include "chg/operators.hpp"

#include "chg/fft.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "chg/error.hpp"
#include "chg/kernels.hpp"
#include "chg/numerics.hpp"
#include "chg/subordinator.hpp"

namespace chg {

namespace {

void check_alpha(double alpha) {
    require(alpha > 0 && alpha < 1 && std::isfinite(alpha), ErrorKind::domain, "alpha must lie in (0,1)");
}

double l2(const std::vector<double>& v, double cell) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s * cell);
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// StableProfile

std::shared_ptr<const StableProfile> StableProfile::get(double alpha) {
    check_alpha(alpha);
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const StableProfile>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[alpha];
    if (!slot) slot.reset(new StableProfile(alpha));
    return slot;
}

StableProfile::StableProfile(double alpha) : alpha_(alpha) {
    StableDensityParams p;
    p.alpha = alpha;
    p.t = 1;
    const int per_efold = 40;
    dl_ = 1.0 / per_efold;
    // Walk left from σ = 1 until the density underflows to irrelevance.
    double l = 0;
    while (l > std::log(1e-40)) {
        const double v = stable_density(p, std::exp(l));
        if (!(v > 1e-250)) break;
        l -= 1;
    }
    l0_ = l;
    const double l1 = std::log(1e12);
    const int n = static_cast<int>(std::ceil((l1 - l0_) / dl_)) + 1;
    logf_.resize(n);
    g_.resize(n);
    for (int i = 0; i < n; ++i) {
        const double s = std::exp(l0_ + i * dl_);
        const double f = stable_density(p, s);
        logf_[i] = f > 0 ? std::log(f) : -700.0;
        // f + σ f' = −α ∂_t f_{t,α}(σ) at t = 1, stored as a ratio to f.
        g_[i] = f > 0 ? -alpha * stable_density_dt(p, s) / f : 0.0;
    }
    const double sl = std::exp(l0_ + (n - 1) * dl_);
    tail_c_ = std::exp(logf_.back()) * std::pow(sl, 1 + alpha);
}

double StableProfile::interp(const std::vector<double>& v, double l) const {
    const double x = (l - l0_) / dl_;
    const int n = static_cast<int>(v.size());
    int i = static_cast<int>(std::floor(x)) - 1;
    i = std::clamp(i, 0, n - 4);
    const double u = x - i - 1;
    const double w0 = -u * (u - 1) * (u - 2) / 6, w1 = (u + 1) * (u - 1) * (u - 2) / 2;
    const double w2 = -(u + 1) * u * (u - 2) / 2, w3 = (u + 1) * u * (u - 1) / 6;
    return w0 * v[i] + w1 * v[i + 1] + w2 * v[i + 2] + w3 * v[i + 3];
}

double StableProfile::density(double t, double s) const {
    if (s <= 0) return 0;
    const double sc = std::pow(t, -1 / alpha_), sig = s * sc;
    const double l = std::log(sig);
    if (l < l0_) return 0;
    const double lmax = l0_ + (logf_.size() - 1) * dl_;
    if (l > lmax) return sc * tail_c_ * std::pow(sig, -1 - alpha_);
    return sc * std::exp(interp(logf_, l));
}

double StableProfile::density_dt(double t, double s) const {
    if (s <= 0) return 0;
    const double sig = s * std::pow(t, -1 / alpha_), l = std::log(sig);
    if (l < l0_) return 0;
    const double lmax = l0_ + (logf_.size() - 1) * dl_;
    const double ratio = l > lmax ? -alpha_ : interp(g_, l);
    return -(1 / alpha_) / t * density(t, s) * ratio;
}

// ---------------------------------------------------------------------------------------------
// Extensions

std::vector<double> default_t_nodes() { return log_space(1e-2, 1e2, 64); }

namespace {

void check_nodes(const std::vector<double>& t) {
    require(!t.empty(), ErrorKind::domain, "extension needs t nodes");
    for (std::size_t k = 0; k < t.size(); ++k) {
        require(t[k] > 0 && std::isfinite(t[k]), ErrorKind::domain, "t nodes must be positive");
        if (k) require(t[k] > t[k - 1], ErrorKind::domain, "t nodes must be strictly increasing");
    }
}

}  // namespace

ExtensionStack poisson_extension(const HeatFlow& flow, double alpha, std::vector<double> t_nodes) {
    check_alpha(alpha);
    check_nodes(t_nodes);
    ExtensionStack st;
    st.kind = ExtensionKind::poisson;
    st.alpha = alpha;
    st.base = flow.base();
    st.t_nodes = std::move(t_nodes);
    const double C = poisson_constant(alpha), a = alpha;
    for (double t : st.t_nodes) {
        const std::string tag = "(t=" + std::to_string(t) + ")";
        auto core = [=](double s) { return C * std::pow(s, -1 - a) * std::exp(-t * t / (4 * s)); };
        st.u.push_back(flow.integrate([&](double s) { return std::pow(t, 2 * a) * core(s); }, "P_alpha" + tag));
        st.u_t.push_back(flow.integrate(
            [&](double s) { return (2 * a * std::pow(t, 2 * a - 1) - std::pow(t, 2 * a + 1) / (2 * s)) * core(s); },
            "dt P_alpha" + tag));
        st.u_tt.push_back(flow.integrate(
            [&](double s) {
                return (2 * a * (2 * a - 1) * std::pow(t, 2 * a - 2) - (4 * a + 1) * std::pow(t, 2 * a) / (2 * s) +
                        std::pow(t, 2 * a + 2) / (4 * s * s)) *
                       core(s);
            },
            "dtt P_alpha" + tag));
    }
    st.report.detail = {{"tail_mismatch", flow.tail_mismatch()}, {"s_flow", flow.s_flow()}};
    return st;
}

ExtensionStack poisson_extension(const ScalarField& f, double alpha, std::vector<double> t_nodes) {
    check_alpha(alpha);
    return poisson_extension(HeatFlow(f), alpha, std::move(t_nodes));
}

ExtensionStack heat_extension(const HeatFlow& flow, double alpha, std::vector<double> t_nodes) {
    check_alpha(alpha);
    check_nodes(t_nodes);
    ExtensionStack st;
    st.kind = ExtensionKind::heat;
    st.alpha = alpha;
    st.base = flow.base();
    st.t_nodes = std::move(t_nodes);
    auto prof = StableProfile::get(alpha);
    for (double t : st.t_nodes) {
        const std::string tag = "(t=" + std::to_string(t) + ")";
        st.u.push_back(flow.integrate([&](double s) { return prof->density(t, s); }, "h_alpha" + tag));
        st.u_t.push_back(flow.integrate([&](double s) { return prof->density_dt(t, s); }, "dt h_alpha" + tag));
    }
    st.report.detail = {{"tail_mismatch", flow.tail_mismatch()}, {"s_flow", flow.s_flow()}};
    return st;
}

ExtensionStack heat_extension(const ScalarField& f, double alpha, std::vector<double> t_nodes) {
    check_alpha(alpha);
    return heat_extension(HeatFlow(f), alpha, std::move(t_nodes));
}

std::vector<ScalarField> ExtensionStack::gradient(std::size_t k) const {
    require(k < u.size(), ErrorKind::usage, "extension node out of range");
    return horizontal_gradient(u[k]);
}

ScalarField ExtensionStack::sublaplacian(std::size_t k) const {
    require(k < u.size(), ErrorKind::usage, "extension node out of range");
    return chg::sublaplacian(u[k]);
}

std::vector<ScalarField> ExtensionStack::tilde_gradient(std::size_t k) const {
    require(k > 0 && k + 1 < u.size(), ErrorKind::usage, "t-differences need an interior node");
    auto g = gradient(k);
    const double dl = std::log(t_nodes[k + 1] / t_nodes[k - 1]);
    ScalarField dt = u[k + 1] - u[k - 1];
    dt *= 1 / (dl * t_nodes[k]);
    g.push_back(dt);
    return g;
}

double ExtensionStack::pde_residual(std::size_t k, int ring) const {
    require(kind == ExtensionKind::poisson, ErrorKind::capability, "the extension equation belongs to the Poisson extension");
    require(k < u.size(), ErrorKind::usage, "extension node out of range");
    const double t = t_nodes[k];
    ScalarField lap = sublaplacian(k);
    ScalarField res = u_tt[k] + ((1 - 2 * alpha) / t) * u_t[k];
    res += lap;
    const double den = lp_norm_interior(lap, 2, ring);
    return den > 0 ? lp_norm_interior(res, 2, ring) / den : 0.0;
}

void ExtensionStack::export_dir(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir + ": " + ec.message());
    nlohmann::json m;
    m["alpha"] = alpha;
    m["kind"] = kind == ExtensionKind::poisson ? "poisson" : "heat";
    m["t_nodes"] = t_nodes;
    m["provenance"] = base.provenance;
    m["grid"] = base.grid.to_json();
    std::vector<std::string> files;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const std::string name = "u_" + std::to_string(k) + ".cgf";
        save_field(u[k], dir + "/" + name);
        files.push_back(name);
    }
    m["slices"] = files;
    std::ofstream o(dir + "/manifest.json");
    if (!o) fail(ErrorKind::io, "cannot write " + dir + "/manifest.json");
    o << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Polar quadrature

KernelMoments pv_kernel_moments(const GroupPtr& g, double alpha, int sphere_res) {
    check_alpha(alpha);
    const auto rule = sphere_rule(*g, sphere_res);
    auto k = KernelHandle::make(KernelKind::tilde_riesz, g->name, -2 * alpha);
    const int m = g->horizontal_dim();
    KernelMoments mo;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
        const double K = tilde_riesz_eval(k, GroupElement(g, rule.points[i])) / alpha;
        double h2 = 0;
        for (int j = 0; j < m; ++j) h2 += rule.points[i][j] * rule.points[i][j];
        mo.A += rule.weights[i] * K;
        mo.mu += rule.weights[i] * K * h2 / m;
    }
    return mo;
}

namespace {

struct PolarPlan {
    std::vector<std::vector<double>> dirs;  // unit-sphere points
    std::vector<double> dir_w;              // w_k K(ω_k)
    std::vector<double> r, rw;              // radial nodes; weights for ∫ r^{-1-2α} φ dr
    std::size_t first_shell = 0;            // nodes [0, first_shell) cover [ε, 2ε]
    double eps = 0, R = 0;
    KernelMoments mom;
};

double box_norm_radius(const GridSpec& g) {
    // Largest homogeneous norm over the box corners.
    const int d = g.dim();
    double best = 0;
    std::vector<double> x(d);
    for (int mask = 0; mask < (1 << d); ++mask) {
        for (int j = 0; j < d; ++j) x[j] = (mask >> j & 1) ? g.extents[j] : -g.extents[j];
        best = std::max(best, norm_raw(*g.group, x.data()));
    }
    return best;
}

PolarPlan make_plan(const GridSpec& g, double alpha, const PolarOptions& opt) {
    require(opt.eps_cells > 0 && opt.panels_per_efold >= 1 && opt.gauss >= 2 && opt.sphere_res >= 1, ErrorKind::domain,
            "invalid polar quadrature options");
    PolarPlan p;
    double h = INFINITY;
    for (int j = 0; j < g.group->horizontal_dim(); ++j) h = std::min(h, g.spacing(j));
    p.eps = opt.eps_cells * h;
    // Past 2B every translate xy of a box point leaves the box (|xy| >= |y| - |x|).
    p.R = opt.r_max > 0 ? opt.r_max : 2 * box_norm_radius(g);
    require(p.R > 2 * p.eps, ErrorKind::domain, "polar quadrature needs r_max > 2 eps");
    const auto rule = sphere_rule(*g.group, opt.sphere_res);
    auto k = KernelHandle::make(KernelKind::tilde_riesz, g.group->name, -2 * alpha);
    const int m = g.group->horizontal_dim();
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
        const double K = tilde_riesz_eval(k, GroupElement(g.group, rule.points[i])) / alpha;
        p.dirs.push_back(rule.points[i]);
        p.dir_w.push_back(rule.weights[i] * K);
        double h2 = 0;
        for (int j = 0; j < m; ++j) h2 += rule.points[i][j] * rule.points[i][j];
        p.mom.A += rule.weights[i] * K;
        p.mom.mu += rule.weights[i] * K * h2 / m;
    }
    // Panels in log r: [ε, 2ε] first, then a fixed lattice j/panels_per_efold up to R.
    std::vector<double> edges{std::log(p.eps), std::log(2 * p.eps)};
    const double step = 1.0 / opt.panels_per_efold;
    double e = std::ceil(edges.back() / step) * step;
    if (e - edges.back() < 0.25 * step) e += step;
    for (; e < std::log(p.R); e += step) edges.push_back(e);
    if (std::log(p.R) - edges.back() < 0.25 * step) edges.back() = std::log(p.R);
    else edges.push_back(std::log(p.R));
    const auto& q = gauss_legendre(opt.gauss);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i], b = edges[i + 1];
        for (int j = 0; j < opt.gauss; ++j) {
            const double lr = 0.5 * (a + b) + 0.5 * (b - a) * q.x[j];
            const double r = std::exp(lr);
            p.r.push_back(r);
            p.rw.push_back(0.5 * (b - a) * q.w[j] * std::pow(r, -2 * alpha));
        }
        if (i == 0) p.first_shell = p.r.size();
    }
    return p;
}

GridSpec strided_grid(const GridSpec& g, int stride) {
    require(stride >= 1, ErrorKind::domain, "stride must be >= 1");
    std::vector<int> shape(g.dim());
    for (int j = 0; j < g.dim(); ++j) {
        require((g.shape[j] - 1) % stride == 0, ErrorKind::domain, "stride must divide N-1 on every axis");
        shape[j] = (g.shape[j] - 1) / stride + 1;
    }
    return GridSpec::make(g.group, g.extents, shape);
}

std::size_t parent_index(const GridSpec& g, const GridSpec& sub, std::size_t i, int stride) {
    std::size_t r = i, idx = 0;
    for (int j = sub.dim() - 1; j >= 0; --j) {
        idx += (r % sub.shape[j]) * stride * g.stride(j);
        r /= sub.shape[j];
    }
    return idx;
}

// Calls fn(x, yp, ym, weight, in_first_shell) for every output point and quadrature node,
// where yp = x·y and ym = x·y⁻¹.
template <class Acc>
void polar_sweep(const GridSpec& g, const GridSpec& sub, int stride, const PolarPlan& p, Acc&& acc) {
    const GroupSpec& G = *g.group;
    const int d = g.dim();
    double x[8], y[8], yi[8], xp[8], xm[8];
    for (std::size_t i = 0; i < sub.size(); ++i) {
        sub.point(i, x);
        const std::size_t pi = parent_index(g, sub, i, stride);
        for (std::size_t a = 0; a < p.r.size(); ++a) {
            const bool first = a < p.first_shell;
            for (std::size_t k = 0; k < p.dirs.size(); ++k) {
                dilate_raw(G, p.r[a], p.dirs[k].data(), y);
                for (int j = 0; j < d; ++j) yi[j] = -y[j];
                product_raw(G, x, y, xp);
                product_raw(G, x, yi, xm);
                acc(i, pi, xp, xm, p.rw[a] * p.dir_w[k], first);
            }
        }
    }
}

}  // namespace

ScalarField restrict_to_stride(const ScalarField& f, int stride) {
    if (stride == 1) return f;
    const GridSpec sub = strided_grid(f.grid, stride);
    std::vector<double> v(sub.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.values[parent_index(f.grid, sub, i, stride)];
    return ScalarField(sub, std::move(v), f.provenance);
}

ScalarField frac_sublaplacian_pv(const ScalarField& f, double alpha, const PolarOptions& opt, OpReport* rep) {
    check_alpha(alpha);
    const GridSpec& g = f.grid;
    const GridSpec sub = strided_grid(g, opt.stride);
    const PolarPlan p = make_plan(g, alpha, opt);
    const ScalarField lap = sublaplacian(f);
    std::vector<double> out(sub.size(), 0.0), shell(sub.size(), 0.0);
    polar_sweep(g, sub, opt.stride, p, [&](std::size_t i, std::size_t pi, const double* xp, const double* xm, double w, bool first) {
        const double v = w * (f.values[pi] - 0.5 * (interpolate(f, xp) + interpolate(f, xm)));
        out[i] += v;
        if (first) shell[i] += v;
    });
    const double e2 = std::pow(p.eps, 2 - 2 * alpha), tail = p.mom.A * std::pow(p.R, -2 * alpha) / (2 * alpha);
    const double taylor = p.mom.mu / (4 - 4 * alpha);
    std::vector<double> err(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const std::size_t pi = parent_index(g, sub, i, opt.stride);
        const double Lf = -lap.values[pi];
        out[i] += taylor * e2 * Lf + tail * (f.values[pi] - f.exterior);
        // Taylor error on [ε, 2ε], scaled to the inner ball by the next-order power ε^{4−2α}.
        const double t_shell = taylor * (std::pow(2.0, 2 - 2 * alpha) - 1) * e2 * Lf;
        err[i] = (shell[i] - t_shell) / (std::pow(2.0, 4 - 2 * alpha) - 1);
    }
    ScalarField res(sub, std::move(out), "Lpv^" + std::to_string(alpha) + "(" + f.provenance + ")");
    if (rep) {
        rep->error_budget = l2(err, sub.cell_volume());
        rep->detail = {{"eps", p.eps}, {"r_max", p.R}, {"radial_nodes", p.r.size()}, {"directions", p.dirs.size()},
                       {"A", p.mom.A}, {"mu", p.mom.mu}};
    }
    return res;
}

ScalarField frac_sublaplacian_balakrishnan(const HeatFlow& flow, double alpha, OpReport* rep) {
    check_alpha(alpha);
    const auto& nodes = flow.nodes();
    const double a = alpha, pre = alpha / std::tgamma(1 - alpha);
    std::vector<double> w(nodes.size());
    std::vector<double> model_w(nodes.size(), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        w[k] = -pre * (std::pow(nodes[k].lo, -a) - std::pow(nodes[k].hi, -a)) / a;
        if (nodes[k].modelled) model_w[k] = w[k];
    }
    const double rem = flow.remainder_weight([&](double s) { return std::pow(s, -1 - a); });
    w.back() -= pre * rem;
    model_w.back() -= pre * rem;
    const double lo = nodes.front().lo;
    const double cf = pre * std::pow(lo, -a) / a;
    const double cL = pre * std::pow(lo, 1 - a) / (1 - a);
    const double cL2 = -0.5 * pre * std::pow(lo, 2 - a) / (2 - a);
    ScalarField res = flow.combine(w, cf, cL, cL2, "Lbal^" + std::to_string(alpha) + "(" + flow.base().provenance + ")");
    if (rep) {
        const ScalarField model = flow.combine(model_w, 0, 0, 0, "model");
        const double head = std::abs(cL2) * lp_norm(flow.L2f(), 2);
        const double tail = flow.tail_mismatch() * lp_norm(model, 2);
        rep->error_budget = head + tail + 1e-3 * lp_norm(res, 2);
        rep->detail = {{"head_term", head}, {"tail_term", tail}, {"nodes", nodes.size()}, {"s_flow", flow.s_flow()},
                       {"tail_mismatch", flow.tail_mismatch()}};
    }
    return res;
}

ScalarField frac_sublaplacian_balakrishnan(const ScalarField& f, double alpha, OpReport* rep) {
    check_alpha(alpha);
    return frac_sublaplacian_balakrishnan(HeatFlow(f), alpha, rep);
}

ScalarField frac_sublaplacian_fft(const ScalarField& f, double alpha, int pad) {
    check_alpha(alpha);
    ScalarField r = euclidean_multiplier(f, [alpha](double xi2) { return std::pow(xi2, alpha); }, pad);
    r.provenance = "Lfft^" + std::to_string(alpha) + "(" + f.provenance + ")";
    return r;
}

ScalarField euclidean_multiplier(const ScalarField& f, const std::function<double(double)>& m, int pad) {
    const GridSpec& g = f.grid;
    require(g.group->is_euclidean(), ErrorKind::capability, "the Fourier oracle needs a Euclidean group");
    require(pad >= 1, ErrorKind::domain, "pad must be >= 1");
    require(f.exterior == 0, ErrorKind::capability, "the Fourier oracle needs a field that vanishes off the lattice");
    const int d = g.dim();
    std::vector<int> P(d), off(d);
    std::size_t tot = 1;
    for (int j = 0; j < d; ++j) {
        P[j] = good_fft_size(g.shape[j] * pad);
        off[j] = (P[j] - g.shape[j]) / 2;
        tot *= P[j];
    }
    std::vector<double> buf(tot, 0.0);
    std::vector<std::size_t> map(g.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        std::size_t r = i, o = 0, mul = 1;
        for (int j = d - 1; j >= 0; --j) {
            o += (r % g.shape[j] + off[j]) * mul;
            r /= g.shape[j];
            mul *= P[j];
        }
        map[i] = o;
        buf[o] = f.values[i];
    }
    const int last = P[d - 1] / 2 + 1;
    const std::size_t nh = tot / P[d - 1] * last;
    fftw_complex* F = fftw_alloc_complex(nh);
    fftw_plan fwd = plan_r2c(d, P.data(), buf.data(), F);
    fftw_plan bwd = plan_c2r(d, P.data(), F, buf.data());
    fftw_execute(fwd);
    for (std::size_t n = 0; n < nh; ++n) {
        std::size_t r = n;
        double xi2 = 0;
        for (int j = d - 1; j >= 0; --j) {
            const int len = j == d - 1 ? last : P[j];
            int m = static_cast<int>(r % len);
            r /= len;
            if (j != d - 1 && m > P[j] / 2) m -= P[j];
            const double w = 2 * kPi * m / (P[j] * g.spacing(j));
            xi2 += w * w;
        }
        const double mult = m(xi2) / static_cast<double>(tot);
        F[n][0] *= mult;
        F[n][1] *= mult;
    }
    fftw_execute(bwd);
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[map[i]];
    destroy_plan(fwd);
    destroy_plan(bwd);
    fftw_free(F);
    return ScalarField(g, std::move(out), "multiplier(" + f.provenance + ")");
}

// ---------------------------------------------------------------------------------------------
// Fractional integral

ScalarField frac_integral(const HeatFlow& flow, double s, OpReport* rep) {
    const int Q = flow.Q();
    require(s > 0 && s < Q && std::isfinite(s), ErrorKind::domain, "frac_integral needs 0 < s < Q");
    const double c = 1 / std::tgamma(s / 2);
    auto g = [&](double t) { return c * std::pow(t, s / 2 - 1); };
    ScalarField res = flow.integrate(g, "I_" + std::to_string(s) + "(" + flow.base().provenance + ")");
    if (rep) {
        auto w = flow.cell_weights(g);
        w.back() += flow.remainder_weight(g);
        for (std::size_t k = 0; k < w.size(); ++k)
            if (!flow.nodes()[k].modelled) w[k] = 0;
        const double model = lp_norm(flow.combine(w, 0, 0, 0, "model"), 2);
        rep->error_budget = flow.tail_mismatch() * model + 1e-3 * lp_norm(res, 2);
        rep->detail = {{"model_part", model}, {"tail_mismatch", flow.tail_mismatch()}};
    }
    return res;
}

ScalarField frac_integral(const ScalarField& f, double s, OpReport* rep) {
    require(s > 0 && s < f.grid.group->Q && std::isfinite(s), ErrorKind::domain, "frac_integral needs 0 < s < Q");
    return frac_integral(HeatFlow(f), s, rep);
}

// ---------------------------------------------------------------------------------------------
// Commutator

ScalarField commutator(const ScalarField& u, const ScalarField& v, double alpha, const PolarOptions& opt, OpReport* rep) {
    check_alpha(alpha);
    require(u.grid == v.grid, ErrorKind::spec_mismatch, "commutator arguments live on different grids");
    const GridSpec& g = u.grid;
    const GridSpec sub = strided_grid(g, opt.stride);
    const PolarPlan p = make_plan(g, alpha, opt);
    const auto gu = horizontal_gradient(u), gv = horizontal_gradient(v);
    std::vector<double> out(sub.size(), 0.0), shell(sub.size(), 0.0);
    polar_sweep(g, sub, opt.stride, p, [&](std::size_t i, std::size_t pi, const double* xp, const double* xm, double w, bool first) {
        const double u0 = u.values[pi], v0 = v.values[pi];
        const double dp = (interpolate(u, xp) - u0) * (interpolate(v, xp) - v0);
        const double dm = (interpolate(u, xm) - u0) * (interpolate(v, xm) - v0);
        const double val = -0.5 * w * (dp + dm);
        out[i] += val;
        if (first) shell[i] += val;
    });
    const double e2 = std::pow(p.eps, 2 - 2 * alpha), tail = p.mom.A * std::pow(p.R, -2 * alpha) / (2 * alpha);
    const double taylor = p.mom.mu / (2 - 2 * alpha);
    std::vector<double> err(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const std::size_t pi = parent_index(g, sub, i, opt.stride);
        double dot = 0;
        for (std::size_t j = 0; j < gu.size(); ++j) dot += gu[j].values[pi] * gv[j].values[pi];
        out[i] += -taylor * e2 * dot - tail * (u.values[pi] - u.exterior) * (v.values[pi] - v.exterior);
        const double t_shell = -taylor * (std::pow(2.0, 2 - 2 * alpha) - 1) * e2 * dot;
        err[i] = (shell[i] - t_shell) / (std::pow(2.0, 4 - 2 * alpha) - 1);
    }
    ScalarField res(sub, std::move(out), "H_" + std::to_string(alpha) + "(" + u.provenance + "," + v.provenance + ")");
    if (rep) {
        rep->error_budget = l2(err, sub.cell_volume());
        rep->detail = {{"eps", p.eps}, {"r_max", p.R}, {"radial_nodes", p.r.size()}, {"directions", p.dirs.size()}};
    }
    return res;
}

ScalarField commutator_assembled(const ScalarField& u, const ScalarField& v, double alpha, const PolarOptions& opt) {
    const ScalarField uv = multiply(u, v);
    const ScalarField a = frac_sublaplacian_pv(uv, alpha, opt);
    const ScalarField lu = frac_sublaplacian_pv(u, alpha, opt), lv = frac_sublaplacian_pv(v, alpha, opt);
    const ScalarField us = restrict_to_stride(u, opt.stride), vs = restrict_to_stride(v, opt.stride);
    ScalarField res = a - multiply(us, lv);
    res -= multiply(vs, lu);
    res.provenance = "assembled H_" + std::to_string(alpha) + "(" + u.provenance + "," + v.provenance + ")";
    return res;
}

}  // namespace chg
