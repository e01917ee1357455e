#include "chg/heat_flow.hpp"

#include "chg/fft.hpp"

#include <algorithm>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <complex>

#include "chg/error.hpp"
#include "chg/heisenberg_heat.hpp"
#include "chg/numerics.hpp"

namespace chg {

using cplx = std::complex<double>;

namespace {

std::vector<float> to_float(const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); }

double finest_horizontal_spacing(const GridSpec& g) {
    double h = INFINITY;
    for (int j = 0; j < g.group->horizontal_dim(); ++j) h = std::min(h, g.spacing(j));
    return h;
}

double widest_horizontal_extent(const GridSpec& g) {
    double L = 0;
    for (int j = 0; j < g.group->horizontal_dim(); ++j) L = std::max(L, g.extents[j]);
    return L;
}

// Horizontal radius around the origin holding all but 1e-3 of ∫|f|.
double mass_radius(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const int m = g.group->horizontal_dim();
    std::vector<std::pair<double, double>> rw;
    rw.reserve(f.values.size());
    double tot = 0, x[8];
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (f.values[i] == 0) continue;
        g.point(i, x);
        double r2 = 0;
        for (int j = 0; j < m; ++j) r2 += x[j] * x[j];
        rw.emplace_back(r2, std::abs(f.values[i]));
        tot += std::abs(f.values[i]);
    }
    if (tot == 0) return 0;
    std::sort(rw.begin(), rw.end());
    double acc = 0;
    for (const auto& [r2, w] : rw) {
        acc += w;
        if (acc >= (1 - 1e-3) * tot) return std::sqrt(r2);
    }
    return std::sqrt(rw.back().first);
}

// e^{-β} I_k(β), k = 0, 1, ..., until the term drops below tol.
std::vector<double> scaled_bessel(double beta, double tol) {
    std::vector<double> c;
    for (int k = 0;; ++k) {
        const double v = beta == 0 ? (k == 0 ? 1.0 : 0.0) : boost::math::cyl_bessel_i(k, beta) * std::exp(-beta);
        c.push_back(v);
        if (k > 0 && 2 * v < tol) break;
        if (beta == 0) break;
    }
    return c;
}

}  // namespace

HeatFlow::HeatFlow(const ScalarField& f, const HeatFlowOptions& opt) : f_(f) {
    const GridSpec& g = f.grid;
    require(opt.nodes_per_efold >= 1 && opt.tail_nodes_per_efold >= 1, ErrorKind::domain, "node densities must be >= 1");
    require(f.exterior == 0, ErrorKind::capability, "the heat flow needs a field that vanishes off the lattice");
    mass_ = f.integral();
    if (g.group->is_euclidean())
        run_euclidean(opt);
    else if (g.group->is_heisenberg())
        run_h1(opt);
    else
        fail(ErrorKind::capability, "heat flow supports R^n and H1");
    add_model_slices();
}

void HeatFlow::build_nodes(double s_min, double s_flow, double s_far, const HeatFlowOptions& opt) {
    require(s_min > 0 && s_flow > s_min, ErrorKind::domain, "heat flow needs 0 < s_min < s_flow");
    // Nodes sit on the fixed lattice s = e^{k/n}, so dilated problems do not reuse the same nodes.
    const double n = opt.nodes_per_efold, d = 1.0 / n;
    const long k0 = std::lround(std::floor(std::log(s_min) * n)), k1 = std::lround(std::floor(std::log(s_flow) * n));
    nodes_.clear();
    for (long k = k0; k <= std::max(k1, k0 + 1); ++k) {
        const double s = std::exp(k * d);
        nodes_.push_back({s, s * std::exp(-d / 2), s * std::exp(d / 2), false});
    }
    s_flow_ = nodes_.back().s;
    const double nt = opt.tail_nodes_per_efold;
    double lo = nodes_.back().hi;
    long m = std::lround(std::ceil(std::log(lo) * nt + 0.5));
    while (lo < s_far) {
        const double hi = std::exp(m / nt);
        nodes_.push_back({std::sqrt(lo * hi), lo, hi, true});
        lo = hi;
        ++m;
    }
}

void HeatFlow::run_euclidean(const HeatFlowOptions& opt) {
    const GridSpec& g = f_.grid;
    const int d = g.dim();
    const double pad = opt.pad > 0 ? opt.pad : (d == 1 ? 32.0 : d == 2 ? 4.0 : 2.0);
    std::vector<int> P(d), off(d);
    std::size_t tot = 1;
    double dist = INFINITY;
    for (int j = 0; j < d; ++j) {
        P[j] = good_fft_size(static_cast<int>(std::ceil(g.shape[j] * pad)));
        off[j] = (P[j] - g.shape[j]) / 2;
        tot *= P[j];
        // Periodic images sit one period away; heat must not cross the gap.
        dist = std::min(dist, P[j] * g.spacing(j) - 2 * g.extents[j]);
    }
    dist = std::max(dist - mass_radius(f_), 1e-12);
    const double s_flow = dist * dist / (4 * std::log(1 / opt.boundary_tol));
    const double h = finest_horizontal_spacing(g), L = widest_horizontal_extent(g);
    build_nodes(opt.s_min > 0 ? opt.s_min : 0.02 * h * h, s_flow, opt.s_far > 0 ? opt.s_far : 1e4 * L * L, opt);

    std::vector<double> buf(tot, 0.0);
    auto padded_index = [&](std::size_t i) {
        std::size_t r = i, o = 0, mul = 1;
        for (int j = d - 1; j >= 0; --j) {
            o += (r % g.shape[j] + off[j]) * mul;
            r /= g.shape[j];
            mul *= P[j];
        }
        return o;
    };
    std::vector<std::size_t> map(g.size());
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = padded_index(i);
    for (std::size_t i = 0; i < map.size(); ++i) buf[map[i]] = f_.values[i];

    const std::size_t nh = tot / P[d - 1] * (P[d - 1] / 2 + 1);
    fftw_complex* F = fftw_alloc_complex(nh);
    fftw_complex* W = fftw_alloc_complex(nh);
    fftw_plan fwd = plan_r2c(d, P.data(), buf.data(), F);
    fftw_plan bwd = plan_c2r(d, P.data(), W, buf.data());
    fftw_execute(fwd);
    // |ξ|² per half-spectrum index.
    std::vector<double> xi2(nh);
    {
        const int last = P[d - 1] / 2 + 1;
        for (std::size_t n = 0; n < nh; ++n) {
            std::size_t r = n;
            double acc = 0;
            for (int j = d - 1; j >= 0; --j) {
                const int len = j == d - 1 ? last : P[j];
                int m = static_cast<int>(r % len);
                r /= len;
                if (j != d - 1 && m > P[j] / 2) m -= P[j];
                const double w = 2 * kPi * m / (P[j] * g.spacing(j));
                acc += w * w;
            }
            xi2[n] = acc;
        }
    }
    auto apply = [&](const std::function<double(double)>& mult) {
        for (std::size_t n = 0; n < nh; ++n) {
            const double m = mult(xi2[n]) / static_cast<double>(tot);
            W[n][0] = F[n][0] * m;
            W[n][1] = F[n][1] * m;
        }
        fftw_execute(bwd);
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[map[i]];
        return out;
    };
    Lf_ = ScalarField(g, apply([](double x) { return x; }), "L(" + f_.provenance + ")");
    L2f_ = ScalarField(g, apply([](double x) { return x * x; }), "L^2(" + f_.provenance + ")");
    for (const auto& nd : nodes_) {
        if (nd.modelled) break;
        const double s = nd.s;
        slices_.push_back(to_float(apply([s](double x) { return std::exp(-s * x); })));
    }
    destroy_plan(fwd);
    destroy_plan(bwd);
    fftw_free(F);
    fftw_free(W);
}

void HeatFlow::run_h1(const HeatFlowOptions& opt) {
    const GridSpec& g = f_.grid;
    const double pad = opt.pad > 0 ? opt.pad : 3.0;
    const int na = g.shape[0], nb = g.shape[1], nc = g.shape[2];
    const double ha = g.spacing(0), hb = g.spacing(1), hc = g.spacing(2);
    const int oa = static_cast<int>(std::lround((pad - 1) * (na - 1) / 2.0));
    const int ob = static_cast<int>(std::lround((pad - 1) * (nb - 1) / 2.0));
    const int Pa = na + 2 * oa, Pb = nb + 2 * ob;
    const int Nc = good_fft_size(static_cast<int>(std::ceil(nc * opt.c_pad)));
    const int nw = Nc / 2 + 1;
    const double dist = std::max(std::min(oa * ha, ob * hb) + std::min(g.extents[0], g.extents[1]) - mass_radius(f_), 1e-12);
    const double s_flow = dist * dist / (4 * std::log(1 / opt.boundary_tol));
    const double h = std::min(ha, hb), L = std::max(g.extents[0], g.extents[1]);
    build_nodes(opt.s_min > 0 ? opt.s_min : 0.02 * h * h, s_flow, opt.s_far > 0 ? opt.s_far : 1e4 * L * L, opt);

    // Phase tables: hop in a at row j, hop in b at column i.
    std::vector<cplx> pa(static_cast<std::size_t>(Pb) * nw), qb(static_cast<std::size_t>(Pa) * nw);
    for (int j = 0; j < Pb; ++j) {
        const double b = (j - ob) * hb - g.extents[1];
        for (int k = 0; k < nw; ++k) pa[static_cast<std::size_t>(j) * nw + k] = std::polar(1.0, -2 * kPi * k / (Nc * hc) * b * ha / 2);
    }
    for (int i = 0; i < Pa; ++i) {
        const double a = (i - oa) * ha - g.extents[0];
        for (int k = 0; k < nw; ++k) qb[static_cast<std::size_t>(i) * nw + k] = std::polar(1.0, 2 * kPi * k / (Nc * hc) * a * hb / 2);
    }
    const double ia2 = 1 / (ha * ha), ib2 = 1 / (hb * hb), diag = 2 * ia2 + 2 * ib2;
    const double lam_half = 0.5 * (4 * ia2 + 4 * ib2);
    // State layout [i][j][k] with a zero ghost ring around the (a, b) box.
    const int Ga = Pa + 2, Gb = Pb + 2;
    const std::size_t n_state = static_cast<std::size_t>(Ga) * Gb * nw;
    auto at = [&](int i, int j) { return (static_cast<std::size_t>(i + 1) * Gb + (j + 1)) * nw; };
    int k_active = nw;

    // out = (L/λh − 1) in, or L in when shift == false.
    auto apply = [&](const std::vector<cplx>& in, std::vector<cplx>& out, bool shift) {
        const double sc = shift ? 1 / lam_half : 1.0, sub = shift ? 1.0 : 0.0;
        const double cd = diag * sc - sub, ca = ia2 * sc, cb = ib2 * sc;
        const std::size_t sa = static_cast<std::size_t>(Gb) * nw, sb = nw;
        for (int i = 0; i < Pa; ++i)
            for (int j = 0; j < Pb; ++j) {
                const std::size_t o = at(i, j);
                const double* g0 = reinterpret_cast<const double*>(in.data() + o);
                const double* gap = g0 + 2 * sa;
                const double* gam = g0 - 2 * sa;
                const double* gbp = g0 + 2 * sb;
                const double* gbm = g0 - 2 * sb;
                const double* pha = reinterpret_cast<const double*>(pa.data() + static_cast<std::size_t>(j) * nw);
                const double* phb = reinterpret_cast<const double*>(qb.data() + static_cast<std::size_t>(i) * nw);
                double* r = reinterpret_cast<double*>(out.data() + o);
                for (int k = 0; k < k_active; ++k) {
                    const int re = 2 * k, im = re + 1;
                    // p·g(i+1) + conj(p)·g(i-1)
                    const double sre = gap[re] + gam[re], sim = gap[im] + gam[im];
                    const double dre = gap[re] - gam[re], dim = gap[im] - gam[im];
                    const double har = pha[re] * sre - pha[im] * dim;
                    const double hai = pha[re] * sim + pha[im] * dre;
                    const double tre = gbp[re] + gbm[re], tim = gbp[im] + gbm[im];
                    const double ure = gbp[re] - gbm[re], uim = gbp[im] - gbm[im];
                    const double hbr = phb[re] * tre - phb[im] * uim;
                    const double hbi = phb[re] * tim + phb[im] * ure;
                    r[re] = cd * g0[re] - ca * har - cb * hbr;
                    r[im] = cd * g0[im] - ca * hai - cb * hbi;
                }
            }
    };

    // Forward c-transform of the padded state.
    std::vector<double> line(Nc);
    std::vector<cplx> spec(nw);
    fftw_plan fwd = plan_r2c_1d(Nc, line.data(), reinterpret_cast<fftw_complex*>(spec.data()));
    fftw_plan bwd = plan_c2r_1d(Nc, reinterpret_cast<fftw_complex*>(spec.data()), line.data());
    std::vector<cplx> state(n_state, cplx(0, 0));
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            std::fill(line.begin(), line.end(), 0.0);
            const double* src = f_.values.data() + (static_cast<std::size_t>(i) * nb + j) * nc;
            bool any = false;
            for (int l = 0; l < nc; ++l) {
                line[l] = src[l];
                any = any || src[l] != 0;
            }
            if (!any) continue;
            fftw_execute(fwd);
            if (Nc % 2 == 0) spec[nw - 1] = 0;
            std::copy(spec.begin(), spec.end(), state.begin() + at(i + oa, j + ob));
        }
    {
        double top = 0;
        std::vector<double> mode(nw, 0.0);
        for (std::size_t n = 0; n < n_state; ++n) mode[n % nw] = std::max(mode[n % nw], std::abs(state[n]));
        for (double v : mode) top = std::max(top, v);
        while (k_active > 1 && mode[k_active - 1] <= 1e-12 * top) --k_active;
    }
    auto extract = [&](const std::vector<cplx>& st) {
        std::vector<double> out(g.size());
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < nb; ++j) {
                const cplx* s = st.data() + at(i + oa, j + ob);
                std::copy(s, s + nw, spec.begin());
                fftw_execute(bwd);
                double* dst = out.data() + (static_cast<std::size_t>(i) * nb + j) * nc;
                for (int l = 0; l < nc; ++l) dst[l] = line[l] / Nc;
            }
        return out;
    };

    std::vector<cplx> t0(n_state), t1(n_state), t2(n_state), acc(n_state);
    apply(state, t0, false);
    Lf_ = ScalarField(g, extract(t0), "L(" + f_.provenance + ")");
    apply(t0, t1, false);
    L2f_ = ScalarField(g, extract(t1), "L^2(" + f_.provenance + ")");

    // e^{-τL} by Chebyshev series in X = L/λh − 1, substeps with β = τλh ≤ 500.
    auto propagate = [&](double tau) {
        const int sub = std::max(1, static_cast<int>(std::ceil(tau * lam_half / 500)));
        const double beta = tau * lam_half / sub;
        const auto c = scaled_bessel(beta, 1e-9);
        for (int r = 0; r < sub; ++r) {
            // T0 = state, T1 = X state.
            for (std::size_t n = 0; n < n_state; ++n) acc[n] = c[0] * state[n];
            if (c.size() > 1) {
                apply(state, t1, true);
                for (std::size_t n = 0; n < n_state; ++n) acc[n] -= 2 * c[1] * t1[n];
                std::vector<cplx> keep = state;
                std::vector<cplx>* prev = &keep;
                std::vector<cplx>* cur = &t1;
                std::vector<cplx>* nxt = &t2;
                for (std::size_t k = 2; k < c.size(); ++k) {
                    apply(*cur, *nxt, true);
                    const double ck = (k % 2 ? -2.0 : 2.0) * c[k];
                    for (std::size_t n = 0; n < n_state; ++n) {
                        (*nxt)[n] = 2.0 * (*nxt)[n] - (*prev)[n];
                        acc[n] += ck * (*nxt)[n];
                    }
                    std::vector<cplx>* tmp = prev;
                    prev = cur;
                    cur = nxt;
                    nxt = tmp;
                }
            }
            state.swap(acc);
        }
    };
    double s_now = 0;
    for (const auto& nd : nodes_) {
        if (nd.modelled) break;
        propagate(nd.s - s_now);
        s_now = nd.s;
        slices_.push_back(to_float(extract(state)));
    }
    destroy_plan(fwd);
    destroy_plan(bwd);
}

void HeatFlow::add_model_slices() {
    const GridSpec& g = f_.grid;
    const int d = g.dim(), m = g.group->horizontal_dim();
    double x[8];
    std::vector<double> cen(d, 0.0);
    double abs_mass = 0;
    for (std::size_t i = 0; i < f_.values.size(); ++i) abs_mass += std::abs(f_.values[i]);
    const bool massive = std::abs(mass_) > 1e-12 * abs_mass * g.cell_volume();
    double var = 0;
    if (massive) {
        for (std::size_t i = 0; i < f_.values.size(); ++i) {
            g.point(i, x);
            for (int j = 0; j < d; ++j) cen[j] += x[j] * f_.values[i];
        }
        for (int j = 0; j < d; ++j) cen[j] *= g.cell_volume() / mass_;
        for (std::size_t i = 0; i < f_.values.size(); ++i) {
            g.point(i, x);
            for (int j = 0; j < m; ++j) var += (x[j] - cen[j]) * (x[j] - cen[j]) * f_.values[i];
        }
        var *= g.cell_volume() / (mass_ * m);
    }
    const double s_star = std::max(0.0, var / 2);
    std::vector<double> ci(d);
    for (int j = 0; j < d; ++j) ci[j] = -cen[j];
    auto table = g.group->is_heisenberg() ? H1HeatTable::instance() : nullptr;
    auto model = [&](double s) {
        std::vector<double> out(g.size(), 0.0);
        if (!massive) return out;
        const double t = s + s_star;
        double y[8];
        for (std::size_t i = 0; i < out.size(); ++i) {
            g.point(i, x);
            if (table) {
                product_raw(*g.group, ci.data(), x, y);
                out[i] = mass_ * table->eval(t, y[0] * y[0] + y[1] * y[1], y[2]);
            } else {
                double r2 = 0;
                for (int j = 0; j < d; ++j) r2 += (x[j] - cen[j]) * (x[j] - cen[j]);
                out[i] = mass_ * std::pow(4 * kPi * t, -0.5 * d) * std::exp(-r2 / (4 * t));
            }
        }
        return out;
    };
    if (!slices_.empty()) {
        const std::size_t k = slices_.size() - 1;
        const auto mod = model(nodes_[k].s);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < mod.size(); ++i) {
            num += std::pow(mod[i] - slices_[k][i], 2);
            den += std::pow(static_cast<double>(slices_[k][i]), 2);
        }
        tail_mismatch_ = den > 0 ? std::sqrt(num / den) : 0.0;
    }
    for (std::size_t k = slices_.size(); k < nodes_.size(); ++k) slices_.push_back(to_float(model(nodes_[k].s)));
}

ScalarField HeatFlow::slice(std::size_t k) const {
    require(k < slices_.size(), ErrorKind::usage, "heat flow slice index out of range");
    return ScalarField(f_.grid, std::vector<double>(slices_[k].begin(), slices_[k].end()),
                       "H_" + std::to_string(nodes_[k].s) + "(" + f_.provenance + ")");
}

ScalarField HeatFlow::combine(const std::vector<double>& w, double a, double b, double c, const std::string& prov) const {
    require(w.size() == slices_.size(), ErrorKind::usage, "weight count does not match the heat flow nodes");
    const std::size_t n = f_.values.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k] == 0) continue;
        const float* s = slices_[k].data();
        const double wk = w[k];
        for (std::size_t i = 0; i < n; ++i) out[i] += wk * s[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] += a * f_.values[i] + b * Lf_.values[i] + c * L2f_.values[i];
    return ScalarField(f_.grid, std::move(out), prov);
}

std::vector<double> HeatFlow::cell_weights(const std::function<double(double)>& g) const {
    const auto& q = gauss_legendre(4);
    std::vector<double> w(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const double l0 = std::log(nodes_[k].lo), l1 = std::log(nodes_[k].hi);
        double acc = 0;
        for (int i = 0; i < 4; ++i) {
            const double s = std::exp(0.5 * (l0 + l1) + 0.5 * (l1 - l0) * q.x[i]);
            acc += q.w[i] * g(s) * s;
        }
        w[k] = 0.5 * (l1 - l0) * acc;
    }
    return w;
}

std::array<double, 3> HeatFlow::head_moments(const std::function<double(double)>& g) const {
    // Gauss in log s over 12 decades below lo_0, plus a power-law piece under that.
    const double top = nodes_.front().lo, bottom = top * 1e-12;
    const auto rule = composite_gauss(std::log(bottom), std::log(top), 96, 4);
    std::array<double, 3> m{0, 0, 0};
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double s = std::exp(rule.x[i]), v = g(s) * s * rule.w[i];
        m[0] += v;
        m[1] += v * s;
        m[2] += v * s * s;
    }
    const double s0 = bottom, s1 = bottom * 2;
    m[0] += power_head(s0, g(s0), s1, g(s1));
    return m;
}

double HeatFlow::remainder_weight(const std::function<double(double)>& g) const {
    const double s_last = nodes_.back().s, start = nodes_.back().hi, p = -0.5 * Q();
    auto gi = [&](double s) { return g(s) * std::pow(s / s_last, p); };
    const auto rule = composite_gauss(std::log(start), std::log(start * 1e8), 64, 4);
    double acc = 0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double s = std::exp(rule.x[i]);
        acc += rule.w[i] * gi(s) * s;
    }
    const double e = start * 1e8;
    return acc + power_tail(e / 2, gi(e / 2), e, gi(e));
}

ScalarField HeatFlow::integrate(const std::function<double(double)>& g, const std::string& prov) const {
    auto w = cell_weights(g);
    w.back() += remainder_weight(g);
    const auto m = head_moments(g);
    return combine(w, m[0], -m[1], 0.5 * m[2], prov);
}

}  // namespace chg
