#include "chg/fields.hpp"

#include "chg/fft.hpp"

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>

#include "chg/error.hpp"
#include "chg/kernels.hpp"
#include "chg/numerics.hpp"

namespace chg {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------------------------
// GridSpec

GridSpec GridSpec::make(GroupPtr g, std::vector<double> extents, std::vector<int> shape) {
    GridSpec s{std::move(g), std::move(extents), std::move(shape)};
    s.validate();
    return s;
}

GridSpec GridSpec::standard(const std::string& group) {
    auto g = make_group(group);
    if (group == "R1") return make(g, {10.0}, {257});
    if (group == "R2") return make(g, {8.0, 8.0}, {129, 129});
    if (group == "R3") return make(g, {6.0, 6.0, 6.0}, {65, 65, 65});
    if (group == "H1") return make(g, {6.0, 6.0, 12.0}, {64, 64, 96});
    fail(ErrorKind::capability, "no standard grid for group " + group);
}

void GridSpec::validate() const {
    require(group != nullptr, ErrorKind::data, "grid without group");
    require(static_cast<int>(extents.size()) == group->dim() && static_cast<int>(shape.size()) == group->dim(),
            ErrorKind::spec_mismatch, "grid rank does not match group dimension");
    for (int j = 0; j < dim(); ++j) {
        require(extents[j] > 0 && std::isfinite(extents[j]), ErrorKind::domain, "grid extents must be positive");
        require(shape[j] >= 2, ErrorKind::domain, "grid needs at least 2 points per axis");
    }
}

std::size_t GridSpec::size() const {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
}

std::size_t GridSpec::stride(int j) const {
    std::size_t s = 1;
    for (int k = dim() - 1; k > j; --k) s *= static_cast<std::size_t>(shape[k]);
    return s;
}

double GridSpec::cell_volume() const {
    double v = 1;
    for (int j = 0; j < dim(); ++j) v *= spacing(j);
    return v;
}

GridSpec GridSpec::dilated(double lambda) const {
    require(lambda > 0, ErrorKind::domain, "dilation factor must be positive");
    GridSpec g = *this;
    for (int j = 0; j < dim(); ++j) g.extents[j] /= std::pow(lambda, group->degree(j));
    return g;
}

bool GridSpec::centered() const {
    return std::all_of(shape.begin(), shape.end(), [](int n) { return n % 2 == 1; });
}

void GridSpec::point(std::size_t idx, double* x) const {
    for (int j = dim() - 1; j >= 0; --j) {
        const int i = static_cast<int>(idx % shape[j]);
        idx /= shape[j];
        x[j] = coord(j, i);
    }
}

nlohmann::json GridSpec::to_json() const {
    return {{"group", group->name}, {"extents", extents}, {"shape", shape}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
    return make(make_group(j.at("group").get<std::string>()), j.at("extents").get<std::vector<double>>(),
                j.at("shape").get<std::vector<int>>());
}

bool GridSpec::operator==(const GridSpec& o) const {
    return *group == *o.group && extents == o.extents && shape == o.shape;
}

// ---------------------------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(GridSpec g, std::vector<double> v, std::string prov)
    : grid(std::move(g)), values(std::move(v)), provenance(std::move(prov)) {
    require(values.size() == grid.size(), ErrorKind::data, "field size does not match grid");
    for (double x : values) require(std::isfinite(x), ErrorKind::data, "non-finite sample in field " + provenance);
    refresh_boundary();
}

ScalarField ScalarField::zeros(const GridSpec& g, std::string prov) {
    return ScalarField(g, std::vector<double>(g.size(), 0.0), std::move(prov));
}

double ScalarField::integral() const { return pairwise_sum(values) * grid.cell_volume(); }

double ScalarField::max_abs() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

void ScalarField::refresh_boundary() {
    const double m = max_abs();
    if (m == 0) {
        boundary_ratio = 0;
        return;
    }
    double b = 0;
    const int d = grid.dim();
    std::vector<int> idx(d, 0);
    for (std::size_t n = 0; n < values.size(); ++n) {
        std::size_t r = n;
        bool edge = false;
        for (int j = d - 1; j >= 0; --j) {
            const int i = static_cast<int>(r % grid.shape[j]);
            r /= grid.shape[j];
            edge = edge || i == 0 || i == grid.shape[j] - 1;
        }
        if (edge) b = std::max(b, std::abs(values[n]));
    }
    boundary_ratio = b / m;
}

static void check_same(const ScalarField& a, const ScalarField& b) {
    require(a.grid == b.grid, ErrorKind::spec_mismatch, "fields live on different grids");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    check_same(*this, o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    exterior += o.exterior;
    return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
    check_same(*this, o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    exterior -= o.exterior;
    return *this;
}
ScalarField& ScalarField::operator*=(double a) {
    for (double& v : values) v *= a;
    exterior *= a;
    return *this;
}
ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double a, ScalarField f) { return f *= a; }

ScalarField multiply(const ScalarField& a, const ScalarField& b) {
    check_same(a, b);
    std::vector<double> v(a.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values[i] * b.values[i];
    ScalarField out(a.grid, std::move(v), "(" + a.provenance + ")*(" + b.provenance + ")");
    out.exterior = a.exterior * b.exterior;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Analytic functions

namespace {

double smooth_step(double s) {  // 1 at s <= 0, 0 at s >= 1, C^∞
    if (s <= 0) return 1;
    if (s >= 1) return 0;
    const double a = std::exp(-1 / (1 - s)), b = std::exp(-1 / s);
    return a / (a + b);
}

double profile(const std::string& id, const GroupSpec& g, const double* y, double sigma, double param) {
    const int m = g.horizontal_dim(), n = g.dim();
    double h2 = 0, v2 = 0;
    for (int j = 0; j < m; ++j) h2 += y[j] * y[j];
    for (int j = m; j < n; ++j) v2 += y[j] * y[j];
    const double rho2 = h2 / (sigma * sigma) + v2 / std::pow(sigma, 4);
    if (id == "gaussian") return std::exp(-rho2);
    if (id == "bump") return rho2 < 1 ? std::exp(1 - 1 / (1 - rho2)) : 0.0;
    if (id == "plateau") return smooth_step((std::sqrt(rho2) - 0.5) / 0.5);
    if (id == "log_trunc") {
        const double r = norm_raw(g, y) / sigma;
        if (r >= 1) return 0.0;
        return r <= 0 ? param : std::min(param, -std::log(r));
    }
    fail(ErrorKind::domain, "unknown field function " + id);
}

}  // namespace

double FieldFunction::operator()(const GroupSpec& g, const double* x) const {
    if (id == "zero") return 0.0;
    if (id == "constant") return amplitude;
    const int n = g.dim();
    double buf[8], y[8], inv[8];
    const double* p = x;
    if (!center.empty()) {
        require(static_cast<int>(center.size()) == n, ErrorKind::spec_mismatch, "center has wrong dimension");
        for (int j = 0; j < n; ++j) inv[j] = -center[j];
        product_raw(g, inv, x, buf);
        p = buf;
    }
    dilate_raw(g, lambda, p, y);
    if (id == "coordinate") {
        const int j = static_cast<int>(param);
        require(j >= 0 && j < n, ErrorKind::domain, "coordinate index out of range");
        return amplitude * y[j];
    }
    if (id == "two_bump") {
        double z[8], w[8], s[8];
        for (int j = 0; j < n; ++j) s[j] = 0;
        s[0] = -param * sigma;
        product_raw(g, s, y, z);
        s[0] = param * sigma;
        product_raw(g, s, y, w);
        return amplitude * (profile("bump", g, z, sigma, 0) + profile("bump", g, w, sigma, 0));
    }
    return amplitude * profile(id, g, y, sigma, param);
}

std::string FieldFunction::label() const {
    std::string s = id;
    if (id != "zero") {
        char buf[128];
        std::snprintf(buf, sizeof buf, "(A=%g,sigma=%g,lambda=%g", amplitude, sigma, lambda);
        s += buf;
        if (param != 0) s += ",param=" + std::to_string(param);
        if (!center.empty()) {
            s += ",center=[";
            for (std::size_t j = 0; j < center.size(); ++j) s += (j ? "," : "") + std::to_string(center[j]);
            s += "]";
        }
        s += ")";
    }
    return s;
}

nlohmann::json FieldFunction::to_json() const {
    return {{"id", id}, {"amplitude", amplitude}, {"sigma", sigma}, {"lambda", lambda}, {"center", center}, {"param", param}};
}

FieldFunction FieldFunction::from_json(const nlohmann::json& j) {
    static const char* keys[] = {"id", "amplitude", "sigma", "lambda", "center", "param"};
    for (auto it = j.begin(); it != j.end(); ++it)
        require(std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }) != std::end(keys),
                ErrorKind::usage, "unknown field function key '" + it.key() + "'");
    FieldFunction f;
    f.id = j.value("id", f.id);
    f.amplitude = j.value("amplitude", f.amplitude);
    f.sigma = j.value("sigma", f.sigma);
    f.lambda = j.value("lambda", f.lambda);
    f.center = j.value("center", f.center);
    f.param = j.value("param", f.param);
    return f;
}

ScalarField sample_field(const FieldFunction& fn, const GridSpec& grid) {
    grid.validate();
    require(fn.lambda > 0 && fn.sigma > 0, ErrorKind::domain, "field function needs sigma, lambda > 0");
    std::vector<double> v(grid.size());
    double x[8];
    for (std::size_t i = 0; i < v.size(); ++i) {
        grid.point(i, x);
        v[i] = fn(*grid.group, x);
        if (!std::isfinite(v[i])) fail(ErrorKind::data, "non-finite sample of " + fn.label());
    }
    ScalarField out(grid, std::move(v), fn.label());
    if (fn.id == "constant") out.exterior = fn.amplitude;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Norms

static double lp_impl(const ScalarField& f, double p, int ring) {
    require(p >= 1, ErrorKind::domain, "lp_norm needs p >= 1");
    const GridSpec& g = f.grid;
    const int d = g.dim();
    std::vector<double> terms;
    terms.reserve(f.values.size());
    double mx = 0;
    for (std::size_t n = 0; n < f.values.size(); ++n) {
        if (ring > 0) {
            std::size_t r = n;
            bool skip = false;
            for (int j = d - 1; j >= 0; --j) {
                const int i = static_cast<int>(r % g.shape[j]);
                r /= g.shape[j];
                skip = skip || i < ring || i >= g.shape[j] - ring;
            }
            if (skip) continue;
        }
        const double a = std::abs(f.values[n]);
        if (std::isinf(p))
            mx = std::max(mx, a);
        else
            terms.push_back(p == 1 ? a : (p == 2 ? a * a : std::pow(a, p)));
    }
    if (std::isinf(p)) return mx;
    const double s = pairwise_sum(terms) * g.cell_volume();
    return p == 1 ? s : (p == 2 ? std::sqrt(s) : std::pow(s, 1 / p));
}

double lp_norm(const ScalarField& f, double p) { return lp_impl(f, p, 0); }
double lp_norm_interior(const ScalarField& f, double p, int ring) { return lp_impl(f, p, ring); }

// ---------------------------------------------------------------------------------------------
// Interpolation

namespace {

// Lagrange weights on nodes -1, 0, 1, 2 for offset u ∈ [0, 1).
inline void lagrange4(double u, double* w) {
    w[0] = -u * (u - 1) * (u - 2) / 6;
    w[1] = (u + 1) * (u - 1) * (u - 2) / 2;
    w[2] = -(u + 1) * u * (u - 2) / 2;
    w[3] = (u + 1) * u * (u - 1) / 6;
}

}  // namespace

double interpolate(const ScalarField& f, const double* x) {
    const GridSpec& g = f.grid;
    const int d = g.dim();
    int base[3];
    double inside = 1;  // lattice share of the stencil; the rest takes the exterior value
    double w[3][4];
    for (int j = 0; j < d; ++j) {
        const double h = g.spacing(j);
        const double s = (x[j] + g.extents[j]) / h;
        if (s < -2 || s > g.shape[j] + 1) return f.exterior;
        const double fl = std::floor(s);
        base[j] = static_cast<int>(fl) - 1;
        lagrange4(s - fl, w[j]);
        double part = 0;
        for (int a = 0; a < 4; ++a)
            if (base[j] + a >= 0 && base[j] + a < g.shape[j]) part += w[j][a];
        inside *= part;
    }
    const double* v = f.values.data();
    if (d == 1) {
        double acc = 0;
        for (int a = 0; a < 4; ++a) {
            const int i = base[0] + a;
            if (i >= 0 && i < g.shape[0]) acc += w[0][a] * v[i];
        }
        return acc + f.exterior * (1 - inside);
    }
    if (d == 2) {
        double acc = 0;
        const int n1 = g.shape[1];
        for (int a = 0; a < 4; ++a) {
            const int i = base[0] + a;
            if (i < 0 || i >= g.shape[0]) continue;
            double row = 0;
            for (int b = 0; b < 4; ++b) {
                const int k = base[1] + b;
                if (k >= 0 && k < n1) row += w[1][b] * v[static_cast<std::size_t>(i) * n1 + k];
            }
            acc += w[0][a] * row;
        }
        return acc + f.exterior * (1 - inside);
    }
    require(d == 3, ErrorKind::capability, "interpolation supports dimension <= 3");
    const int n1 = g.shape[1], n2 = g.shape[2];
    double acc = 0;
    for (int a = 0; a < 4; ++a) {
        const int i = base[0] + a;
        if (i < 0 || i >= g.shape[0]) continue;
        double pa = 0;
        for (int b = 0; b < 4; ++b) {
            const int k = base[1] + b;
            if (k < 0 || k >= n1) continue;
            const double* line = v + (static_cast<std::size_t>(i) * n1 + k) * n2;
            double pb = 0;
            for (int c = 0; c < 4; ++c) {
                const int l = base[2] + c;
                if (l >= 0 && l < n2) pb += w[2][c] * line[l];
            }
            pa += w[1][b] * pb;
        }
        acc += w[0][a] * pa;
    }
    return acc + f.exterior * (1 - inside);
}

ScalarField shift_field(const ScalarField& f, const GroupElement& y) {
    const GridSpec& g = f.grid;
    require(*y.spec == *g.group, ErrorKind::spec_mismatch, "shift by an element of another group");
    std::vector<double> out(g.size());
    double x[8], xy[8];
    for (std::size_t i = 0; i < out.size(); ++i) {
        g.point(i, x);
        product_raw(*g.group, x, y.coords.data(), xy);
        out[i] = interpolate(f, xy);
    }
    ScalarField r(g, std::move(out), "shift(" + f.provenance + ")");
    const double m = lp_norm(f, 1);
    r.leakage = m > 0 ? std::max(0.0, 1 - lp_norm(r, 1) / m) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------------------------
// Convolution

namespace {

// Linear convolution of two real d-dimensional arrays (last axis fastest) by zero-padded FFT.
// Returns the full array of shape na + nb - 1.
std::vector<double> fft_convolve(const std::vector<double>& a, const std::vector<int>& na,
                                 const std::vector<double>& b, const std::vector<int>& nb, std::vector<int>& nout) {
    const int d = static_cast<int>(na.size());
    std::vector<int> n(d);
    nout.resize(d);
    std::size_t tot = 1;
    for (int j = 0; j < d; ++j) {
        nout[j] = na[j] + nb[j] - 1;
        n[j] = good_fft_size(nout[j]);
        tot *= n[j];
    }
    const std::size_t nc = tot / n[d - 1] * (n[d - 1] / 2 + 1);
    std::vector<double> pa(tot, 0.0), pb(tot, 0.0);
    auto scatter = [&](const std::vector<double>& src, const std::vector<int>& ns, std::vector<double>& dst) {
        std::size_t cnt = src.size();
        for (std::size_t i = 0; i < cnt; ++i) {
            std::size_t r = i, off = 0, mul = 1;
            for (int j = d - 1; j >= 0; --j) {
                off += (r % ns[j]) * mul;
                r /= ns[j];
                mul *= n[j];
            }
            dst[off] = src[i];
        }
    };
    scatter(a, na, pa);
    scatter(b, nb, pb);
    fftw_complex* fa = fftw_alloc_complex(nc);
    fftw_complex* fb = fftw_alloc_complex(nc);
    fftw_plan p1 = plan_r2c(d, n.data(), pa.data(), fa);
    fftw_plan p2 = plan_r2c(d, n.data(), pb.data(), fb);
    fftw_execute(p1);
    fftw_execute(p2);
    for (std::size_t i = 0; i < nc; ++i) {
        const cplx z = cplx(fa[i][0], fa[i][1]) * cplx(fb[i][0], fb[i][1]);
        fa[i][0] = z.real() / tot;
        fa[i][1] = z.imag() / tot;
    }
    fftw_plan p3 = plan_c2r(d, n.data(), fa, pa.data());
    fftw_execute(p3);
    destroy_plan(p1);
    destroy_plan(p2);
    destroy_plan(p3);
    fftw_free(fa);
    fftw_free(fb);
    std::size_t cnt = 1;
    for (int j = 0; j < d; ++j) cnt *= nout[j];
    std::vector<double> out(cnt);
    for (std::size_t i = 0; i < cnt; ++i) {
        std::size_t r = i, off = 0, mul = 1;
        for (int j = d - 1; j >= 0; --j) {
            off += (r % nout[j]) * mul;
            r /= nout[j];
            mul *= n[j];
        }
        out[i] = pa[off];
    }
    return out;
}

// Kernel description on lattice offsets k·h, |k_j| <= K_j (shape 2K+1, centred).
struct OffsetKernel {
    std::vector<int> K;
    std::vector<double> h;
    std::vector<double> values;  // real-space samples (unused for H1 spectral kernels)
};

ScalarField euclidean_convolve(const ScalarField& f, const OffsetKernel& k, const std::string& prov) {
    const GridSpec& g = f.grid;
    const int d = g.dim();
    std::vector<int> nk(d);
    for (int j = 0; j < d; ++j) nk[j] = 2 * k.K[j] + 1;
    std::vector<int> nout;
    auto full = fft_convolve(f.values, g.shape, k.values, nk, nout);
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t r = i, off = 0, mul = 1;
        for (int j = d - 1; j >= 0; --j) {
            off += (r % g.shape[j] + k.K[j]) * mul;
            r /= g.shape[j];
            mul *= nout[j];
        }
        out[i] = full[off] * g.cell_volume();
    }
    return ScalarField(g, std::move(out), prov);
}

// H1: spectral c-lines of the kernel, one per first-layer offset.
using LineSpectrum = std::function<void(int ia, int ib, const std::vector<double>& omega, std::vector<cplx>& out)>;

ScalarField h1_convolve(const ScalarField& f, int Ka, int Kb, double max_c_offset, const LineSpectrum& spec,
                        const std::string& prov) {
    const GridSpec& g = f.grid;
    const int na = g.shape[0], nb = g.shape[1], nc = g.shape[2];
    const double ha = g.spacing(0), hb = g.spacing(1), hc = g.spacing(2);
    const double smax = 0.5 * (g.extents[0] * Kb * hb + g.extents[1] * Ka * ha);
    const int pad = static_cast<int>(std::ceil((max_c_offset + smax) / hc)) + 2;
    const int N = good_fft_size(nc + 2 * pad);
    const int nw = N / 2 + 1;
    std::vector<double> omega(nw);
    for (int k = 0; k < nw; ++k) omega[k] = 2 * kPi * k / (N * hc);

    // Forward transforms of every f line (placed at offset `pad`).
    std::vector<cplx> F(static_cast<std::size_t>(na) * nb * nw);
    std::vector<double> buf(N);
    std::vector<cplx> cb(nw);
    fftw_plan pf = plan_r2c_1d(N, buf.data(), reinterpret_cast<fftw_complex*>(cb.data()));
    fftw_plan pb = plan_c2r_1d(N, reinterpret_cast<fftw_complex*>(cb.data()), buf.data());
    std::vector<char> live(static_cast<std::size_t>(na) * nb, 0);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            std::fill(buf.begin(), buf.end(), 0.0);
            const double* line = f.values.data() + (static_cast<std::size_t>(i) * nb + j) * nc;
            bool any = false;
            for (int l = 0; l < nc; ++l) {
                buf[pad + l] = line[l];
                any = any || line[l] != 0;
            }
            live[static_cast<std::size_t>(i) * nb + j] = any;
            if (!any) continue;
            fftw_execute(pf);
            // Phase so that index 0 corresponds to c = -L_c - pad·h_c.
            std::copy(cb.begin(), cb.end(), F.begin() + (static_cast<std::size_t>(i) * nb + j) * nw);
        }

    const int nka = 2 * Ka + 1, nkb = 2 * Kb + 1;
    std::vector<cplx> spectra(static_cast<std::size_t>(nka) * nkb * nw);
    std::vector<double> peaks(static_cast<std::size_t>(nka) * nkb, 0.0);
    std::vector<cplx> kl(nw);
    double top = 0;
    for (int ia = -Ka; ia <= Ka; ++ia)
        for (int ib = -Kb; ib <= Kb; ++ib) {
            const std::size_t o = static_cast<std::size_t>(ia + Ka) * nkb + (ib + Kb);
            spec(ia, ib, omega, kl);
            for (const auto& z : kl) peaks[o] = std::max(peaks[o], std::abs(z));
            top = std::max(top, peaks[o]);
            std::copy(kl.begin(), kl.end(), spectra.begin() + o * nw);
        }

    std::vector<cplx> acc(static_cast<std::size_t>(na) * nb * nw, cplx(0, 0));
    for (int ia = -Ka; ia <= Ka; ++ia)
        for (int ib = -Kb; ib <= Kb; ++ib) {
            const std::size_t o = static_cast<std::size_t>(ia + Ka) * nkb + (ib + Kb);
            if (peaks[o] <= 1e-12 * top) continue;
            const cplx* kq = spectra.data() + o * nw;
            const double ap = ia * ha, bp = ib * hb;
            for (int i = 0; i < na; ++i) {
                const int si = i - ia;
                if (si < 0 || si >= na) continue;
                const double a = g.coord(0, i);
                for (int j = 0; j < nb; ++j) {
                    const int sj = j - ib;
                    if (sj < 0 || sj >= nb || !live[static_cast<std::size_t>(si) * nb + sj]) continue;
                    const double b = g.coord(1, j);
                    const double s = 0.5 * (a * bp - b * ap);
                    const cplx* fs = F.data() + (static_cast<std::size_t>(si) * nb + sj) * nw;
                    cplx* out = acc.data() + (static_cast<std::size_t>(i) * nb + j) * nw;
                    // e^{-iωs} advanced by multiplication.
                    const cplx step = std::polar(1.0, -omega[1 % nw] * s);
                    cplx rot(1, 0);
                    for (int k = 0; k < nw; ++k) {
                        out[k] += fs[k] * kq[k] * rot;
                        rot *= step;
                    }
                }
            }
        }

    std::vector<double> res(g.size(), 0.0);
    const double scale = ha * hb / N;
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            cplx* a = acc.data() + (static_cast<std::size_t>(i) * nb + j) * nw;
            if (N % 2 == 0) a[nw - 1] = 0;  // Nyquist mode carries no shift information
            std::copy(a, a + nw, cb.begin());
            fftw_execute(pb);
            double* line = res.data() + (static_cast<std::size_t>(i) * nb + j) * nc;
            for (int l = 0; l < nc; ++l) line[l] = buf[pad + l] * scale;
        }
    destroy_plan(pf);
    destroy_plan(pb);
    return ScalarField(g, std::move(res), prov);
}

void finish_leakage(ScalarField& out, double mf, double mg) {
    const double m = mf * mg;
    out.leakage = std::abs(m) > 0 ? std::abs(1 - out.integral() / m) : 0.0;
}

// Resample g onto a centred lattice with the spacing of `like`.
ScalarField resample_centered(const ScalarField& g, const GridSpec& like) {
    const int d = like.dim();
    std::vector<double> L(d);
    std::vector<int> n(d);
    for (int j = 0; j < d; ++j) {
        const double h = like.spacing(j);
        const int K = static_cast<int>(std::ceil(g.grid.extents[j] / h - 1e-9));
        n[j] = 2 * K + 1;
        L[j] = K * h;
    }
    GridSpec gs = GridSpec::make(g.grid.group, L, n);
    if (gs == g.grid) return g;
    std::vector<double> v(gs.size());
    double x[8];
    for (std::size_t i = 0; i < v.size(); ++i) {
        gs.point(i, x);
        v[i] = interpolate(g, x);
    }
    return ScalarField(gs, std::move(v), g.provenance);
}

}  // namespace

ScalarField group_convolve(const ScalarField& f, const ScalarField& g0) {
    require(*f.grid.group == *g0.grid.group, ErrorKind::spec_mismatch, "convolution of fields on different groups");
    const ScalarField g = resample_centered(g0, f.grid);
    const GridSpec& gg = g.grid;
    const int d = gg.dim();
    const std::string prov = "(" + f.provenance + ")*(" + g.provenance + ")";
    ScalarField out;
    if (f.grid.group->is_euclidean()) {
        OffsetKernel k;
        for (int j = 0; j < d; ++j) k.K.push_back(gg.shape[j] / 2);
        k.values = g.values;
        out = euclidean_convolve(f, k, prov);
    } else {
        require(f.grid.group->is_heisenberg(), ErrorKind::capability, "convolution supports R^n and H1");
        const int Ka = gg.shape[0] / 2, Kb = gg.shape[1] / 2, Kc = gg.shape[2] / 2, nc = gg.shape[2];
        const double hc = gg.spacing(2);
        std::vector<double> buf;
        std::vector<cplx> cb;
        fftw_plan plan = nullptr;
        int planned = -1;
        LineSpectrum spec = [&](int ia, int ib, const std::vector<double>& omega, std::vector<cplx>& out_) {
            const int nw = static_cast<int>(omega.size());
            const int Nf = static_cast<int>(std::lround(2 * kPi / (omega[1] * hc)));
            if (planned != Nf) {
                if (plan) destroy_plan(plan);
                buf.assign(Nf, 0.0);
                cb.assign(nw, cplx(0, 0));
                plan = plan_r2c_1d(Nf, buf.data(), reinterpret_cast<fftw_complex*>(cb.data()));
                planned = Nf;
            }
            std::fill(buf.begin(), buf.end(), 0.0);
            const double* line = g.values.data() + (static_cast<std::size_t>(ia + Ka) * gg.shape[1] + (ib + Kb)) * nc;
            for (int l = 0; l < nc; ++l) {
                const int off = l - Kc;
                buf[(off % Nf + Nf) % Nf] += line[l];
            }
            fftw_execute(plan);
            for (int k = 0; k < nw; ++k) out_[k] = cb[k] * hc;
        };
        out = h1_convolve(f, Ka, Kb, Kc * hc, spec, prov);
        if (plan) destroy_plan(plan);
    }
    finish_leakage(out, f.integral(), g.integral());
    return out;
}

/// Partial Fourier transform in c of the H1 heat kernel: ∫ h(t, a, b, c) e^{-iωc} dc.
static double h1_heat_hat(double t, double r2, double w) {
    const double u = std::abs(w) * t;
    if (u < 1e-8) return std::exp(-r2 / (4 * t)) / (4 * kPi * t);
    if (u > 700) return 0.0;
    return u / std::sinh(u) * std::exp(-r2 / (4 * t) * u / std::tanh(u)) / (4 * kPi * t);
}

ScalarField group_convolve(const ScalarField& f, const KernelHandle& k, double t) {
    k.validate();
    require(t > 0, ErrorKind::domain, "convolution needs t > 0");
    require(*f.grid.group == *k.group, ErrorKind::spec_mismatch, "kernel and field on different groups");
    require(k.kind != KernelKind::riesz && k.kind != KernelKind::tilde_riesz, ErrorKind::capability,
            "Riesz kernels are singular on the lattice; use frac_integral");
    const GridSpec& g = f.grid;
    const int d = g.dim();
    const std::string prov = "(" + f.provenance + ")*" + to_string(k.kind) + "(t=" + std::to_string(t) + ")";
    // Offsets never need to exceed the width of the box (f vanishes outside it).
    std::vector<int> K(d);
    for (int j = 0; j < d; ++j) K[j] = g.shape[j] - 1;
    ScalarField out;
    if (g.group->is_euclidean()) {
        if (k.kind == KernelKind::heat) {
            // Heat decays below 1e-8 of its peak beyond 8.6√t.
            for (int j = 0; j < d; ++j)
                K[j] = std::min(K[j], static_cast<int>(std::ceil(8.6 * std::sqrt(t) / g.spacing(j))) + 1);
        }
        OffsetKernel ok;
        ok.K = K;
        std::vector<int> n(d);
        std::size_t tot = 1;
        for (int j = 0; j < d; ++j) tot *= (n[j] = 2 * K[j] + 1);
        ok.values.resize(tot);
        std::vector<double> x(d);
        for (std::size_t i = 0; i < tot; ++i) {
            std::size_t r = i;
            for (int j = d - 1; j >= 0; --j) {
                x[j] = (static_cast<int>(r % n[j]) - K[j]) * g.spacing(j);
                r /= n[j];
            }
            ok.values[i] = kernel_eval(k, t, GroupElement(g.group, x));
        }
        out = euclidean_convolve(f, ok, prov);
        finish_leakage(out, f.integral(), 1.0);
        return out;
    }
    require(g.group->is_heisenberg(), ErrorKind::capability, "convolution supports R^n and H1");
    const double ha = g.spacing(0), hb = g.spacing(1), hc = g.spacing(2);
    int Ka = K[0], Kb = K[1];
    double cmax = 2 * g.extents[2] + g.extents[0] * g.extents[1] * 2;
    if (k.kind == KernelKind::heat) {
        const double R = 8.6 * std::sqrt(t);
        Ka = std::min(Ka, static_cast<int>(std::ceil(R / ha)) + 1);
        Kb = std::min(Kb, static_cast<int>(std::ceil(R / hb)) + 1);
        cmax = std::min(cmax, 14.0 * t);
        LineSpectrum spec = [&](int ia, int ib, const std::vector<double>& omega, std::vector<cplx>& o) {
            const double r2 = std::pow(ia * ha, 2) + std::pow(ib * hb, 2);
            for (std::size_t m = 0; m < omega.size(); ++m) o[m] = h1_heat_hat(t, r2, omega[m]);
        };
        out = h1_convolve(f, Ka, Kb, cmax, spec, prov);
    } else {
        const int Kc = static_cast<int>(std::ceil(cmax / hc));
        std::vector<double> buf;
        std::vector<cplx> cb;
        fftw_plan plan = nullptr;
        int planned = -1;
        LineSpectrum spec = [&](int ia, int ib, const std::vector<double>& omega, std::vector<cplx>& o) {
            const int nw = static_cast<int>(omega.size());
            const int Nf = static_cast<int>(std::lround(2 * kPi / (omega[1] * hc)));
            if (planned != Nf) {
                if (plan) destroy_plan(plan);
                buf.assign(Nf, 0.0);
                cb.assign(nw, cplx(0, 0));
                plan = plan_r2c_1d(Nf, buf.data(), reinterpret_cast<fftw_complex*>(cb.data()));
                planned = Nf;
            }
            std::fill(buf.begin(), buf.end(), 0.0);
            for (int l = -Kc; l <= Kc; ++l) {
                const double v = kernel_eval(k, t, GroupElement(g.group, {ia * ha, ib * hb, l * hc}));
                buf[((l % Nf) + Nf) % Nf] += v;
            }
            fftw_execute(plan);
            for (int m = 0; m < nw; ++m) o[m] = cb[m] * hc;
        };
        out = h1_convolve(f, Ka, Kb, Kc * hc, spec, prov);
        if (plan) destroy_plan(plan);
    }
    finish_leakage(out, f.integral(), 1.0);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Difference operators

std::vector<ScalarField> horizontal_gradient(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const int d = g.dim(), m = g.group->horizontal_dim();
    std::vector<std::vector<double>> out(m, std::vector<double>(g.size(), 0.0));
    std::vector<int> idx(d);
    double x[8];
    for (std::size_t n = 0; n < g.size(); ++n) {
        std::size_t r = n;
        bool edge = false;
        for (int j = d - 1; j >= 0; --j) {
            idx[j] = static_cast<int>(r % g.shape[j]);
            r /= g.shape[j];
            edge = edge || idx[j] == 0 || idx[j] == g.shape[j] - 1;
        }
        if (edge) continue;
        g.point(n, x);
        double D[8];
        for (int j = 0; j < d; ++j)
            D[j] = (f.values[n + g.stride(j)] - f.values[n - g.stride(j)]) / (2 * g.spacing(j));
        if (g.group->is_euclidean()) {
            for (int i = 0; i < m; ++i) out[i][n] = D[i];
        } else {
            out[0][n] = D[0] - 0.5 * x[1] * D[2];
            out[1][n] = D[1] + 0.5 * x[0] * D[2];
        }
    }
    std::vector<ScalarField> res;
    for (int i = 0; i < m; ++i)
        res.emplace_back(g, std::move(out[i]), "X" + std::to_string(i + 1) + "(" + f.provenance + ")");
    return res;
}

ScalarField sublaplacian(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const int d = g.dim();
    std::vector<double> out(g.size(), 0.0);
    std::vector<int> idx(d);
    double x[8];
    const double* v = f.values.data();
    for (std::size_t n = 0; n < g.size(); ++n) {
        std::size_t r = n;
        bool edge = false;
        for (int j = d - 1; j >= 0; --j) {
            idx[j] = static_cast<int>(r % g.shape[j]);
            r /= g.shape[j];
            edge = edge || idx[j] == 0 || idx[j] == g.shape[j] - 1;
        }
        if (edge) continue;
        auto d2 = [&](int j) {
            const std::size_t s = g.stride(j);
            return (v[n + s] - 2 * v[n] + v[n - s]) / (g.spacing(j) * g.spacing(j));
        };
        if (g.group->is_euclidean()) {
            double acc = 0;
            for (int j = 0; j < d; ++j) acc += d2(j);
            out[n] = acc;
            continue;
        }
        g.point(n, x);
        const std::size_t sa = g.stride(0), sb = g.stride(1), sc = g.stride(2);
        const double ha = g.spacing(0), hb = g.spacing(1), hc = g.spacing(2);
        const double fac = (v[n + sa + sc] - v[n + sa - sc] - v[n - sa + sc] + v[n - sa - sc]) / (4 * ha * hc);
        const double fbc = (v[n + sb + sc] - v[n + sb - sc] - v[n - sb + sc] + v[n - sb - sc]) / (4 * hb * hc);
        const double a = x[0], b = x[1];
        out[n] = d2(0) + d2(1) + 0.25 * (a * a + b * b) * d2(2) - b * fac + a * fbc;
    }
    return ScalarField(g, std::move(out), "sublaplacian(" + f.provenance + ")");
}

// ---------------------------------------------------------------------------------------------
// I/O

namespace {

template <class T>
void put(std::ostream& o, T v) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    o.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char b[sizeof(T)];
    in.read(reinterpret_cast<char*>(b), sizeof(T));
    if (!in) fail(ErrorKind::io, "truncated CGF1 file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void save_field(const ScalarField& f, const std::string& path) {
    std::ofstream o(path, std::ios::binary);
    if (!o) fail(ErrorKind::io, "cannot open " + path + " for writing");
    o.write("CGF1", 4);
    const std::string& name = f.grid.group->name;
    put<std::uint32_t>(o, static_cast<std::uint32_t>(name.size()));
    o.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(o, static_cast<std::uint32_t>(f.grid.group->layer_dims.size()));
    for (int m : f.grid.group->layer_dims) put<std::uint32_t>(o, static_cast<std::uint32_t>(m));
    put<std::uint32_t>(o, static_cast<std::uint32_t>(f.grid.dim()));
    for (int n : f.grid.shape) put<std::uint32_t>(o, static_cast<std::uint32_t>(n));
    for (double L : f.grid.extents) put<double>(o, L);
    for (double v : f.values) put<double>(o, v);
    if (!o) fail(ErrorKind::io, "write failed for " + path);
}

ScalarField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CGF1", 4) != 0) fail(ErrorKind::data, path + " is not a CGF1 file");
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    auto group = make_group(name);
    const auto nl = get<std::uint32_t>(in);
    std::vector<int> layers(nl);
    for (auto& m : layers) m = static_cast<int>(get<std::uint32_t>(in));
    require(layers == group->layer_dims, ErrorKind::data, "layer dims in " + path + " do not match " + name);
    const auto d = get<std::uint32_t>(in);
    std::vector<int> shape(d);
    for (auto& n : shape) n = static_cast<int>(get<std::uint32_t>(in));
    std::vector<double> ext(d);
    for (auto& L : ext) L = get<double>(in);
    GridSpec g = GridSpec::make(group, ext, shape);
    std::vector<double> v(g.size());
    for (auto& x : v) x = get<double>(in);
    return ScalarField(g, std::move(v), "file:" + path);
}

void write_field_csv(const ScalarField& f, const std::string& path, int ax0, int ax1) {
    std::ofstream o(path);
    if (!o) fail(ErrorKind::io, "cannot open " + path + " for writing");
    o.precision(17);
    const GridSpec& g = f.grid;
    const int d = g.dim();
    std::vector<int> mid(d);
    for (int j = 0; j < d; ++j) mid[j] = (g.shape[j] - 1) / 2;
    auto at = [&](std::vector<int> idx) {
        std::size_t n = 0;
        for (int j = 0; j < d; ++j) n += idx[j] * g.stride(j);
        return f.values[n];
    };
    if (d == 1) {
        o << "x0,value\n";
        for (int i = 0; i < g.shape[0]; ++i) o << g.coord(0, i) << ',' << f.values[i] << '\n';
        return;
    }
    require(ax0 >= 0 && ax1 >= 0 && ax0 < d && ax1 < d && ax0 != ax1, ErrorKind::usage, "bad slice axes");
    o << 'x' << ax0 << ",x" << ax1 << ",value\n";
    std::vector<int> idx = mid;
    for (int i = 0; i < g.shape[ax0]; ++i)
        for (int k = 0; k < g.shape[ax1]; ++k) {
            idx[ax0] = i;
            idx[ax1] = k;
            o << g.coord(ax0, i) << ',' << g.coord(ax1, k) << ',' << at(idx) << '\n';
        }
}

}  // namespace chg
