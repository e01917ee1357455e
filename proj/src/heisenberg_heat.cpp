#include "chg/heisenberg_heat.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

#include <Eigen/Dense>

#include "chg/error.hpp"
#include "chg/numerics.hpp"

namespace chg {

using cd = std::complex<double>;

namespace {

// log(u / sinh u) - ρ u coth u for Re u >= 0.
cd log_integrand(cd u, double rho) {
    if (std::abs(u) < 1e-4) {
        const cd u2 = u * u;
        return -u2 / 6.0 - rho * (1.0 + u2 / 3.0);
    }
    if (u.real() > 18.0) {
        const cd e = std::exp(-2.0 * u);
        const cd log_sinh = u - std::log(2.0) + std::log(1.0 - e);
        const cd coth = (1.0 + e) / (1.0 - e);
        return std::log(u) - log_sinh - rho * u * coth;
    }
    return std::log(u / std::sinh(u)) - rho * u * std::cosh(u) / std::sinh(u);
}

// Exponent along the imaginary axis: |integrand at x = 0| on the line Im u = θ is e^{-φ(θ)}.
double saddle_phi(double th, double k, double rho) {
    if (th < 1e-6) return rho * (1 - th * th / 3) - th * th / 6 + th * k;
    return th * k + rho * th / std::tan(th) + std::log(std::sin(th) / th);
}

}  // namespace

double h1_heat_quadrature(double t, double r2, double c) {
    require(t > 0, ErrorKind::domain, "heat kernel needs t > 0");
    const double k = std::abs(c) / t, rho = r2 / (4 * t);
    const double theta = k == 0 ? 0.0 : golden_max([&](double th) { return saddle_phi(th, k, rho); }, 0.0,
                                                   kPi * (1 - 1e-12), 1e-13);
    const double shift = -saddle_phi(theta, k, rho);
    // J = e^{-θk} Re Σ_n h e^{i x_n k} F(x_n + iθ) over the full line (conjugate symmetric).
    auto term = [&](double x) {
        const cd u(x, theta);
        return std::exp(cd(0, x * k) - theta * k + log_integrand(u, rho) - shift).real();
    };
    auto trapezoid = [&](double h, int offset, int stride) {
        double s = 0;
        int quiet = 0;
        for (long n = offset; ; n += stride) {
            const double x = n * h;
            const double v = term(x);
            s += v;
            if (std::abs(v) < 1e-18 * (1 + std::abs(s))) {
                if (++quiet > 8 && x > 1) break;
            } else {
                quiet = 0;
            }
            if (x > 800) break;
        }
        return s;
    };
    double h = std::min({0.25, (kPi - theta) / 5, 0.6 / std::sqrt(1 + rho)});
    // Sum over n >= 1 at spacing h, refined by halving until the trapezoid value settles.
    double odd_sum = trapezoid(h, 1, 1);
    double value = h * (term(0) + 2 * odd_sum);
    for (int it = 0; it < 8; ++it) {
        const double hn = h / 2;
        const double extra = trapezoid(hn, 1, 2);
        const double sum_n = odd_sum + extra;
        const double vn = hn * (term(0) + 2 * sum_n);
        const bool done = std::abs(vn - value) <= 1e-13 * std::abs(vn);
        value = vn;
        odd_sum = sum_n;
        h = hn;
        if (done) break;
    }
    const double J = 0.5 * value * std::exp(shift);
    return std::max(J, 0.0) / (4 * kPi * kPi * t * t);
}

// ---------------------------------------------------------------------------------------------
// Grid PDE

namespace {

// Faces from 0: spacing d0 up to x1, then growing geometrically until x_max.
std::vector<double> stretched_faces(double d0, double x1, double growth, double x_max) {
    std::vector<double> f{0.0};
    double d = d0;
    while (f.back() < x_max) {
        if (f.back() >= x1) d *= 1 + growth;
        f.push_back(f.back() + d);
    }
    return f;
}

// Thomas algorithm for a tridiagonal system, in place on rhs. lo[0] and up[n-1] unused.
void thomas(const double* lo, const double* di, const double* up, double* rhs, double* scratch, int n) {
    double beta = di[0];
    rhs[0] /= beta;
    for (int i = 1; i < n; ++i) {
        scratch[i] = up[i - 1] / beta;
        beta = di[i] - lo[i] * scratch[i];
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / beta;
    }
    for (int i = n - 2; i >= 0; --i) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

// Quadratic Lagrange weights through nodes (x0, x1, x2) at x.
void lagrange3(const double* xs, double x, double* w) {
    w[0] = (x - xs[1]) * (x - xs[2]) / ((xs[0] - xs[1]) * (xs[0] - xs[2]));
    w[1] = (x - xs[0]) * (x - xs[2]) / ((xs[1] - xs[0]) * (xs[1] - xs[2]));
    w[2] = (x - xs[0]) * (x - xs[1]) / ((xs[2] - xs[0]) * (xs[2] - xs[1]));
}

}  // namespace

H1HeatPDE::H1HeatPDE(const Options& o) : opt_(o) {
    require(o.dr0 > 0 && o.dc0 > 0 && o.growth >= 0 && o.t_start > 0 && o.step_ratio > 0, ErrorKind::domain,
            "invalid PDE grid options");
    rf_ = stretched_faces(o.dr0, o.r_uniform, o.growth, o.r_max);
    cf_ = stretched_faces(o.dc0, o.c_uniform, o.growth, o.c_max);
    for (std::size_t i = 0; i + 1 < rf_.size(); ++i) r_.push_back(0.5 * (rf_[i] + rf_[i + 1]));
    for (std::size_t j = 0; j + 1 < cf_.size(); ++j) c_.push_back(0.5 * (cf_[j] + cf_[j + 1]));
}

void H1HeatPDE::run(const std::vector<double>& times) {
    require(!times.empty() && std::is_sorted(times.begin(), times.end()) && times.front() > opt_.t_start,
            ErrorKind::domain, "PDE output times must be sorted and exceed the start time");
    const int nr = static_cast<int>(r_.size()), nc = static_cast<int>(c_.size());
    // Finite-volume couplings. A: (1/r)∂_r(r∂_r) with volume r dr; B: (r²/4)∂_cc.
    std::vector<double> alo(nr, 0), ahi(nr, 0), blo(nc, 0), bhi(nc, 0), q(nr);
    for (int i = 0; i < nr; ++i) {
        const double vol = 0.5 * (rf_[i + 1] * rf_[i + 1] - rf_[i] * rf_[i]);
        if (i > 0) alo[i] = rf_[i] / (r_[i] - r_[i - 1]) / vol;
        const double dnext = i + 1 < nr ? r_[i + 1] - r_[i] : rf_[i + 1] - r_[i];
        ahi[i] = rf_[i + 1] / dnext / vol;
        q[i] = 0.25 * r_[i] * r_[i];
    }
    for (int j = 0; j < nc; ++j) {
        const double w = cf_[j + 1] - cf_[j];
        if (j > 0) blo[j] = 1 / ((c_[j] - c_[j - 1]) * w);
        const double dnext = j + 1 < nc ? c_[j + 1] - c_[j] : cf_[j + 1] - c_[j];
        bhi[j] = 1 / (dnext * w);
    }

    // Smoothed point mass: exact horizontal Gaussian in r, one cell in c.
    std::vector<double> u(static_cast<std::size_t>(nr) * nc, 0.0);
    {
        double m = 0;
        for (int i = 0; i < nr; ++i) {
            const double g = std::exp(-r_[i] * r_[i] / (4 * opt_.t_start));
            u[static_cast<std::size_t>(i) * nc] = g;
            m += g * 0.5 * (rf_[i + 1] * rf_[i + 1] - rf_[i] * rf_[i]) * 2 * kPi * 2 * (cf_[1] - cf_[0]);
        }
        for (int i = 0; i < nr; ++i) u[static_cast<std::size_t>(i) * nc] /= m;
    }

    std::vector<double> tmp(u.size());
    std::vector<double> rowlo(nc), rowdi(nc), rowup(nc), rowscr(nc);
    auto apply_A = [&](const std::vector<double>& in, std::vector<double>& out, double f) {
        // out = in + f·A in
        for (int i = 0; i < nr; ++i) {
            const double* a = &in[static_cast<std::size_t>(i) * nc];
            const double* am = i > 0 ? a - nc : nullptr;
            const double* ap = i + 1 < nr ? a + nc : nullptr;
            double* o = &out[static_cast<std::size_t>(i) * nc];
            for (int j = 0; j < nc; ++j) {
                double d = -(alo[i] + ahi[i]) * a[j];
                if (am) d += alo[i] * am[j];
                if (ap) d += ahi[i] * ap[j];
                o[j] = a[j] + f * d;
            }
        }
    };
    auto apply_B = [&](const std::vector<double>& in, std::vector<double>& out, double f) {
        for (int i = 0; i < nr; ++i) {
            const double* a = &in[static_cast<std::size_t>(i) * nc];
            double* o = &out[static_cast<std::size_t>(i) * nc];
            const double fq = f * q[i];
            for (int j = 0; j < nc; ++j) {
                double d = -(blo[j] + bhi[j]) * a[j];
                if (j > 0) d += blo[j] * a[j - 1];
                if (j + 1 < nc) d += bhi[j] * a[j + 1];
                o[j] = a[j] + fq * d;
            }
        }
    };
    // Solve (I - f A) x = rhs for all columns at once (row sweep over i, vectorised over j).
    auto solve_A = [&](std::vector<double>& x, double f) {
        // Coefficients are j-independent, so the elimination factors are shared by all columns.
        std::vector<double> bet(nr), gam(nr);
        bet[0] = 1 + f * (alo[0] + ahi[0]);
        for (int i = 1; i < nr; ++i) {
            gam[i] = -f * ahi[i - 1] / bet[i - 1];
            bet[i] = 1 + f * (alo[i] + ahi[i]) - (-f * alo[i]) * gam[i];
        }
        for (int j = 0; j < nc; ++j) x[j] /= bet[0];
        for (int i = 1; i < nr; ++i) {
            double* xi = &x[static_cast<std::size_t>(i) * nc];
            const double* xm = xi - nc;
            const double l = -f * alo[i];
            for (int j = 0; j < nc; ++j) xi[j] = (xi[j] - l * xm[j]) / bet[i];
        }
        for (int i = nr - 2; i >= 0; --i) {
            double* xi = &x[static_cast<std::size_t>(i) * nc];
            const double* xp = xi + nc;
            for (int j = 0; j < nc; ++j) xi[j] -= gam[i + 1] * xp[j];
        }
    };
    auto solve_B = [&](std::vector<double>& x, double f) {
        for (int i = 0; i < nr; ++i) {
            const double fq = f * q[i];
            for (int j = 0; j < nc; ++j) {
                rowlo[j] = -fq * blo[j];
                rowup[j] = -fq * bhi[j];
                rowdi[j] = 1 + fq * (blo[j] + bhi[j]);
            }
            thomas(rowlo.data(), rowdi.data(), rowup.data(), &x[static_cast<std::size_t>(i) * nc], rowscr.data(), nc);
        }
    };

    double t = opt_.t_start;
    int steps = 0;
    times_.clear();
    slices_.clear();
    for (double target : times) {
        while (t < target * (1 - 1e-14)) {
            double dt = std::min(opt_.step_ratio * t, target - t);
            if (steps < 4) {
                // Implicit-Euler start-up damps the stiff modes of the initial point mass.
                dt = std::min(dt, 0.25 * opt_.step_ratio * t);
                solve_A(u, dt);
                solve_B(u, dt);
            } else {
                apply_B(u, tmp, 0.5 * dt);
                solve_A(tmp, 0.5 * dt);
                apply_A(tmp, u, 0.5 * dt);
                solve_B(u, 0.5 * dt);
            }
            t += dt;
            ++steps;
        }
        times_.push_back(target);
        slices_.push_back(u);
    }
    steps_ = steps;
}

int H1HeatPDE::slice_index(double t) const {
    for (std::size_t k = 0; k < times_.size(); ++k)
        if (std::abs(times_[k] - t) <= 1e-12 * t) return static_cast<int>(k);
    fail(ErrorKind::usage, "PDE slice not recorded for requested time");
}

double H1HeatPDE::eval(double t, double r2, double c) const {
    const auto& u = slices_[slice_index(t)];
    const int nr = static_cast<int>(r_.size()), nc = static_cast<int>(c_.size());
    const double r = std::sqrt(r2), ac = std::abs(c);
    require(r < rf_.back() && ac < cf_.back(), ErrorKind::domain, "point outside the PDE grid");
    // Three-node stencils; reflections across r = 0 and c = 0 supply the ghost nodes.
    auto stencil = [](const std::vector<double>& xs, double x, int n, int* idx, double* nodes) {
        int k = static_cast<int>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
        k = std::clamp(k, 0, n - 2);
        if (k > 0 && x - xs[k - 1] < xs[k] - x) --k;
        int s = k - 1;
        s = std::min(s, n - 3);
        for (int m = 0; m < 3; ++m) {
            const int id = s + m;
            idx[m] = id < 0 ? -id - 1 : id;
            nodes[m] = id < 0 ? -xs[-id - 1] : xs[id];
        }
    };
    int ir[3], ic[3];
    double xr[3], xc[3], wr[3], wc[3];
    stencil(r_, r, nr, ir, xr);
    stencil(c_, ac, nc, ic, xc);
    lagrange3(xr, r, wr);
    lagrange3(xc, ac, wc);
    double lv = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            const double v = u[static_cast<std::size_t>(ir[a]) * nc + ic[b]];
            lv += wr[a] * wc[b] * std::log(std::max(v, 1e-300));
        }
    return std::exp(lv);
}

double H1HeatPDE::mass(double t) const {
    const auto& u = slices_[slice_index(t)];
    const int nc = static_cast<int>(c_.size());
    double m = 0;
    for (std::size_t i = 0; i < r_.size(); ++i) {
        const double vol = 0.5 * (rf_[i + 1] * rf_[i + 1] - rf_[i] * rf_[i]) * 2 * kPi;
        for (int j = 0; j < nc; ++j) m += u[i * nc + j] * vol * 2 * (cf_[j + 1] - cf_[j]);
    }
    return m;
}

// ---------------------------------------------------------------------------------------------
// Monte Carlo

H1HeatMonteCarlo::H1HeatMonteCarlo(const Options& o) : opt_(o) {
    require(o.paths > 0 && o.modes > 0 && o.pilot > 1, ErrorKind::domain, "invalid Monte Carlo options");
}

std::vector<H1HeatMonteCarlo::Estimate> H1HeatMonteCarlo::eval_batch(
    double t, const std::vector<std::pair<double, double>>& r2c) const {
    require(t > 0, ErrorKind::domain, "heat kernel needs t > 0");
    const double tau = 2 * t;  // SDE time
    const int K = opt_.modes;
    // Bridge A(s) = Σ z_k √(2τ)/(kπ) sin(kπs/τ):  ∫A = Σ e_k z_k,  ∫A² = Σ d_k z_k².
    // The conditional covariance determinant is τ·zᵀMz with M = diag(d) − e eᵀ/τ (τ × variance of A),
    // so sampling runs in the eigenbasis of M and the tilt acts on zᵀMz.
    Eigen::VectorXd d(K), e(K);
    for (int k = 1; k <= K; ++k) {
        d[k - 1] = tau * tau / (k * k * kPi * kPi);
        e[k - 1] = (k % 2 == 1) ? 2 * std::sqrt(2 * tau) * tau / (k * k * kPi * kPi) : 0.0;
    }
    Eigen::MatrixXd M = Eigen::MatrixXd(d.asDiagonal()) - e * e.transpose() / tau;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd ev = eig.eigenvectors().transpose() * e;  // ∫A = Σ ev_k y_k
    double tail1 = tau * tau / 6, tail2 = 0;
    for (int k = 1; k <= K; ++k) tail1 -= d[k - 1];
    for (int k = K + 1; k < 200000; ++k) tail2 += std::pow(tau * tau / (double(k) * k * kPi * kPi), 2);

    // Tilt family q(y) ∝ φ(y) exp(θ·yᵀΛy + β·∫A): θ = g·θ_max with θ_max = 1/(2 λ_max), and β a shift of
    // ∫A by u standard deviations. Each point picks the pair with the smallest pilot variance.
    const std::vector<double> gs{0, 0.2, 0.4, 0.6, 0.75, 0.85, 0.9, 0.94, 0.97, 0.985, 0.993};
    const std::vector<double> us{-3, -2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2, 3};
    const double lam_max = lam.maxCoeff();
    struct Tilt {
        double theta, beta, logz, tail;
        std::vector<double> sig, mu;
    };
    std::vector<Tilt> tilts;
    for (double g : gs)
        for (double u : us) {
            Tilt T;
            T.theta = g / (2 * lam_max);
            T.sig.resize(K);
            T.mu.resize(K);
            double logsig = 0, var1 = 0;
            for (int k = 0; k < K; ++k) {
                T.sig[k] = 1 / std::sqrt(1 - 2 * T.theta * lam[k]);
                logsig += std::log(T.sig[k]);
                var1 += T.sig[k] * T.sig[k] * ev[k] * ev[k];
            }
            T.beta = u / std::sqrt(var1);
            for (int k = 0; k < K; ++k) T.mu[k] = T.sig[k] * T.sig[k] * T.beta * ev[k];
            T.logz = logsig + 0.5 * T.beta * T.beta * var1;
            T.tail = tail1 + 2 * T.theta * tail2;  // mean of the truncated modes under the tilt
            tilts.push_back(std::move(T));
        }
    const int G = static_cast<int>(tilts.size());
    const std::size_t P = r2c.size();
    const double pref = 1 / std::sqrt(2 * kPi * tau);
    std::vector<double> z(K);

    // Weighted conditional density of one path under tilt T at the listed points (into out).
    auto path_values = [&](const Tilt& T, const std::vector<std::size_t>& pts, std::vector<double>& out) {
        double m1 = 0, q = 0;
        for (int k = 0; k < K; ++k) {
            const double y = T.sig[k] * z[k] + T.mu[k];
            m1 += ev[k] * y;
            q += lam[k] * y * y;
        }
        const double logw = T.logz - T.theta * q - T.beta * m1;
        const double det = tau * (q + T.tail);
        const double m2 = (det + m1 * m1) / tau;
        const double norm = 1 / (2 * kPi * std::sqrt(det));
        for (std::size_t p : pts) {
            const double r2 = r2c[p].first, c = r2c[p].second, r = std::sqrt(r2);
            const double quad = (m2 * r2 - 2 * m1 * r * c + tau * c * c) / det;
            out[p] = norm * std::exp(logw - 0.5 * quad);
        }
    };

    const std::uint64_t batch = batches_++;
    CounterRng rng(opt_.seed, 2 * batch);
    CounterRng rng_pilot(opt_.seed, 2 * batch + 1);
    auto draw = [&](const CounterRng& g, std::int64_t path) {
        for (int k = 0; k < K; ++k) z[k] = g.normal(static_cast<std::uint64_t>(path) * K + k);
    };

    // Pilot: pick the tilt with the smallest relative variance per point.
    std::vector<std::size_t> all(P);
    for (std::size_t p = 0; p < P; ++p) all[p] = p;
    std::vector<std::vector<double>> s1(G, std::vector<double>(P, 0)), s2 = s1;
    std::vector<double> vals(P);
    for (int n = 0; n < opt_.pilot; ++n) {
        draw(rng_pilot, n);
        for (int g = 0; g < G; ++g) {
            path_values(tilts[g], all, vals);
            for (std::size_t p = 0; p < P; ++p) {
                s1[g][p] += vals[p];
                s2[g][p] += vals[p] * vals[p];
            }
        }
    }
    std::vector<int> choice(P, 0);
    for (std::size_t p = 0; p < P; ++p) {
        double best = std::numeric_limits<double>::infinity();
        for (int g = 0; g < G; ++g) {
            const double m = s1[g][p] / opt_.pilot;
            if (!(m > 0)) continue;
            const double rel = s2[g][p] / opt_.pilot / (m * m) - 1;
            if (rel < best) {
                best = rel;
                choice[p] = g;
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups(G);
    for (std::size_t p = 0; p < P; ++p) groups[choice[p]].push_back(p);

    std::vector<double> sum(P, 0), sum2(P, 0);
    for (std::int64_t n = 0; n < opt_.paths; ++n) {
        draw(rng, n);
        for (int g = 0; g < G; ++g) {
            if (groups[g].empty()) continue;
            path_values(tilts[g], groups[g], vals);
            for (std::size_t p : groups[g]) {
                sum[p] += vals[p];
                sum2[p] += vals[p] * vals[p];
            }
        }
    }
    paths_used_ += opt_.paths + opt_.pilot;
    std::vector<Estimate> out(P);
    const double N = static_cast<double>(opt_.paths);
    for (std::size_t p = 0; p < P; ++p) {
        const double m = sum[p] / N;
        const double var = std::max(0.0, sum2[p] / N - m * m);
        out[p] = {pref * m, pref * std::sqrt(var / N), tilts[choice[p]].theta};
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Memo table of h(1, r, c)

namespace {
constexpr double kTabR = 16.0, kTabC = 40.0, kTabStep = 0.1;
}

H1HeatTable::H1HeatTable() : dr_(kTabStep), dc_(kTabStep) {
    nr_ = static_cast<int>(std::round(kTabR / dr_)) + 1;
    nc_ = static_cast<int>(std::round(kTabC / dc_)) + 1;
    logv_.resize(static_cast<std::size_t>(nr_) * nc_);
    for (int i = 0; i < nr_; ++i)
        for (int j = 0; j < nc_; ++j) {
            const double r = i * dr_, c = j * dc_;
            logv_[static_cast<std::size_t>(i) * nc_ + j] = std::log(h1_heat_quadrature(1.0, r * r, c));
        }
}

std::shared_ptr<const H1HeatTable> H1HeatTable::instance() {
    static std::once_flag once;
    static std::shared_ptr<const H1HeatTable> tab;
    std::call_once(once, [] { tab = std::shared_ptr<const H1HeatTable>(new H1HeatTable()); });
    return tab;
}

double H1HeatTable::eval(double t, double r2, double c) const {
    require(t > 0, ErrorKind::domain, "heat kernel needs t > 0");
    const double r = std::sqrt(r2 / t), ac = std::abs(c) / t;
    if (r > kTabR - 2 * dr_ || ac > kTabC - 2 * dc_) return h1_heat_quadrature(t, r2, c);
    // Cubic Lagrange in each direction on log h, mirrored across r = 0 and c = 0.
    auto weights = [](double x, double h, int n, int* idx, double* w) {
        const int k = static_cast<int>(std::floor(x / h));
        const double f = x / h - k;
        for (int m = 0; m < 4; ++m) {
            const int id = k - 1 + m;
            idx[m] = std::min(std::abs(id), n - 1);
        }
        w[0] = -f * (f - 1) * (f - 2) / 6;
        w[1] = (f + 1) * (f - 1) * (f - 2) / 2;
        w[2] = -(f + 1) * f * (f - 2) / 2;
        w[3] = (f + 1) * f * (f - 1) / 6;
    };
    int ir[4], ic[4];
    double wr[4], wc[4];
    weights(r, dr_, nr_, ir, wr);
    weights(ac, dc_, nc_, ic, wc);
    double lv = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) lv += wr[a] * wc[b] * logv_[static_cast<std::size_t>(ir[a]) * nc_ + ic[b]];
    return std::exp(lv) / (t * t);
}

}  // namespace chg
