#include <doctest.h>

#include <cmath>

#include "chg/error.hpp"
#include "chg/numerics.hpp"
#include "chg/spaces.hpp"

using namespace chg;

namespace {

FieldFunction fn_at(const GridSpec& g, const std::string& id, double lambda = 1) {
    FieldFunction fn;
    fn.id = id;
    fn.lambda = lambda;
    fn.center.assign(g.dim(), 0.0);
    if (id == "log_trunc") {
        fn.sigma = 2;
        fn.param = 3;
    }
    if (id == "two_bump") fn.param = 1.2;
    return fn;
}

// f∘δ_λ sampled on the dilated lattice (identical samples, rescaled coordinates).
ScalarField dilate_exact(const FieldFunction& fn, const GridSpec& g, double lambda) {
    FieldFunction f2 = fn;
    f2.lambda *= lambda;
    const GridSpec gd = g.dilated(lambda);
    for (int j = 0; j < gd.dim(); ++j) f2.center[j] /= std::pow(lambda, gd.group->degree(j));
    return sample_field(f2, gd);
}

// ∫_ℝ |e^{iy} − 1|² |y|^{−1−2σ} dy.
double difference_symbol(double sigma) { return 2 * M_PI / (std::tgamma(1 + 2 * sigma) * std::sin(M_PI * sigma)); }

// 2^{1−α}/Γ(α) z^α K_α(z): the Fourier multiplier of the α-Poisson kernel at z = t|ξ|.
double poisson_symbol(double a, double z) {
    return std::pow(2.0, 1 - a) / std::tgamma(a) * std::pow(z, a) * std::cyl_bessel_k(a, z);
}

// ∫_0^∞ g(z) dz/z by the substitution z = e^u on a wide uniform grid.
template <class F>
double log_integral(F&& g, double lo = -30, double hi = 6) {
    const int n = 20000;
    const double h = (hi - lo) / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) s += (i == 0 || i == n ? 0.5 : 1) * g(std::exp(lo + i * h));
    return s * h;
}

}  // namespace

TEST_CASE("panel composition") {
    auto g = make_group("R2");
    auto panel = standard_panel(*g);
    CHECK(panel.size() == 20);
    int logs = 0, shifted = 0;
    for (const auto& fn : panel) {
        logs += fn.id == "log_trunc";
        shifted += fn.center[0] != 0;
    }
    CHECK(logs == 1);
    CHECK(shifted == 8);
    CHECK(standard_panel(*g, true).size() == 4);
}

TEST_CASE("log-scale integral of a power bump") {
    // g(t) = t²/(1+t²)³ has ∫ g dt/t = 1/4.
    const auto t = log_space(1e-2, 1e2, 200);
    std::vector<double> g;
    for (double x : t) g.push_back(x * x / std::pow(1 + x * x, 3));
    double share = 0;
    CHECK(log_scale_integral(t, g, 2, &share) == doctest::Approx(0.25).epsilon(2e-4));
    CHECK(share < 1e-3);
}

TEST_CASE("direct Besov seminorm: Fourier oracle, zero, homogeneity, scaling") {
    const auto grid = GridSpec::standard("R1");
    const auto f = sample_field(fn_at(grid, "gaussian"), grid);
    SeminormParams p;
    // ∫∫|f(x+y) − f(x)|²|y|^{−2} = ∫|f̂|²|ξ| dξ = 2π for e^{−x²}.
    const auto b = besov_direct(f, p);
    CHECK(b.value == doctest::Approx(std::sqrt(2 * M_PI)).epsilon(0.03));
    CHECK(std::abs(b.value - std::sqrt(2 * M_PI)) < 1e-3);
    CHECK(besov_direct(ScalarField::zeros(grid), p).value == 0);
    CHECK(besov_direct(-3.0 * f, p).value == doctest::Approx(3 * b.value).epsilon(1e-10));

    // Same lattice, f∘δ₂: λ^{s − Q/p} = 1 at s = ½, p = 2; check s = 0.3, p = 3 as well.
    const auto f2 = sample_field(fn_at(grid, "gaussian", 2), grid);
    CHECK(besov_direct(f2, p).value / b.value == doctest::Approx(1).epsilon(0.03));
    p.s = 0.3;
    p.p = 3;
    p.q = 1.5;
    const double r = besov_direct(f2, p).value / besov_direct(f, p).value;
    CHECK(r == doctest::Approx(std::pow(2.0, 0.3 - 1.0 / 3)).epsilon(0.03));
    // p = ∞ is finite and bounded by 2‖f‖_∞ per shell.
    p.p = INFINITY;
    CHECK(std::isfinite(besov_direct(f, p).value));
}

TEST_CASE("direct Besov seminorm on R2 and H1 obeys the dilation law") {
    for (std::string G : {"R2", "H1"}) {
        CAPTURE(G);
        const auto grid = G == "R2" ? GridSpec::make(make_group("R2"), {6, 6}, {61, 61})
                                    : GridSpec::make(make_group("H1"), {4, 4, 8}, {33, 33, 33});
        const auto fn = fn_at(grid, "gaussian");
        SeminormParams p;
        p.s = 0.4;
        const auto base = besov_direct(sample_field(fn, grid), p).value;
        auto f2 = fn;
        f2.lambda = 0.75;
        const double Q = grid.group->Q;
        const double v = besov_direct(sample_field(f2, grid), p).value;
        CHECK(v / base == doctest::Approx(std::pow(0.75, 0.4 - Q / 2)).epsilon(0.03));
    }
}

TEST_CASE("heat Besov seminorm: Fourier ratio oracle and dilation drift on R1") {
    const auto grid = GridSpec::standard("R1");
    for (double a : {0.4, 0.6})
        for (double s : {0.4, 0.6}) {
            CAPTURE(a);
            CAPTURE(s);
            // ∫ t^{2−s}|ξ|^{4α}e^{−2t|ξ|^{2α}} dt/t = Γ(2−s)2^{s−2}|ξ|^{2αs}.
            const double oracle = std::sqrt(std::tgamma(2 - s) * std::pow(2.0, s - 2) / difference_symbol(a * s));
            double lo = INFINITY, hi = 0;
            for (const auto& id : {"gaussian", "bump", "log_trunc"})
                for (double lam : {0.5, 1.0, 2.0}) {
                    const auto f = dilate_exact(fn_at(grid, id), grid, lam);
                    SeminormParams ph;
                    ph.s = s;
                    ph.alpha = a;
                    ph.variant = BesovVariant::heat_dt;
                    SeminormParams pd;
                    pd.s = a * s;
                    const double r = besov(f, ph).value / besov(f, pd).value;
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                }
            CHECK(lo == doctest::Approx(oracle).epsilon(0.02));
            CHECK(hi / lo - 1 < 0.05);
        }
    SeminormParams ph;
    ph.variant = BesovVariant::heat_dt;
    CHECK(besov(ScalarField::zeros(grid), ph).value == 0);
}

TEST_CASE("Poisson Besov variants: Fourier ratio oracles on R1, range gating") {
    const auto grid = GridSpec::standard("R1");
    const double a = 0.5, s = 0.4;
    const double D = difference_symbol(s);
    // Squared multipliers, all ∝ |ξ|^{2s}: z^{2−2s}|m|², z^{2−2s}|m′|², z^{4−2s}|m|².
    auto dm = [&](double z) { return -std::pow(2.0, 1 - a) / std::tgamma(a) * std::pow(z, a) * std::cyl_bessel_k(1 - a, z); };
    const double w_grad = log_integral([&](double z) { return std::pow(z, 2 - 2 * s) * std::pow(poisson_symbol(a, z), 2); });
    const double w_dt = log_integral([&](double z) { return std::pow(z, 2 - 2 * s) * std::pow(dm(z), 2); });
    const double w_lap = log_integral([&](double z) { return std::pow(z, 4 - 2 * s) * std::pow(poisson_symbol(a, z), 2); });
    const std::vector<std::pair<BesovVariant, double>> cases = {
        {BesovVariant::poisson_grad, std::sqrt(w_grad / D)},
        {BesovVariant::poisson_dt, std::sqrt(w_dt / D)},
        {BesovVariant::poisson_lap, std::sqrt(w_lap / D)}};
    for (const auto& id : {"gaussian", "bump"}) {
        const auto f = sample_field(fn_at(grid, id), grid);
        SeminormParams pd;
        pd.s = s;
        const double direct = besov(f, pd).value;
        for (const auto& [v, oracle] : cases) {
            CAPTURE(to_string(v));
            SeminormParams p;
            p.s = s;
            p.alpha = a;
            p.variant = v;
            CHECK(besov(f, p).value / direct == doctest::Approx(oracle).epsilon(0.03));
        }
    }
    SeminormParams bad;
    bad.s = 1.5;
    bad.alpha = 0.5;
    bad.variant = BesovVariant::poisson_dt;
    CHECK_THROWS_WITH_AS(check_seminorm_range(bad), doctest::Contains("s < 2α"), Error);
    bad.variant = BesovVariant::poisson_lap;
    bad.s = 2.5;
    CHECK_THROWS_AS(check_seminorm_range(bad), Error);
    bad.variant = BesovVariant::direct;
    bad.s = 0.5;
    bad.q = INFINITY;
    CHECK_THROWS_AS(check_seminorm_range(bad), Error);
    CHECK(besov_variant_from_string("poisson_lap") == BesovVariant::poisson_lap);
}

TEST_CASE("g-function: L2 isometry constant on R2 and the narrow-cone limit of S on R1") {
    const auto g2 = GridSpec::standard("R2");
    const double a = 0.5;
    // ‖g_φ f‖₂² = ‖f‖₂² ∫ z²|m(z)|² dz/z for φ_t = t∇p_α(t).
    const double c = std::sqrt(log_integral([&](double z) { return z * z * std::pow(poisson_symbol(a, z), 2); }));
    PhiParams ph;
    ph.alpha = a;
    // Finite differences and the box truncation at large t both bias low.
    for (const auto& [id, lam] : std::vector<std::pair<std::string, double>>{{"gaussian", 0.75}, {"gaussian", 1.5}, {"two_bump", 0.75}}) {
        const auto f = sample_field(fn_at(g2, id, lam), g2);
        CHECK(lp_norm(square_function(f, ph), 2) / lp_norm(f, 2) == doctest::Approx(c).epsilon(0.03));
    }
    const auto grid = GridSpec::standard("R1");
    const auto f = sample_field(fn_at(grid, "gaussian"), grid);
    const auto st = phi_stack(f, ph);
    const auto gf = square_function(st, SquareMode::g);
    // S_β² / (β^Q |B₁|) → g² as β → 0.
    const double beta = 0.05;
    auto S = square_function(st, SquareMode::S, beta);
    S *= 1 / std::sqrt(beta * unit_ball_volume(*grid.group));
    CHECK(lp_norm(S - gf, 2) / lp_norm(gf, 2) < 0.03);
    // The full cone dominates the narrow one.
    const auto S1 = square_function(st, SquareMode::S, 1);
    for (std::size_t i = 0; i < S1.values.size(); i += 16) CHECK(S1.values[i] >= S.values[i] * std::sqrt(beta * 2) - 1e-12);
    CHECK(square_function(ScalarField::zeros(grid), ph).max_abs() == 0);
    ph.variant = PhiVariant::dt;
    ph.s = -1.5;
    CHECK_THROWS_AS(check_phi_range(ph), Error);
}

TEST_CASE("square function vs Sobolev norm: universal ratio on R1, dilation drift, skip on zero") {
    const auto grid = GridSpec::standard("R1");
    const double a = 0.5, s = 0.3;
    // t^{1−s}|∇u| on the Poisson extension: ∫ z^{2−2s}|m|² dz/z times ‖L^{s/2}f‖².
    const double c = std::sqrt(log_integral([&](double z) { return std::pow(z, 2 - 2 * s) * std::pow(poisson_symbol(a, z), 2); }));
    for (const auto& id : {"gaussian", "bump"})
        for (double lam : {0.5, 1.0, 2.0}) {
            const auto r = square_norm_vs_sobolev(dilate_exact(fn_at(grid, id), grid, lam), s, 2, a, SobolevVariant::grad);
            CHECK(r.ratio == doctest::Approx(c).epsilon(0.03));
            CHECK(r.error_budget >= 0);
        }
    CHECK(square_norm_vs_sobolev(ScalarField::zeros(grid), s, 2, a, SobolevVariant::grad).skipped);
    const auto f = sample_field(fn_at(grid, "gaussian"), grid);
    CHECK_THROWS_AS(square_norm_vs_sobolev(f, 0.8, 2, 0.3, SobolevVariant::dt), Error);
    for (auto v : {SobolevVariant::dt, SobolevVariant::hess}) {
        const auto r = square_norm_vs_sobolev(f, -0.3, 2, a, v);
        CHECK(std::isfinite(r.ratio));
        CHECK(r.ratio > 0);
    }
}

TEST_CASE("BMO: constants vanish, dilation invariance, Carleson ratio") {
    const auto grid = GridSpec::standard("R1");
    FieldFunction one = fn_at(grid, "constant");
    CHECK(bmo_norm(sample_field(one, grid)).value < 1e-12);
    CHECK(bmo_norm(ScalarField::zeros(grid)).value == 0);
    PhiParams ph;
    for (const auto& id : {"gaussian", "log_trunc", "two_bump"}) {
        CAPTURE(id);
        const auto fn = fn_at(grid, id);
        const auto f = sample_field(fn, grid);
        const double b = bmo_norm(f).value;
        for (double lam : {0.5, 2.0}) CHECK(bmo_norm(dilate_exact(fn, grid, lam)).value / b == doctest::Approx(1).epsilon(0.03));
        const double r = carleson_functional(f, ph).value / b;
        CHECK(r > 0.05);
        CHECK(r < 20);
    }
}

TEST_CASE("maximal functions: M0 <= M, direct recomputation at the centre, decay gate") {
    const auto grid = GridSpec::make(make_group("R1"), {8}, {321});
    FieldFunction fn = fn_at(grid, "bump", 2);
    const auto f = sample_field(fn, grid);
    MaxProfile heat;
    const auto m0 = maximal(f, heat, MaxMode::M0);
    const auto m = maximal(f, heat, MaxMode::M);
    for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(m0.values[i] <= m.values[i] + 1e-12);
    // sup over the same t nodes of (f∗h_{t²})(0) = ∫ f(y)(4πt²)^{−½}e^{−y²/4t²} dy by quadrature of the
    // analytic bump.
    const std::size_t c = f.values.size() / 2;
    const auto q = composite_gauss(-0.5, 0.5, 400, 8);
    double best = -INFINITY;
    for (const auto& [t, slice] : maximal_slices(f, heat)) {
        double acc = 0;
        for (std::size_t i = 0; i < q.x.size(); ++i)
            acc += q.w[i] * fn(*grid.group, &q.x[i]) * std::exp(-q.x[i] * q.x[i] / (4 * t * t)) / std::sqrt(4 * M_PI * t * t);
        best = std::max(best, acc);
    }
    CHECK(m0.values[c] == doctest::Approx(best).epsilon(1e-3));
    CHECK(m0.values[c] >= f.values[c] * 0.99);

    MaxProfile pw;
    pw.kind = "power";
    pw.lambda = 0.9;
    CHECK_THROWS_AS(maximal(f, pw, MaxMode::M0), Error);
    pw.lambda = 3;
    const auto mp = maximal(f, pw, MaxMode::M0);
    CHECK(lp_norm(mp, 2) / lp_norm(f, 2) < 10);
    MaxProfile po;
    po.kind = "poisson";
    CHECK(lp_norm(maximal(f, po, MaxMode::M0), 2) / lp_norm(f, 2) < 10);
}

TEST_CASE("Calderón scalars: Bessel closed forms, reproduction, support, c_alpha invariance") {
    for (double a : {0.3, 0.5, 0.7}) {
        CAPTURE(a);
        const double k = std::pow(2 * a, -a);  // θ^{1/2}
        for (double s : {0.1, 1.0, 5.0}) {
            CHECK(calderon_H(a, s) == doctest::Approx(k * std::pow(s, a) * std::cyl_bessel_k(a, s)).epsilon(1e-10));
            CHECK(calderon_Htilde(a, s) == doctest::Approx(-k * std::pow(s, a + 1) * std::cyl_bessel_k(1 - a, s)).epsilon(1e-10));
        }
        const auto cs = calderon_scalars(a);
        CHECK(std::abs(reproducing_check(cs) - 1) < 1e-6);
        CHECK(cs.G_at(0.2499) == 0);
        CHECK(cs.G_at(4.001) == 0);
        CHECK(cs.G_at(1) != 0);
        const auto c7 = calderon_scalars(a, 0.5, 2, 7);
        for (double s : {0.3, 1.0, 3.0}) CHECK(c7.Ht_at(s) * c7.G_at(s) == doctest::Approx(cs.Ht_at(s) * cs.G_at(s)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(calderon_scalars(0.5, 1e3, 1e6), Error);
}

TEST_CASE("Euclidean reproduction converges as the window widens") {
    const auto grid = GridSpec::standard("R2");
    const auto cs = calderon_scalars(0.5);
    for (const auto& id : {"gaussian", "bump"}) {
        const auto f = sample_field(fn_at(grid, id), grid);
        double prev = INFINITY;
        for (double w : {10.0, 30.0, 100.0, 1000.0}) {
            const double r = lp_norm(euclidean_reproducing_apply(f, cs, 1 / w, w) - f, 2) / lp_norm(f, 2);
            CHECK(r <= prev * (1 + 1e-9));
            prev = r;
            if (w == 100.0) CHECK(r < 0.03);
        }
    }
    CHECK(euclidean_reproducing_apply(ScalarField::zeros(grid), cs, 1e-2, 1e2).max_abs() == 0);
    const auto h1 = GridSpec::make(make_group("H1"), {2, 2, 4}, {9, 9, 9});
    CHECK_THROWS_AS(euclidean_reproducing_apply(ScalarField::zeros(h1), cs, 1e-2, 1e2), Error);
}

TEST_CASE("Schur kernel constants match their closed forms") {
    for (std::string G : {"R1", "H1"}) {
        auto g = make_group(G);
        const double S = unit_ball_volume(*g) * g->Q;
        for (double s : {0.3, 0.7})
            for (double a : {0.4, 0.6}) {
                const auto k1 = schur_constants(*g, 1, s, a);
                CHECK(k1.sup == doctest::Approx(1).epsilon(1e-9));
                CHECK(k1.t_integral == doctest::Approx(1 / (1 - s / 2)).epsilon(1e-6));
                CHECK(k1.y_integral == doctest::Approx(S / (a * (2 - s))).epsilon(1e-6));
                const auto k2 = schur_constants(*g, 2, s, a);
                CHECK(k2.sup == doctest::Approx(1).epsilon(1e-9));
                CHECK(k2.t_integral == doctest::Approx(2 * a / (g->Q + a * s)).epsilon(1e-6));
                CHECK(k2.y_integral == doctest::Approx(S / (g->Q + a * s)).epsilon(1e-6));
                // The sup and t-integral bounds sit under 2/(1 − s/2).
                CHECK(std::max(k1.sup, k1.t_integral) <= 2 / (1 - s / 2));
                CHECK(std::max(k2.sup, k2.t_integral) <= 2 / (1 - s / 2));
            }
    }
    const auto r1 = make_group("R1");
    CHECK(unit_ball_volume(*r1) == doctest::Approx(2));
}

TEST_CASE("extension product integral: Parseval oracle on R1 and zero factors") {
    const auto grid = GridSpec::standard("R1");
    for (double a : {0.3, 0.5}) {
        CAPTURE(a);
        auto dm = [&](double z) { return -std::pow(2.0, 1 - a) / std::tgamma(a) * std::pow(z, a) * std::cyl_bessel_k(1 - a, z); };
        // ∫∫ t|∂_t F|² dx dt/t = ‖L^{1/4}f‖₂² ∫ z m′(z)² dz/z.
        const double c = log_integral([&](double z) { return z * dm(z) * dm(z); });
        const auto f = sample_field(fn_at(grid, "gaussian"), grid);
        const HeatFlow flow(f);
        const double rhs = std::pow(lp_norm(sobolev_power(flow, 0.5), 2), 2) * c;
        const auto v = extension_product_integral({{&flow, ExtFactor::dt}, {&flow, ExtFactor::dt}}, a, 1);
        CHECK(v.value == doctest::Approx(rhs).epsilon(0.01));
        CHECK(v.error_estimate >= 0);
    }
    const HeatFlow zero(ScalarField::zeros(grid));
    const HeatFlow one(sample_field(fn_at(grid, "gaussian"), grid));
    CHECK(extension_product_integral({{&one, ExtFactor::tilde_grad}, {&zero, ExtFactor::value}}, 0.5, 1).value == 0);
    const auto pp = bmo_pairing_panel(*grid.group);
    CHECK(pp.size() == 4);
    CHECK(pp[0].id == "log_trunc");
}
