#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "chg/error.hpp"
#include "chg/group.hpp"
#include "chg/numerics.hpp"
#include "chg/operators.hpp"
#include "chg/subordinator.hpp"

using namespace chg;

namespace {

ScalarField sample(const GridSpec& g, const std::string& id = "gaussian", double lambda = 1) {
    FieldFunction fn;
    fn.id = id;
    fn.lambda = lambda;
    return sample_field(fn, g);
}

double rel(const ScalarField& a, const ScalarField& b) { return lp_norm(a - b, 2) / lp_norm(b, 2); }

// Relative L² difference over the points with |x| <= rho.
double rel_ball(const ScalarField& a, const ScalarField& b, double rho) {
    double n = 0, d = 0, x[8];
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        a.grid.point(i, x);
        double r2 = 0;
        for (int j = 0; j < a.grid.dim(); ++j) r2 += x[j] * x[j];
        if (r2 > rho * rho) continue;
        n += std::pow(a.values[i] - b.values[i], 2);
        d += b.values[i] * b.values[i];
    }
    return std::sqrt(n / d);
}

// c_{1,α} = 4^α Γ(½+α) / (√π |Γ(−α)|), the constant of (−d²/dx²)^α on ℝ.
double c1(double a) { return std::pow(4.0, a) * std::tgamma(0.5 + a) / (std::sqrt(M_PI) * std::abs(std::tgamma(-a))); }

// −c_{1,α} ∫_ℝ (1 − e^{−y²})² |y|^{−1−2α} dy by dense Simpson in log y plus the y^{−1−2α} tail.
double r1_commutator_at_zero(double a) {
    const double z0 = -12, z1 = std::log(40.0);
    const int n = 200000;
    const double h = (z1 - z0) / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double y = std::exp(z0 + i * h);
        const double v = std::pow(1 - std::exp(-y * y), 2) * std::pow(y, -2 * a);
        s += (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2)) * v;
    }
    s *= h / 3;
    s += std::pow(40.0, -2 * a) / (2 * a);
    return -c1(a) * 2 * s;
}

}  // namespace

TEST_CASE("stable profile matches direct subordinator densities") {
    for (double a : {0.25, 0.5, 0.75}) {
        auto prof = StableProfile::get(a);
        StableDensityParams p;
        p.alpha = a;
        for (double t : {0.1, 1.0, 3.0}) {
            p.t = t;
            const double scale = std::pow(t, 1 / a);
            for (double sig : {0.05, 0.3, 1.0, 4.0, 50.0}) {
                const double s = sig * scale;
                const double ref = stable_density(p, s), dref = stable_density_dt(p, s);
                CHECK(prof->density(t, s) == doctest::Approx(ref).epsilon(1e-5).scale(1e-12 / scale));
                CHECK(prof->density_dt(t, s) == doctest::Approx(dref).epsilon(1e-4).scale(1e-10 / scale));
            }
        }
        CHECK(prof->density(1, 0) == 0);
        CHECK(prof->density(1, -1) == 0);
    }
    // α = ½ closed form (4π)^{-1/2} t s^{-3/2} e^{-t²/4s}.
    auto prof = StableProfile::get(0.5);
    for (double s : {1e-3, 0.1, 2.0, 1e3, 1e9, 1e14}) {
        const double ex = std::pow(4 * M_PI, -0.5) * std::pow(s, -1.5) * std::exp(-1 / (4 * s));
        CHECK(prof->density(1, s) == doctest::Approx(ex).epsilon(1e-5));
    }
    CHECK_THROWS_AS(StableProfile::get(1.0), Error);
}

TEST_CASE("R1 fractional Laplacian: PV and Balakrishnan routes against the Fourier symbol") {
    auto g = GridSpec::make(make_group("R1"), {8}, {161});
    auto f = sample(g);
    for (double a : {0.25, 0.5, 0.75}) {
        CAPTURE(a);
        auto fft = frac_sublaplacian_fft(f, a, 32);
        OpReport r1, r2;
        auto pv = frac_sublaplacian_pv(f, a, {}, &r1);
        auto bal = frac_sublaplacian_balakrishnan(f, a, &r2);
        CHECK(rel(pv, fft) < 1e-2);
        CHECK(rel(bal, fft) < 1e-2);
        CHECK(rel(pv, bal) < 2e-2);
        CHECK(r1.error_budget > 0);
        CHECK(r2.error_budget > 0);
        CHECK(r1.error_budget < 1e-2 * lp_norm(fft, 2));
    }
    // Angular constant on ℝ: A = 2 K(1) = 2 c_{1,α}.
    for (double a : {0.25, 0.5}) CHECK(pv_kernel_moments(make_group("R1"), a, 4).A == doctest::Approx(2 * c1(a)).epsilon(1e-6));
    CHECK(c1(0.5) == doctest::Approx(1 / M_PI));
}

TEST_CASE("R2 routes agree, are linear and dilation covariant") {
    auto g = GridSpec::make(make_group("R2"), {5, 5}, {51, 51});
    auto f = sample(g);
    auto b = sample(g, "bump");
    for (double a : {0.25, 0.75}) {
        CAPTURE(a);
        auto fft = frac_sublaplacian_fft(f, a);
        CHECK(rel(frac_sublaplacian_pv(f, a), fft) < 1e-2);
        CHECK(rel(frac_sublaplacian_balakrishnan(f, a), fft) < 1e-2);
    }
    const double a = 0.5;
    auto combo = 2.0 * f - 0.5 * b;
    auto lin_bal = 2.0 * frac_sublaplacian_balakrishnan(f, a) - 0.5 * frac_sublaplacian_balakrishnan(b, a);
    CHECK(rel(frac_sublaplacian_balakrishnan(combo, a), lin_bal) < 1e-6);
    auto lin_pv = 2.0 * frac_sublaplacian_pv(f, a) - 0.5 * frac_sublaplacian_pv(b, a);
    CHECK(rel(frac_sublaplacian_pv(combo, a), lin_pv) < 1e-12);

    // (f∘δ_2) sampled on the grid dilated by ½ holds the same values as f; the operator output
    // must scale by 2^{2α}.
    for (double lam : {0.5, 2.0}) {
        CAPTURE(lam);
        auto gd = g.dilated(lam);
        FieldFunction fn;
        fn.lambda = lam;
        auto fd = sample_field(fn, gd);
        auto ref = frac_sublaplacian_pv(f, a);
        auto pd = frac_sublaplacian_pv(fd, a);
        pd *= std::pow(lam, -2 * a);
        CHECK(lp_norm(ScalarField(g, pd.values, "") - ref, 2) / lp_norm(ref, 2) < 2e-2);
        auto bref = frac_sublaplacian_balakrishnan(f, a);
        auto bd = frac_sublaplacian_balakrishnan(fd, a);
        bd *= std::pow(lam, -2 * a);
        CHECK(lp_norm(ScalarField(g, bd.values, "") - bref, 2) / lp_norm(bref, 2) < 2e-2);
    }
}

TEST_CASE("plateau centres: the operator value falls like the plateau radius to the −2α") {
    // smooth_step plateau of radius ρ = 0.5/λ; the value at the centre is ∫(1 − f)K ∝ ρ^{−2α}.
    auto g = GridSpec::make(make_group("R2"), {5, 5}, {81, 81});
    const double a = 0.5;
    const std::size_t c = g.size() / 2;
    auto narrow = frac_sublaplacian_pv(sample(g, "plateau", 1.0), a);
    auto wide = frac_sublaplacian_pv(sample(g, "plateau", 0.25), a);
    CHECK(std::abs(wide.values[c]) < std::abs(narrow.values[c]));
    CHECK(wide.values[c] / narrow.values[c] == doctest::Approx(0.25).epsilon(0.02));
    // Constants annihilated, with and without a truncated reach.
    PolarOptions o;
    o.r_max = 1.0;
    auto one = sample(g, "constant");
    CHECK(frac_sublaplacian_pv(one, a, o).max_abs() < 1e-12);
    CHECK(frac_sublaplacian_pv(one, a).max_abs() < 1e-12);
}

TEST_CASE("H1 PV and Balakrishnan routes agree within 2%") {
    auto g = GridSpec::make(make_group("H1"), {4, 4, 8}, {41, 41, 41});
    auto f = sample(g);
    HeatFlow flow(f);
    const double a = 0.5;
    OpReport rb, rp;
    auto bal = frac_sublaplacian_balakrishnan(flow, a, &rb);
    PolarOptions o;
    o.stride = 2;
    auto pv = frac_sublaplacian_pv(f, a, o, &rp);
    CHECK(rel(pv, restrict_to_stride(bal, 2)) < 2e-2);
    CHECK(rb.detail.contains("tail_mismatch"));
    CHECK(rp.detail["directions"].get<int>() > 50);
    CHECK_THROWS_AS(frac_sublaplacian_fft(f, a), Error);
    CHECK_THROWS_AS(restrict_to_stride(f, 3), Error);
}

TEST_CASE("Poisson extension: approximate identity, maximum principle, extension equation") {
    auto g = GridSpec::make(make_group("R1"), {8}, {161});
    auto f = sample(g);
    HeatFlow flow(f);
    for (double a : {0.25, 0.5, 0.75}) {
        CAPTURE(a);
        auto P = poisson_extension(flow, a);
        REQUIRE(P.u.size() == 64);
        for (const auto& u : P.u) CHECK(u.max_abs() <= f.max_abs() * (1 + 1e-6));
        double worst = 0;
        for (std::size_t k = 1; k + 1 < P.u.size(); ++k) worst = std::max(worst, P.pde_residual(k));
        MESSAGE("alpha " << a << " small-t error " << rel(P.u[0], f) << ", worst residual " << worst);
        if (a >= 0.5) CHECK(rel(P.u[0], f) < 5e-2);
        if (a == 0.5) CHECK(worst < 2e-2);
        // u − f ~ t^{2α}: the small-t error shrinks along the first nodes.
        CHECK(rel(P.u[0], f) < rel(P.u[8], f));
        // ∇̃: the centred log-grid difference tracks the analytic ∂_t u.
        auto tg = P.tilde_gradient(20);
        REQUIRE(tg.size() == 2);
        CHECK(rel(tg[1], P.u_t[20]) < 2e-2);
    }
    // α = ½ extension is e^{−t|ξ|} f.
    auto P = poisson_extension(flow, 0.5, {0.1, 1.0, 3.0});
    for (std::size_t k = 0; k < 3; ++k) {
        const double t = P.t_nodes[k];
        CHECK(rel(P.u[k], euclidean_multiplier(f, [t](double x) { return std::exp(-t * std::sqrt(x)); }, 32)) < 2e-3);
    }
    CHECK_THROWS_AS(poisson_extension(flow, 0.5, {1.0, 0.5}), Error);
    CHECK_THROWS_AS(poisson_extension(flow, 1.5), Error);
}

TEST_CASE("heat extension: ∂t u = −L^α u") {
    auto g = GridSpec::make(make_group("R1"), {8}, {161});
    auto f = sample(g);
    HeatFlow flow(f);
    for (double a : {0.25, 0.5, 0.75}) {
        CAPTURE(a);
        auto H = heat_extension(flow, a, log_space(1e-2, 2, 12));
        CHECK(H.u_tt.empty());
        CHECK_THROWS_AS(H.pde_residual(3), Error);
        for (std::size_t k = 0; k < H.u.size(); ++k) {
            const double t = H.t_nodes[k];
            auto U = euclidean_multiplier(f, [&](double x) { return std::exp(-t * std::pow(x, a)); }, 32);
            auto Ut = euclidean_multiplier(f, [&](double x) { return -std::pow(x, a) * std::exp(-t * std::pow(x, a)); }, 32);
            CHECK(rel(H.u[k], U) < 5e-3);
            CHECK(rel(H.u_t[k], Ut) < 5e-3);
            // u(t) has power-law tails cut by the box; compare on the central ball.
            if (t > 1) continue;
            auto L = frac_sublaplacian_pv(H.u[k], a);
            CHECK(rel_ball(H.u_t[k], -1.0 * L, 2) < 2e-2);
        }
    }
}

TEST_CASE("extension export writes a manifest and slices") {
    auto g = GridSpec::make(make_group("R1"), {4}, {41});
    auto P = poisson_extension(sample(g), 0.5, {0.5, 1.0});
    const auto dir = std::filesystem::temp_directory_path() / "chg_ext_export";
    std::filesystem::remove_all(dir);
    P.export_dir(dir.string());
    std::ifstream in(dir / "manifest.json");
    REQUIRE(in);
    auto m = nlohmann::json::parse(in);
    CHECK(m["alpha"] == 0.5);
    CHECK(m["t_nodes"].size() == 2);
    CHECK(m["provenance"].is_string());
    auto back = load_field((dir / m["slices"][1].get<std::string>()).string());
    CHECK(rel(back, P.u[1]) < 1e-15);
    std::filesystem::remove_all(dir);
}

TEST_CASE("fractional integral: Newtonian potential, semigroup, inverse relation") {
    auto g = GridSpec::make(make_group("R3"), {5, 5, 5}, {41, 41, 41});
    auto f = sample(g);
    OpReport r;
    auto I2 = frac_integral(f, 2.0, &r);
    CHECK(r.error_budget > 0);
    CHECK(lp_norm_interior(sublaplacian(I2) + f, 2, 3) / lp_norm_interior(f, 2, 3) < 2e-2);
    // I_s f has power-law tails cut by the box, so compositions are compared on the central ball.
    auto I1 = frac_integral(f, 1.0);
    auto I37 = frac_integral(frac_integral(f, 0.7), 0.3);
    CHECK(rel_ball(I37, I1, 2) < 3e-2);
    auto back = frac_sublaplacian_pv(frac_integral(f, 0.5), 0.25);
    CHECK(rel_ball(back, f, 2) < 5e-2);
    CHECK_THROWS_AS(frac_integral(f, 0.0), Error);
    CHECK_THROWS_AS(frac_integral(f, 3.0), Error);
    CHECK_THROWS_AS(frac_integral(f, -1.0), Error);
}

TEST_CASE("commutator: oracle at the origin, assembly, symmetry, constants") {
    auto g = GridSpec::make(make_group("R1"), {8}, {161});
    auto u = sample(g);
    auto v = sample(g, "bump");
    const std::size_t c = 80;
    const double a = 0.25;
    auto h = commutator(u, u, a);
    CHECK(h.values[c] == doctest::Approx(r1_commutator_at_zero(a)).epsilon(1e-2));
    for (double al : {0.25, 0.5, 0.75}) {
        CAPTURE(al);
        auto p = commutator(u, v, al);
        auto q = commutator_assembled(u, v, al);
        CHECK(rel(p, q) < 5e-2);
        auto uv = multiply(u, v);
        auto oracle = frac_sublaplacian_fft(uv, al, 32) - multiply(u, frac_sublaplacian_fft(v, al, 32));
        oracle -= multiply(v, frac_sublaplacian_fft(u, al, 32));
        CHECK(rel(p, oracle) < 3e-2);
    }
    auto p = commutator(u, v, 0.5), q = commutator(v, u, 0.5);
    CHECK(p.values == q.values);
    // A constant keeps its value off the lattice, so both vanish identically.
    auto bump = sample(g, "bump");
    auto one = sample(g, "constant");
    CHECK(one.exterior == 1);
    OpReport rep;
    CHECK(commutator(bump, one, 0.5, {}, &rep).max_abs() == 0);
    CHECK(frac_sublaplacian_pv(one, 0.5).max_abs() < 1e-12);
    CHECK_THROWS_AS(HeatFlow{one}, Error);
}
