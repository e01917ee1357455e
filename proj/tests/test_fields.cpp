#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "chg/error.hpp"
#include "chg/fields.hpp"
#include "chg/kernels.hpp"

using namespace chg;

namespace {
const double kPI = 3.14159265358979323846;

FieldFunction fn(const std::string& id, double sigma = 1, double lambda = 1) {
    FieldFunction f;
    f.id = id;
    f.sigma = sigma;
    f.lambda = lambda;
    return f;
}

// X_j² f(x) = d²/ds² f(x·exp(s e_j)) at s = 0, by a 5-point rule on the analytic function.
double Xsq(const FieldFunction& f, const GroupSpec& g, const double* x, int j) {
    const double s = 1e-3;
    auto at = [&](double u) {
        double e[3] = {0, 0, 0}, y[3];
        e[j] = u;
        product_raw(g, x, e, y);
        return f(g, y);
    };
    return (-at(2 * s) + 16 * at(s) - 30 * at(0) + 16 * at(-s) - at(-2 * s)) / (12 * s * s);
}
}  // namespace

TEST_CASE("grid geometry") {
    auto g = GridSpec::standard("H1");
    CHECK(g.size() == 64u * 64u * 96u);
    CHECK(g.stride(0) == 64u * 96u);
    CHECK(g.spacing(2) == doctest::Approx(24.0 / 95));
    CHECK_FALSE(g.centered());
    CHECK(GridSpec::from_json(g.to_json()) == g);
    CHECK_THROWS_AS(GridSpec::make(make_group("R2"), {1.0}, {5}), Error);
    CHECK_THROWS_AS(GridSpec::make(make_group("R1"), {-1.0}, {5}), Error);

    // Sampling f∘δ_λ on the dilated lattice reproduces the samples of f.
    auto base = GridSpec::make(make_group("H1"), {3, 3, 5}, {9, 9, 11});
    auto f = sample_field(fn("gaussian"), base);
    auto fl = sample_field(fn("gaussian", 1, 2), base.dilated(2));
    for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(fl.values[i] == doctest::Approx(f.values[i]).epsilon(1e-12));
}

TEST_CASE("field construction and functions") {
    auto g = GridSpec::make(make_group("R1"), {1}, {3});
    CHECK_THROWS_AS(ScalarField(g, {0.0, NAN, 1.0}, "bad"), Error);
    CHECK_THROWS_AS(ScalarField(g, {0.0, 1.0}, "short"), Error);

    auto j = fn("bump", 0.5).to_json();
    CHECK(FieldFunction::from_json(j).to_json() == j);
    j["colour"] = 1;
    CHECK_THROWS_AS(FieldFunction::from_json(j), Error);

    auto h = make_group("H1");
    double o[3] = {0, 0, 0}, far[3] = {0.8, 0, 0};
    CHECK(fn("bump")(*h, o) == doctest::Approx(1));
    CHECK(fn("bump")(*h, far) > 0);
    double out[3] = {0, 0, 1.01};
    CHECK(fn("bump")(*h, out) == 0);
    auto lt = fn("log_trunc");
    lt.param = 3;
    CHECK(lt(*h, o) == 3);
    CHECK(lt(*h, far) == doctest::Approx(-std::log(0.8)));
    auto pl = fn("plateau");
    double half[3] = {0.4, 0, 0};
    CHECK(pl(*h, half) == 1);
    CHECK(pl(*h, far) > 0);
    CHECK(pl(*h, far) < 1);

    // Translation: f(c⁻¹ x) peaks at x = c.
    auto tr = fn("gaussian");
    tr.center = {1, -1, 0.5};
    double c[3] = {1, -1, 0.5};
    CHECK(tr(*h, c) == doctest::Approx(1));
}

TEST_CASE("Lp norms: Gaussian values and dilation scaling") {
    auto g = GridSpec::make(make_group("R2"), {8, 8}, {161, 161});
    auto f = sample_field(fn("gaussian"), g);
    CHECK(lp_norm(f, 1) == doctest::Approx(kPI).epsilon(1e-10));
    CHECK(lp_norm(f, 2) == doctest::Approx(std::sqrt(kPI / 2)).epsilon(1e-10));
    CHECK(lp_norm(f, INFINITY) == 1);
    CHECK_THROWS_AS(lp_norm(f, 0.5), Error);
    for (double p : {1.0, 1.5, 3.0}) {
        auto fl = sample_field(fn("gaussian", 1, 2), g);
        CHECK(lp_norm(fl, p) / lp_norm(f, p) == doctest::Approx(std::pow(2.0, -2 / p)).epsilon(1e-8));
    }
    auto gh = GridSpec::make(make_group("H1"), {5, 5, 8}, {61, 61, 241});
    auto fh = sample_field(fn("gaussian"), gh);
    for (double p : {1.0, 2.0}) {
        auto fl = sample_field(fn("gaussian", 1, 2), gh);
        CHECK(lp_norm(fl, p) / lp_norm(fh, p) == doctest::Approx(std::pow(2.0, -4 / p)).epsilon(1e-6));
    }
    CHECK(lp_norm_interior(fh, 1, 2) < lp_norm(fh, 1));
}

TEST_CASE("interpolation and translation") {
    auto g = GridSpec::make(make_group("R1"), {10}, {201});
    auto f = sample_field(fn("gaussian"), g);
    auto g0 = shift_field(f, GroupElement(g.group, {0.0}));
    for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(std::abs(g0.values[i] - f.values[i]) <= 1e-14);
    CHECK(g0.leakage <= 1e-15);
    auto s = shift_field(f, GroupElement(g.group, {0.37}));
    for (double x : {-1.0, 0.0, 0.5, 2.0}) {
        double xs = x + 0.37;
        double x0 = x;
        const double got = interpolate(s, &x0);
        CHECK(got == doctest::Approx(std::exp(-xs * xs)).epsilon(3e-5));
    }
    double outside = 11;
    CHECK(interpolate(f, &outside) == 0);

    // H1: translation by y is x ↦ f(x·y); compare with the analytic translate.
    auto gh = GridSpec::make(make_group("H1"), {4, 4, 6}, {81, 81, 97});
    auto fh = sample_field(fn("gaussian"), gh);
    auto y = GroupElement(gh.group, {0.5, -0.25, 0.3});
    auto sh = shift_field(fh, y);
    double worst = 0;
    for (std::size_t i = 0; i < sh.values.size(); i += 997) {
        double x[3], xy[3];
        gh.point(i, x);
        product_raw(*gh.group, x, y.coords.data(), xy);
        worst = std::max(worst, std::abs(sh.values[i] - fn("gaussian")(*gh.group, xy)));
    }
    CHECK(worst < 2e-3);
    CHECK(sh.leakage < 1e-6);
}

TEST_CASE("Euclidean convolution: Gaussian closed forms") {
    // e^{-x²} ∗ e^{-x²} = √(π/2) e^{-x²/2}.
    auto g = GridSpec::make(make_group("R1"), {10}, {201});
    auto f = sample_field(fn("gaussian"), g);
    auto c = group_convolve(f, f);
    for (int i = 50; i <= 150; i += 10) {
        const double x = g.coord(0, i);
        CHECK(c.values[i] == doctest::Approx(std::sqrt(kPI / 2) * std::exp(-x * x / 2)).epsilon(1e-10));
    }
    CHECK(c.leakage < 1e-10);

    // e^{-|x|²} ∗ h_t = (1+4t)^{-1} e^{-|x|²/(1+4t)} on R2.
    auto g2 = GridSpec::make(make_group("R2"), {8, 8}, {97, 97});
    auto f2 = sample_field(fn("gaussian"), g2);
    const double t = 0.3;
    auto h = group_convolve(f2, KernelHandle::make(KernelKind::heat, "R2"), t);
    double worst = 0;
    for (std::size_t i = 0; i < h.values.size(); ++i) {
        double x[2];
        g2.point(i, x);
        const double r2 = x[0] * x[0] + x[1] * x[1];
        worst = std::max(worst, std::abs(h.values[i] - std::exp(-r2 / (1 + 4 * t)) / (1 + 4 * t)));
    }
    CHECK(worst < 1e-6);
    CHECK_THROWS_AS(group_convolve(f2, KernelHandle::make(KernelKind::riesz, "R2", 0.5), 1), Error);
}

TEST_CASE("H1 convolution against a direct lattice sum") {
    auto gh = GridSpec::make(make_group("H1"), {4, 4, 8}, {25, 25, 41});
    auto H = gh.group;
    auto ff = fn("gaussian");
    auto gf = fn("gaussian", 0.7);
    gf.center = {0.3, 0, 0};
    auto f = sample_field(ff, gh);
    auto g = sample_field(gf, gh);
    auto c = group_convolve(f, g);
    CHECK(c.integral() == doctest::Approx(f.integral() * g.integral()).epsilon(1e-4));
    CHECK(c.leakage < 1e-4);
    // Oracle: Σ_y f(x y⁻¹) g(y) ΔV with both factors evaluated analytically.
    for (std::size_t i : {std::size_t(12 * 25 * 41 + 12 * 41 + 20), std::size_t(14 * 25 * 41 + 10 * 41 + 24),
                          std::size_t(9 * 25 * 41 + 15 * 41 + 17)}) {
        double x[3];
        gh.point(i, x);
        double s = 0;
        for (std::size_t n = 0; n < gh.size(); ++n) {
            double y[3], yi[3], xy[3];
            gh.point(n, y);
            for (int j = 0; j < 3; ++j) yi[j] = -y[j];
            product_raw(*H, x, yi, xy);
            s += ff(*H, xy) * gf(*H, y);
        }
        s *= gh.cell_volume();
        CHECK(c.values[i] == doctest::Approx(s).epsilon(2e-3));
    }
}

TEST_CASE("H1 heat convolution: mass and semigroup") {
    auto gh = GridSpec::make(make_group("H1"), {5, 5, 8}, {41, 41, 49});
    auto f = sample_field(fn("gaussian"), gh);
    auto k = KernelHandle::make(KernelKind::heat, "H1");
    auto a = group_convolve(group_convolve(f, k, 0.25), k, 0.25);
    auto b = group_convolve(f, k, 0.5);
    CHECK(b.integral() == doctest::Approx(f.integral()).epsilon(1e-3));
    CHECK(b.leakage < 1e-3);
    CHECK(lp_norm(a - b, 2) / lp_norm(b, 2) < 0.02);
    // Heat flow contracts L^∞ and L^2.
    CHECK(b.max_abs() < f.max_abs());
    CHECK(lp_norm(b, 2) < lp_norm(f, 2));
}

TEST_CASE("horizontal gradient and sublaplacian") {
    auto gh = GridSpec::make(make_group("H1"), {2, 2, 2}, {21, 21, 21});
    auto cf = fn("coordinate");
    cf.param = 2;
    auto c = sample_field(cf, gh);
    auto grad = horizontal_gradient(c);
    REQUIRE(grad.size() == 2);
    for (std::size_t i = 0; i < gh.size(); i += 37) {
        double x[3];
        gh.point(i, x);
        const bool inner = std::abs(x[0]) < 2 - 1e-9 && std::abs(x[1]) < 2 - 1e-9 && std::abs(x[2]) < 2 - 1e-9;
        if (!inner) continue;
        CHECK(grad[0].values[i] == doctest::Approx(-x[1] / 2).epsilon(1e-12));
        CHECK(grad[1].values[i] == doctest::Approx(x[0] / 2).epsilon(1e-12));
    }

    // Second-order convergence of Δ_b against the left-invariant flow derivative.
    auto f = fn("gaussian");
    auto err = [&](int n) {
        auto g = GridSpec::make(make_group("H1"), {3, 3, 3}, {n, n, n});
        auto L = sublaplacian(sample_field(f, g));
        double worst = 0;
        const double pts[3][3] = {{0.5, -0.25, 0.25}, {0.0, 0.75, -0.5}, {-1.0, 0.5, 0.0}};
        for (const auto& p : pts) {
            const double exact = Xsq(f, *g.group, p, 0) + Xsq(f, *g.group, p, 1);
            worst = std::max(worst, std::abs(interpolate(L, p) - exact));
        }
        return worst;
    };
    const double e1 = err(49), e2 = err(97);
    CHECK(e1 / e2 > 3.0);
    CHECK(e1 / e2 < 5.0);
    CHECK(e2 < 5e-3);
}

TEST_CASE("CGF1 round trip and CSV") {
    auto g = GridSpec::make(make_group("H1"), {2, 2, 3}, {5, 6, 7});
    auto f = sample_field(fn("bump", 2), g);
    const std::string path = "field_rt.cgf";
    save_field(f, path);
    auto r = load_field(path);
    CHECK(r.grid == f.grid);
    CHECK(r.values == f.values);
    {
        std::ofstream o(path, std::ios::binary);
        o << "NOPE";
    }
    CHECK_THROWS_AS(load_field(path), Error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_field("does/not/exist.cgf"), Error);

    const std::string csv = "field_slice.csv";
    write_field_csv(f, csv, 0, 2);
    std::ifstream in(csv);
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5 * 7);
    std::remove(csv.c_str());
}
