// Acceptance suite: one PASS/FAIL line per criterion. Arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chg/error.hpp"
#include "chg/harness.hpp"
#include "chg/heisenberg_heat.hpp"
#include "chg/kernels.hpp"
#include "chg/numerics.hpp"
#include "chg/operators.hpp"
#include "chg/spaces.hpp"
#include "chg/subordinator.hpp"

using namespace chg;
using nlohmann::json;

namespace {

// Tolerances.
constexpr double kMassTol = 1e-3;
constexpr double kHomogQuadTol = 1e-2;
constexpr double kHomogPdeTol = 3e-2;
constexpr double kSymmetryTol = 1e-10;
constexpr double kCrossBackendTol = 3e-2;
constexpr std::int64_t kMcPaths = 1000000;
constexpr double kLaplaceTol = 1e-6;
constexpr double kHalfStableTol = 1e-8;
constexpr double kMomentTol = 1e-5;
constexpr double kPoissonClosedTol = 1e-4;
constexpr double kPoissonEnvelope = 0.3184;  // sup of p·(t²+x²)/t over the box, frozen
constexpr double kRieszSemigroupTol = 2e-2;
constexpr double kNewtonTol = 1e-4;
constexpr double kRouteTol = 2e-2;
constexpr double kFftOracleTol = 1e-2;
constexpr double kCovarianceTol = 2e-2;
constexpr double kDriftTol = 0.05;
constexpr double kBmoDilationTol = 3e-2;
constexpr double kAssemblyTol = 5e-2;
constexpr double kBruteForceTol = 1e-2;
constexpr double kReproducingTol = 1e-6;
constexpr double kEuclidReproTol = 3e-2;

// Frozen ratio bounds per square-function variant and for Carleson/BMO. Measured on R1 (full panel)
// and R2 (reduced): grad [0.567, 0.817], dt [0.575, 0.817], hess [0.465, 0.994], g_phi [0.464, 0.496],
// carleson/bmo [0.441, 0.639]; each band adds about 10% on both sides.
struct Band {
    const char* name;
    double lo, hi;
};
constexpr Band kSquareBands[] = {{"grad", 0.5, 0.9}, {"dt", 0.5, 0.9}, {"hess", 0.42, 1.1}, {"g_phi", 0.42, 0.55}};
constexpr Band kCarlesonBand = {"carleson_grad", 0.4, 0.7};

const double kPi = 3.14159265358979323846;

struct Outcome {
    bool pass = true;
    std::vector<std::string> parts;

    void le(const std::string& what, double value, double tol) {
        const bool ok = std::isfinite(value) && value <= tol;
        pass = pass && ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %.3g %s %.3g", what.c_str(), value, ok ? "<=" : "> !", tol);
        parts.emplace_back(buf);
    }
    void in(const std::string& what, double lo, double hi, const Band& b) {
        const bool ok = std::isfinite(hi) && lo >= b.lo && hi <= b.hi;
        pass = pass && ok;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s [%.3g, %.3g] %s [%.3g, %.3g]", what.c_str(), lo, hi, ok ? "in" : "NOT in", b.lo, b.hi);
        parts.emplace_back(buf);
    }
    void info(const std::string& what, double value) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %.3g", what.c_str(), value);
        parts.emplace_back(buf);
    }
    void is(const std::string& what, bool ok) {
        pass = pass && ok;
        parts.push_back(what + (ok ? " ok" : " FAILED"));
    }
};

FieldFunction fn(const std::string& id, double lambda = 1) {
    FieldFunction f;
    f.id = id;
    f.lambda = lambda;
    if (id == "log_trunc") {
        f.sigma = 2;
        f.param = 3;
    }
    if (id == "two_bump") f.param = 1.2;
    return f;
}

ScalarField sample(const FieldFunction& f0, const GridSpec& g) {
    FieldFunction f = f0;
    if (f.center.empty()) f.center.assign(g.dim(), 0.0);
    return sample_field(f, g);
}

// f∘δ_λ on the dilated lattice: same samples as f on g.
ScalarField dilated(const FieldFunction& f0, const GridSpec& g, double lam) {
    FieldFunction f = f0;
    if (f.center.empty()) f.center.assign(g.dim(), 0.0);
    f.lambda *= lam;
    const GridSpec gd = g.dilated(lam);
    for (int j = 0; j < gd.dim(); ++j) f.center[j] /= std::pow(lam, gd.group->degree(j));
    return sample_field(f, gd);
}

double rel(const ScalarField& a, const ScalarField& b) { return lp_norm(a - b, 2) / lp_norm(b, 2); }

// Relative L² difference of the sample vectors (fields on different lattices).
double rel_values(const std::vector<double>& a, const std::vector<double>& b) {
    double n = 0, d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += (a[i] - b[i]) * (a[i] - b[i]);
        d += b[i] * b[i];
    }
    return std::sqrt(n / d);
}

RatioReport study(json j) {
    j["schema"] = kReportSchema;
    return run_study(StudyConfig::from_json(j));
}

void study_summary(Outcome& o, const std::string& tag, const RatioReport& r) {
    o.is(tag + " rows(" + std::to_string(r.rows.size()) + ")", r.passed && !r.rows.empty());
    o.le(tag + " drift", r.dilation_drift, kDriftTol);
    o.is(tag + " spread finite", std::isfinite(r.spread) && r.spread > 0);
}

// ---------------------------------------------------------------------------------------------

Outcome c1() {
    Outcome o;
    auto k = KernelHandle::make(KernelKind::heat, "H1");
    double worst = 0;
    // 64×64×96 lattice on [-12,12]²×[-24,24]: wide enough for t = 4, fine enough for t = 1/4.
    for (double t : {0.25, 1.0, 4.0}) worst = std::max(worst, std::abs(h1_grid_mass(k, t, 64, 96, 12, 24) - 1));
    o.le("mass", worst, kMassTol);
    const auto rep = kernel_property_report(k, {"homogeneity", "symmetry"});
    o.le("homogeneity(quadrature)", rep.checks[0].residual, kHomogQuadTol);
    o.le("symmetry", rep.checks[1].residual, kSymmetryTol);
    auto p = KernelHandle::make(KernelKind::heat, "H1");
    p.backend = Backend::pde_grid;
    o.le("homogeneity(pde)", kernel_property_report(p, {"homogeneity"}).checks[0].residual, kHomogPdeTol);
    return o;
}

Outcome c2() {
    Outcome o;
    H1HeatPDE pde;
    pde.run({0.25, 1, 4});
    H1HeatMonteCarlo::Options mo;
    mo.paths = kMcPaths;
    H1HeatMonteCarlo mc(mo);
    double qp = 0, qm = 0, pm = 0;
    for (double t : {0.25, 1.0, 4.0}) {
        // |x| on [0,3] along the horizontal axis, the vertical axis and a mixed direction.
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i <= 12; ++i) {
            const double n = 0.25 * i;
            pts.push_back({n * n, 0});
            pts.push_back({0, n * n / 4});
            pts.push_back({n * n / std::sqrt(2.0), n * n / (4 * std::sqrt(2.0))});
        }
        const auto est = mc.eval_batch(t, pts);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double q = h1_heat_quadrature(t, pts[i].first, pts[i].second);
            const double p = pde.eval(t, pts[i].first, pts[i].second), m = est[i].value;
            qp = std::max(qp, std::abs(p / q - 1));
            qm = std::max(qm, std::abs(m / q - 1));
            pm = std::max(pm, std::abs(m / p - 1));
        }
    }
    o.le("quad-pde", qp, kCrossBackendTol);
    o.le("quad-mc", qm, kCrossBackendTol);
    o.le("pde-mc", pm, kCrossBackendTol);
    return o;
}

Outcome c3() {
    Outcome o;
    double lap = 0, mom = 0;
    for (double a : {0.3, 0.5, 0.7})
        for (double t : {0.5, 1.0, 2.0}) {
            const StableDensityParams p{a, t};
            for (double lam : log_space(0.1, 10, 9))
                lap = std::max(lap, std::abs(laplace_check(p, lam) - std::exp(-t * std::pow(lam, a))));
            for (double d : {-1.0, 0.0, a / 2})
                mom = std::max(mom, std::abs(moment(p, d) / moment_formula(a, t, d) - 1));
        }
    double half = 0;
    for (double t : {0.5, 1.0, 2.0}) {
        const StableDensityParams p{0.5, t};
        for (double s = 1e-3; s < 1e4; s *= 1.37)
            half = std::max(half, std::abs(stable_density_generic(p, s) - stable_density_half(t, s)));
    }
    o.le("laplace", lap, kLaplaceTol);
    o.le("half-stable", half, kHalfStableTol);
    o.le("moments", mom, kMomentTol);
    return o;
}

Outcome c4() {
    Outcome o;
    auto k = KernelHandle::make(KernelKind::poisson, "R1", 0.5);
    auto g = make_group("R1");
    double worst = 0, env_hi = 0, env_lo = INFINITY;
    for (double t : log_space(0.1, 10, 13))
        for (int i = 0; i <= 40; ++i) {
            const double x = -10 + 0.5 * i;
            const double p = poisson_eval(k, t, GroupElement(g, {x}));
            worst = std::max(worst, std::abs(p * kPi * (t * t + x * x) / t - 1));
            const double e = p * (t * t + x * x) / t;
            env_hi = std::max(env_hi, e);
            env_lo = std::min(env_lo, e);
        }
    o.le("closed form", worst, kPoissonClosedTol);
    o.le("envelope sup", env_hi, kPoissonEnvelope);
    o.is("envelope inf > 0", env_lo > 0);
    return o;
}

Outcome c5() {
    Outcome o;
    auto g = make_group("R3");
    auto k1 = KernelHandle::make(KernelKind::riesz, "R3", 1.0);
    auto k2 = KernelHandle::make(KernelKind::riesz, "R3", 2.0);
    auto R1 = [&](double d) { return riesz_eval(k1, GroupElement(g, {d, 0.0, 0.0})); };
    // (R₁∗R₁)(x), |x| = ρ: the angular integral becomes ∫_{|r−ρ|}^{r+ρ} R₁(d) d dd / (rρ), taken in log d
    // with a 16-point rule; the outer r-integral uses Gauss panels graded geometrically towards the
    // log singularity at r = ρ, and r = 2ρ/τ beyond 2ρ.
    const GaussRule& g16 = gauss_legendre(16);
    auto inner = [&](double rho, double r) {
        const double lo = std::log(std::abs(r - rho)), hi = std::log(r + rho);
        double v = 0;
        for (std::size_t i = 0; i < g16.x.size(); ++i) {
            const double u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * g16.x[i];
            v += 0.5 * (hi - lo) * g16.w[i] * R1(std::exp(u)) * std::exp(2 * u);
        }
        return 2 * kPi * R1(r) * r * v / rho;
    };
    auto conv = [&](double rho) {
        double total = 0;
        auto panel = [&](double a, double b) {
            for (std::size_t i = 0; i < g16.x.size(); ++i)
                total += 0.5 * (b - a) * g16.w[i] * inner(rho, 0.5 * (a + b) + 0.5 * (b - a) * g16.x[i]);
        };
        for (double side : {-1.0, 1.0})
            for (int k = 0; k < 60; ++k) {
                const double d0 = rho * std::pow(0.7, k + 1), d1 = rho * std::pow(0.7, k);
                if (side < 0) panel(rho - d1, rho - d0);
                else panel(rho + d0, rho + d1);
            }
        // r = 2ρ/τ, dr = 2ρ/τ² dτ on τ ∈ (0, 1].
        for (int k = 0; k < 40; ++k) {
            const double a = std::pow(0.7, k + 1), b = std::pow(0.7, k);
            for (std::size_t i = 0; i < g16.x.size(); ++i) {
                const double tau = 0.5 * (a + b) + 0.5 * (b - a) * g16.x[i];
                total += 0.5 * (b - a) * g16.w[i] * inner(rho, 2 * rho / tau) * 2 * rho / (tau * tau);
            }
        }
        return total;
    };
    double semi = 0, newton = 0;
    for (double rho : {0.5, 0.75, 1.0, 1.5, 2.0}) {
        semi = std::max(semi, std::abs(conv(rho) / riesz_eval(k2, GroupElement(g, {0.0, rho, 0.0})) - 1));
        for (const auto& dir : {std::vector<double>{1, 0, 0}, {0, 0.6, 0.8}, {0.48, 0.6, 0.64}}) {
            std::vector<double> x{rho * dir[0], rho * dir[1], rho * dir[2]};
            newton = std::max(newton, std::abs(riesz_eval(k2, GroupElement(g, x)) * 4 * kPi * rho - 1));
        }
    }
    o.le("R1*R1 vs R2", semi, kRieszSemigroupTol);
    o.le("R2 vs Newton", newton, kNewtonTol);
    return o;
}

Outcome c6() {
    Outcome o;
    // 257 points leave the narrow bumps at α = 0.75 under-resolved for every route (3 to 11% from the continuum).
    const GridSpec r1 = GridSpec::make(make_group("R1"), {10.0}, {1025});
    PolarOptions po;
    po.panels_per_efold = 4;
    double routes = 0, oracle = 0, cov = 0, kinked = 0;
    for (double a : {0.25, 0.5, 0.75})
        for (const auto& f0 : standard_panel(*r1.group)) {
            const ScalarField f = sample(f0, r1);
            const ScalarField pv = frac_sublaplacian_pv(f, a, po), bal = frac_sublaplacian_balakrishnan(f, a);
            // The truncated log is only Lipschitz; its L^α is not in L² near the kinks once α ≥ 1/2.
            if (f0.id == "log_trunc") {
                kinked = std::max(kinked, rel(pv, bal));
                continue;
            }
            const ScalarField fft = frac_sublaplacian_fft(f, a, 32);
            routes = std::max(routes, rel(pv, bal));
            oracle = std::max({oracle, rel(pv, fft), rel(bal, fft)});
            for (double lam : {0.5, 2.0}) {
                const ScalarField fd = dilated(f0, r1, lam);
                ScalarField pd = frac_sublaplacian_pv(fd, a, po), bd = frac_sublaplacian_balakrishnan(fd, a);
                pd *= std::pow(lam, -2 * a);
                bd *= std::pow(lam, -2 * a);
                cov = std::max({cov, rel_values(pd.values, pv.values), rel_values(bd.values, bal.values)});
            }
        }
    o.le("R1 PV-Balakrishnan", routes, kRouteTol);
    o.le("R1 FFT oracle", oracle, kFftOracleTol);
    o.le("R1 covariance", cov, kCovarianceTol);
    o.info("R1 log_trunc PV-Balakrishnan (not gated)", kinked);

    // c-spacing 0.2: the Korányi bump spans |c| < 1/4, so coarser c lattices leave it one plane thick.
    const GridSpec h1 = GridSpec::make(make_group("H1"), {4, 4, 4}, {41, 41, 41});
    for (const std::string id : {"gaussian", "bump"}) {
        const ScalarField f = sample(fn(id), h1);
        const HeatFlow flow(f);
        PolarOptions hpo;
        hpo.stride = 2;
        double worst = 0;
        for (double a : {0.25, 0.5, 0.75})
            worst = std::max(worst, rel(frac_sublaplacian_pv(f, a, hpo), restrict_to_stride(frac_sublaplacian_balakrishnan(flow, a), 2)));
        o.le("H1 " + id + " PV-Balakrishnan", worst, kRouteTol);
    }
    return o;
}

json sweep() { return {{"s", {0.4, 0.6}}, {"alpha", {0.4, 0.6}}, {"p", {2}}, {"q", {2}}, {"lambda", {0.25, 0.5, 1, 2, 4}}}; }

json h1_small() {
    return {{"group", "H1"}, {"grid", {{"extents", {4, 4, 8}}, {"shape", {41, 41, 41}}}},
            {"panel", json::array({fn("gaussian").to_json(), fn("bump").to_json()})}};
}

Outcome c7() {
    Outcome o;
    study_summary(o, "R1", study({{"study", "besov_equiv"}, {"group", "R1"}, {"params", sweep()}}));
    json h = h1_small();
    h["study"] = "besov_equiv";
    h["params"] = sweep();
    study_summary(o, "H1", study(h));
    return o;
}

Outcome c8() {
    Outcome o;
    json p = sweep();
    p["variants"] = {"poisson_grad", "poisson_dt", "poisson_lap"};
    study_summary(o, "R1", study({{"study", "poisson_equiv"}, {"group", "R1"}, {"params", p}}));
    json h = h1_small();
    h["study"] = "poisson_equiv";
    h["params"] = p;
    study_summary(o, "H1", study(h));
    // s = 0.9 ≥ 2α = 0.8 is outside the ∂_t variant's range.
    bool rejected = false;
    try {
        study({{"study", "poisson_equiv"}, {"params", {{"s", {0.9}}, {"alpha", {0.4}}, {"variants", {"poisson_dt"}}}}});
    } catch (const Error& e) {
        rejected = e.kind() == ErrorKind::domain;
    }
    o.is("s<2a gate", rejected);
    return o;
}

Outcome c9() {
    Outcome o;
    for (const std::string grp : {"R1", "R2"}) {
        json j = {{"study", "square_sobolev"},
                  {"group", grp},
                  {"panel", grp == "R1" ? "full" : "reduced"},
                  {"params", {{"s", {0.3, 0.6}}, {"alpha", {0.5}}, {"p", {2}}, {"variants", {"grad", "dt", "hess", "g_phi"}}}}};
        const RatioReport r = study(j);
        study_summary(o, grp, r);
        for (const Band& b : kSquareBands) {
            double lo = INFINITY, hi = 0;
            for (const auto& row : r.rows)
                if (row.inputs.value("variant", "") == b.name) {
                    lo = std::min(lo, row.ratio);
                    hi = std::max(hi, row.ratio);
                }
            o.in(grp + " " + b.name, lo, hi, b);
        }
    }
    return o;
}

Outcome c10() {
    Outcome o;
    const GridSpec g = GridSpec::standard("R2");
    o.le("bmo(const)", bmo_norm(sample(fn("constant"), g)).value, 1e-12);
    std::vector<FieldFunction> fns = standard_panel(*g.group, true);
    for (const auto& f : bmo_pairing_panel(*g.group)) fns.push_back(f);
    double dil = 0;
    for (const auto& f : fns) {
        const double b = bmo_norm(sample(f, g)).value;
        for (double lam : {0.5, 2.0}) {
            BallFamily fam;
            for (double& r : fam.radii) r /= lam;
            dil = std::max(dil, std::abs(bmo_norm(dilated(f, g, lam), fam).value / b - 1));
        }
    }
    o.le("dilation", dil, kBmoDilationTol);
    const RatioReport r = study({{"study", "bmo_carleson"}, {"group", "R2"}, {"params", {{"lambda", {1}}}}});
    o.is("study rows(" + std::to_string(r.rows.size()) + ")", r.passed);
    bool has_log = false;
    for (const auto& row : r.rows) has_log = has_log || row.family.rfind("log_trunc", 0) == 0;
    o.is("log stressor present", has_log);
    o.in("carleson/bmo", r.ratio_min, r.ratio_max, kCarlesonBand);
    return o;
}

// −c_{1,α} ∫ (u(x) − u(x+y))(v(x) − v(x+y)) |y|^{−1−2α} dy on the analytic functions.
double brute_commutator(const FieldFunction& u, const FieldFunction& v, double a, double x) {
    const GroupPtr gp = make_group("R1");
    const GroupSpec& g = *gp;
    const double c1 = std::pow(4.0, a) * std::tgamma(0.5 + a) / (std::sqrt(kPi) * std::abs(std::tgamma(-a)));
    const double ux = u(g, &x), vx = v(g, &x);
    const double R = 60;
    double total = 0;
    for (double side : {-1.0, 1.0}) {
        // y = e^z on [e^{-14}, R], Simpson in z.
        const int n = 400000;
        const double z0 = -14, z1 = std::log(R), h = (z1 - z0) / n;
        double s = 0;
        for (int i = 0; i <= n; ++i) {
            const double y = std::exp(z0 + i * h), xy = x + side * y;
            const double d = (ux - u(g, &xy)) * (vx - v(g, &xy)) * std::pow(y, -2 * a);
            s += (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2)) * d;
        }
        total += s * h / 3 + ux * vx * std::pow(R, -2 * a) / (2 * a);
    }
    return -c1 * total;
}

Outcome c11() {
    Outcome o;
    const GridSpec g = GridSpec::standard("R1");
    const auto panel = standard_panel(*g.group, true);
    // Constant v: every null row within its budget.
    const RatioReport r = study({{"study", "commutator_lp"}, {"group", "R1"}, {"params", {{"alpha", {0.25, 0.5}}, {"p", {2}}}}});
    double worst_null = 0;
    int nulls = 0;
    for (const auto& row : r.rows)
        if (row.kind == "null") {
            ++nulls;
            worst_null = std::max(worst_null, std::abs(row.lhs) - row.error_budget);
        }
    o.is("const-v null rows(" + std::to_string(nulls) + ")", nulls > 0 && worst_null <= 0);
    study_summary(o, "study", r);

    double assembly = 0;
    for (double a : {0.25, 0.5, 0.75})
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const ScalarField u = sample(panel[i], g), v = sample(panel[(i + 1) % panel.size()], g);
            assembly = std::max(assembly, rel(commutator_assembled(u, v, a), commutator(u, v, a)));
        }
    o.le("pointwise vs assembled", assembly, kAssemblyTol);

    FieldFunction u = fn("gaussian"), v = fn("bump");
    u.center = v.center = {0.0};
    const ScalarField us = sample(u, g), vs = sample(v, g);
    double brute = 0;
    for (double a : {0.25, 0.5}) {
        const ScalarField H = commutator(us, vs, a);
        std::vector<double> pts{-1.5, -0.5, 0.0, 0.25, 0.75, 2.0};
        double scale = 0;
        std::vector<double> ref;
        for (double x : pts) {
            ref.push_back(brute_commutator(u, v, a, x));
            scale = std::max(scale, std::abs(ref.back()));
        }
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const double lat = interpolate(H, &pts[k]);
            brute = std::max(brute, std::abs(lat - ref[k]) / std::max(std::abs(ref[k]), 0.1 * scale));
        }
    }
    o.le("brute-force oracle", brute, kBruteForceTol);
    return o;
}

Outcome c12() {
    Outcome o;
    double worst = 0;
    for (double a : {0.3, 0.5, 0.7}) worst = std::max(worst, std::abs(reproducing_check(calderon_scalars(a)) - 1));
    o.le("reproducing check", worst, kReproducingTol);
    const GridSpec g = GridSpec::standard("R2");
    double last = 0;
    bool monotone = true;
    for (double a : {0.3, 0.5, 0.7}) {
        const auto cs = calderon_scalars(a);
        for (const auto& id : {"gaussian", "bump"}) {
            const ScalarField f = sample(fn(id), g);
            double prev = INFINITY;
            for (double w : {10.0, 30.0, 100.0, 1000.0}) {
                const double r = rel(euclidean_reproducing_apply(f, cs, 1 / w, w), f);
                monotone = monotone && r <= prev * (1 + 1e-9);
                prev = r;
            }
            last = std::max(last, prev);
        }
    }
    o.le("R2 residual at window 1e3", last, kEuclidReproTol);
    o.is("monotone in window", monotone);
    return o;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "H1 heat kernel: mass, homogeneity, symmetry", c1},
        {2, "H1 heat: quadrature, PDE and Monte Carlo agree", c2},
        {3, "subordinator: Laplace identity, half-stable form, moments", c3},
        {4, "R1 Poisson kernel at alpha 1/2: closed form and envelope", c4},
        {5, "R3 Riesz kernels: semigroup and Newtonian potential", c5},
        {6, "fractional sub-Laplacian: routes, FFT oracle, covariance", c6},
        {7, "heat vs direct Besov seminorms on R1 and H1", c7},
        {8, "Poisson characterisations on R1 and H1, range gate", c8},
        {9, "square function vs Sobolev norm, g-function constant", c9},
        {10, "BMO: constants, dilation invariance, Carleson ratio", c10},
        {11, "three-term commutator: null rows, assembly, oracle, study", c11},
        {12, "Calderon scalars and Euclidean reproduction", c12},
    };
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!pick.empty() && !pick.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.parts.push_back(std::string("exception: ") + e.what());
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream detail;
        for (std::size_t i = 0; i < o.parts.size(); ++i) detail << (i ? "; " : "") << o.parts[i];
        std::printf("C%-2d %s  %s  [%s] (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.title, detail.str().c_str(), dt);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d criteria failed\n", failed);
    return failed ? 1 : 0;
}
