#include "chg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "chg/error.hpp"
#include "chg/heat_flow.hpp"
#include "chg/kernels.hpp"
#include "chg/operators.hpp"
#include "chg/spaces.hpp"

namespace chg {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------------------------
// JSON helpers

json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

double to_num(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
    }
    fail(ErrorKind::usage, where + " must be a number or \"inf\"");
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::vector<double> to_nums(const json& j, const std::string& where) {
    std::vector<double> out;
    if (!j.is_array()) return {to_num(j, where)};
    for (const auto& x : j) out.push_back(to_num(x, where));
    return out;
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    require(j.is_object(), ErrorKind::usage, where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        require(std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }), ErrorKind::usage,
                "unknown key '" + it.key() + "' in " + where);
}

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "|" : "") + parts[i];
    return s;
}

double conjugate(double p) { return std::isinf(p) ? 1 : (p == 1 ? INFINITY : p / (p - 1)); }

// ---------------------------------------------------------------------------------------------
// Cases

struct Unit {
    std::string label;
    double lambda = 1;
    std::function<std::vector<ReportRow>()> run;
};

std::vector<ReportRow> run_units(const std::vector<Unit>& units, int threads) {
    std::vector<std::vector<ReportRow>> out(units.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < units.size();) {
            try {
                out[i] = units[i].run();
            } catch (const std::exception& e) {
                ReportRow r;
                r.case_id = units[i].label + "|lambda=" + fmt(units[i].lambda);
                r.family = units[i].label;
                r.lambda = units[i].lambda;
                r.status = "error";
                r.message = e.what();
                out[i] = {r};
            }
        }
    };
    const int n = std::max(1, std::min<int>(threads, static_cast<int>(units.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::vector<ReportRow> rows;
    for (auto& v : out)
        for (auto& r : v) rows.push_back(std::move(r));
    return rows;
}

/// lhs ± lhs_err over rhs ± rhs_err; rhs = 0 turns the row into a null row.
ReportRow ratio_row(const std::string& family, double lambda, json inputs, double lhs, double lhs_err, double rhs,
                    double rhs_err) {
    ReportRow r;
    r.family = family;
    r.case_id = family + "|lambda=" + fmt(lambda);
    r.lambda = lambda;
    r.inputs = std::move(inputs);
    r.lhs = lhs;
    r.rhs = rhs;
    if (rhs == 0) {
        r.kind = "null";
        r.error_budget = std::abs(lhs_err);
        return r;
    }
    r.ratio = lhs / rhs;
    r.error_budget = std::abs(lhs_err / rhs) + std::abs(lhs) * std::abs(rhs_err) / (rhs * rhs);
    return r;
}

double rel_err(double err, double size) { return size > 0 ? err / size : 0; }

struct Ctx {
    const StudyConfig& cfg;
    std::vector<FieldFunction> panel, pairing;

    bool lattice() const { return cfg.dilation == "lattice"; }

    ScalarField field(FieldFunction fn, double lam) const {
        const GridSpec& g = cfg.grid;
        if (fn.center.empty()) fn.center.assign(g.dim(), 0.0);
        fn.lambda *= lam;
        if (!lattice()) return sample_field(fn, g);
        const GridSpec gd = g.dilated(lam);
        for (int j = 0; j < gd.dim(); ++j) fn.center[j] /= std::pow(lam, gd.group->degree(j));
        return sample_field(fn, gd);
    }

    BallFamily balls(double lam) const {
        BallFamily fam;
        if (lattice())
            for (double& r : fam.radii) r /= lam;
        return fam;
    }
};

std::vector<std::string> variants_or(const StudyConfig& cfg, std::vector<std::string> def) {
    return cfg.params.variants.empty() ? def : cfg.params.variants;
}

// ---------------------------------------------------------------------------------------------
// Studies

std::vector<Unit> kernel_units(const Ctx& c) {
    const auto& ks = c.cfg.kernel;
    Unit u;
    u.label = "kernel:" + ks.kind;
    u.run = [&c, ks] {
        KernelHandle k = KernelHandle::make(kernel_kind_from_string(ks.kind), c.cfg.group, ks.alpha);
        if (!ks.backend.empty()) k.backend = backend_from_string(ks.backend);
        k.quad.mc_seed = c.cfg.seed;
        const KernelReport kr = kernel_property_report(k, ks.checks);
        std::vector<ReportRow> rows;
        for (const auto& ch : kr.checks) {
            ReportRow r;
            r.family = "kernel:" + ks.kind + ":" + ch.name;
            r.case_id = r.family;
            r.kind = "check";
            r.inputs = {{"check", ch.name}, {"handle", kr.handle}};
            r.lhs = ch.measured;
            r.error_budget = ch.residual;
            r.passed = ch.pass;
            r.message = ch.detail;
            rows.push_back(std::move(r));
        }
        return rows;
    };
    return {u};
}

std::vector<Unit> besov_units(const Ctx& c, bool poisson) {
    const auto& P = c.cfg.params;
    const auto variants = poisson ? variants_or(c.cfg, {"poisson_grad", "poisson_dt", "poisson_lap"})
                                  : std::vector<std::string>{"heat_dt"};
    std::vector<Unit> units;
    for (const auto& fn : c.panel)
        for (double lam : P.lambda) {
            Unit u;
            u.label = fn.label();
            u.lambda = lam;
            u.run = [&c, &P, fn, lam, variants, poisson] {
                const ScalarField f = c.field(fn, lam);
                const HeatFlow flow(f);
                std::vector<ReportRow> rows;
                for (double p : P.p) {
                    SeminormParams base;
                    base.p = p;
                    const ModulusTable tab = modulus_table(f, base);
                    for (const auto& vname : variants)
                        for (double s : P.s)
                            for (double a : P.alpha)
                                for (double q : P.q) {
                                    SeminormParams ph = base;
                                    ph.s = s;
                                    ph.alpha = a;
                                    ph.q = q;
                                    ph.variant = besov_variant_from_string(vname);
                                    const Seminorm L = poisson ? besov_poisson(flow, ph) : besov_heat(flow, ph);
                                    const double order = poisson ? s : a * s;
                                    const Seminorm R = besov_from_table(tab, order, q);
                                    const std::string fam = join({fn.label(), vname, "s=" + fmt(s), "alpha=" + fmt(a),
                                                                  "p=" + fmt(p), "q=" + fmt(q)});
                                    json in = {{"f", fn.to_json()}, {"variant", vname}, {"s", s}, {"alpha", a},
                                               {"p", num(p)}, {"q", q}, {"direct_order", order}};
                                    rows.push_back(ratio_row(fam, lam, in, L.value, L.error_estimate, R.value, R.error_estimate));
                                }
                }
                return rows;
            };
            units.push_back(std::move(u));
        }
    return units;
}

std::vector<Unit> square_units(const Ctx& c) {
    const auto& P = c.cfg.params;
    const auto variants = variants_or(c.cfg, {"grad", "g_phi"});
    std::vector<Unit> units;
    for (const auto& fn : c.panel)
        for (double lam : P.lambda) {
            Unit u;
            u.label = fn.label();
            u.lambda = lam;
            u.run = [&c, &P, fn, lam, variants] {
                const ScalarField f = c.field(fn, lam);
                std::vector<ReportRow> rows;
                for (const auto& vname : variants) {
                    if (vname == "g_phi") {
                        for (double a : P.alpha) {
                            PhiParams ph;
                            ph.alpha = a;
                            const ScalarField g = square_function(f, ph);
                            for (double p : P.p) {
                                const std::string fam = join({fn.label(), "g_phi", "alpha=" + fmt(a), "p=" + fmt(p)});
                                json in = {{"f", fn.to_json()}, {"variant", "g_phi"}, {"alpha", a}, {"p", num(p)}};
                                rows.push_back(ratio_row(fam, lam, in, lp_norm(g, p), 0, lp_norm(f, p), 0));
                            }
                        }
                        continue;
                    }
                    const SobolevVariant v = sobolev_variant_from_string(vname);
                    for (double s : P.s)
                        for (double a : P.alpha)
                            for (double p : P.p) {
                                const SquareSobolev r = square_norm_vs_sobolev(f, s, p, a, v);
                                const std::string fam =
                                    join({fn.label(), vname, "s=" + fmt(s), "alpha=" + fmt(a), "p=" + fmt(p)});
                                json in = {{"f", fn.to_json()}, {"variant", vname}, {"s", s}, {"alpha", a}, {"p", num(p)}};
                                const double lhs_err = r.ratio > 0 ? r.lhs * r.error_budget / r.ratio : 0;
                                rows.push_back(ratio_row(fam, lam, in, r.lhs, lhs_err, r.rhs, 0));
                            }
                }
                return rows;
            };
            units.push_back(std::move(u));
        }
    return units;
}

std::vector<Unit> bmo_units(const Ctx& c) {
    const auto& P = c.cfg.params;
    const auto variants = variants_or(c.cfg, {"grad"});
    std::vector<FieldFunction> fns = c.panel;
    fns.insert(fns.end(), c.pairing.begin(), c.pairing.end());
    std::vector<Unit> units;
    for (const auto& fn : fns)
        for (double lam : P.lambda) {
            Unit u;
            u.label = fn.label();
            u.lambda = lam;
            u.run = [&c, &P, fn, lam, variants] {
                const ScalarField f = c.field(fn, lam);
                const BallFamily fam = c.balls(lam);
                const Seminorm b = bmo_norm(f, fam);
                std::vector<ReportRow> rows;
                for (const auto& vname : variants)
                    for (double a : P.alpha) {
                        PhiParams ph;
                        ph.variant = phi_variant_from_string(vname);
                        ph.alpha = a;
                        const Seminorm cs = carleson_functional(f, ph, fam);
                        const std::string family = join({fn.label(), "carleson_" + vname, "alpha=" + fmt(a)});
                        json in = {{"f", fn.to_json()}, {"variant", vname}, {"alpha", a}};
                        rows.push_back(ratio_row(family, lam, in, cs.value, cs.error_estimate, b.value, b.error_estimate));
                    }
                return rows;
            };
            units.push_back(std::move(u));
        }
    Unit k;
    k.label = "constant";
    k.run = [&c] {
        FieldFunction one;
        one.id = "constant";
        const ScalarField f = c.field(one, 1);
        const double b = bmo_norm(f, c.balls(1)).value;
        return std::vector<ReportRow>{ratio_row("constant|bmo", 1, {{"f", one.to_json()}}, b, 1e-12, 0, 0)};
    };
    units.push_back(std::move(k));
    return units;
}

// Memoised L^{s/2} f on one flow, with its relative L² error.
struct Powers {
    const HeatFlow& flow;
    std::map<double, std::pair<ScalarField, double>> memo;
    const std::pair<ScalarField, double>& get(double s) {
        auto it = memo.find(s);
        if (it != memo.end()) return it->second;
        if (s == 0) return memo.emplace(s, std::make_pair(flow.base(), 0.0)).first->second;
        OpReport rep;
        ScalarField v = sobolev_power(flow, s, &rep);
        const double e = rel_err(rep.error_budget, lp_norm(v, 2));
        return memo.emplace(s, std::make_pair(std::move(v), e)).first->second;
    }
};

std::vector<Unit> integral_units(const Ctx& c) {
    const auto& P = c.cfg.params;
    const auto variants = variants_or(c.cfg, {"trilinear", "bmo"});
    const std::size_t n = c.panel.size();
    std::vector<Unit> units;
    for (const auto& vname : variants)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t m = vname == "bmo" ? c.pairing.size() : 1;
            for (std::size_t j = 0; j < m; ++j)
                for (double lam : P.lambda) {
                    const FieldFunction f = c.panel[i], g = c.panel[(i + 1) % n];
                    const FieldFunction h = vname == "bmo" ? c.pairing[j] : c.panel[(i + 2) % n];
                    Unit u;
                    u.label = join({vname, f.label(), g.label(), h.label()});
                    u.lambda = lam;
                    u.run = [&c, &P, f, g, h, lam, vname] {
                        const HeatFlow Ff(c.field(f, lam)), Fg(c.field(g, lam)), Fh(c.field(h, lam));
                        Powers pf{Ff, {}}, pg{Fg, {}}, ph{Fh, {}};
                        std::vector<ReportRow> rows;
                        const json fgh = {{"f", f.to_json()}, {"g", g.to_json()}, {"h", h.to_json()}};
                        if (vname == "trilinear") {
                            for (std::size_t k = 0; k < P.p1.size(); ++k)
                                for (double s1 : P.s1)
                                    for (double s2 : P.s2)
                                        for (double s3 : P.s3)
                                            for (double a : P.alpha) {
                                                const double p1 = P.p1[k], p2 = P.p2[k], p3 = P.p3[k];
                                                const Seminorm L = extension_product_integral(
                                                    {{&Ff, ExtFactor::tilde_grad}, {&Fg, ExtFactor::tilde_grad}, {&Fh, ExtFactor::value}},
                                                    a, 2 - s1 - s2 + s3);
                                                const auto& A = pf.get(s1);
                                                const auto& B = pg.get(s2);
                                                const auto& C = ph.get(-s3);
                                                const double R = lp_norm(A.first, p1) * lp_norm(B.first, p2) * lp_norm(C.first, p3);
                                                json in = fgh;
                                                in.update({{"s1", s1}, {"s2", s2}, {"s3", s3}, {"alpha", a}, {"p1", p1}, {"p2", p2}, {"p3", p3}});
                                                const std::string fam =
                                                    join({"trilinear", f.label(), g.label(), h.label(), "s1=" + fmt(s1), "s2=" + fmt(s2),
                                                          "s3=" + fmt(s3), "alpha=" + fmt(a), "p=" + fmt(p1) + "," + fmt(p2) + "," + fmt(p3)});
                                                rows.push_back(ratio_row(fam, lam, in, L.value, L.error_estimate, R,
                                                                         R * (A.second + B.second + C.second)));
                                            }
                        } else {
                            const double b = bmo_norm(Fh.base(), c.balls(lam)).value;
                            for (double s : P.s)
                                for (double a : P.alpha)
                                    for (double p : P.p) {
                                        const double q = conjugate(p);
                                        const Seminorm L = extension_product_integral(
                                            {{&Fh, ExtFactor::tilde_grad}, {&Ff, ExtFactor::dt}, {&Fg, ExtFactor::value}}, a, 2 - s);
                                        const auto& A = pf.get(s);
                                        const double R = b * lp_norm(A.first, p) * lp_norm(Fg.base(), q);
                                        json in = fgh;
                                        in.update({{"s", s}, {"alpha", a}, {"p", p}, {"q", num(q)}});
                                        const std::string fam = join({"bmo", f.label(), g.label(), h.label(), "s=" + fmt(s),
                                                                      "alpha=" + fmt(a), "p=" + fmt(p)});
                                        rows.push_back(ratio_row(fam, lam, in, L.value, L.error_estimate, R, R * A.second));
                                    }
                        }
                        return rows;
                    };
                    units.push_back(std::move(u));
                }
        }
    return units;
}

// ‖v‖ with a relative L² error, as an absolute L^p error estimate.
double lp_err(const ScalarField& v, double p, double abs_l2) { return lp_norm(v, p) * rel_err(abs_l2, lp_norm(v, 2)); }

std::vector<Unit> commutator_lp_units(const Ctx& c) {
    const auto& P = c.cfg.params;
    const auto variants = variants_or(c.cfg, {"bmo"});
    const std::size_t n = c.panel.size();
    std::vector<Unit> units;
    std::vector<FieldFunction> vs = c.pairing;
    FieldFunction one;
    one.id = "constant";
    vs.push_back(one);
    for (const auto& vname : variants)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t m = vname == "bmo" ? vs.size() : 1;
            for (std::size_t j = 0; j < m; ++j)
                for (double lam : P.lambda) {
                    const FieldFunction uf = c.panel[i];
                    const FieldFunction vf = vname == "bmo" ? vs[j] : c.panel[(i + 1) % n];
                    Unit unit;
                    unit.label = join({vname, uf.label(), vf.label()});
                    unit.lambda = lam;
                    unit.run = [&c, &P, uf, vf, lam, vname] {
                        const ScalarField u = c.field(uf, lam), v = c.field(vf, lam);
                        const HeatFlow Fu(u);
                        const json uv = {{"u", uf.to_json()}, {"v", vf.to_json()}};
                        std::vector<ReportRow> rows;
                        if (vname == "bmo") {
                            const double b = bmo_norm(v, c.balls(lam)).value;
                            for (double a : P.alpha) {
                                OpReport rc, rl;
                                const ScalarField H = commutator(u, v, a, {}, &rc);
                                const ScalarField Lu = frac_sublaplacian_balakrishnan(Fu, a, &rl);
                                for (double p : P.p) {
                                    const double lhs = lp_norm(H, p);
                                    // Roundoff floor for the constant-v rows, where the commutator vanishes exactly.
                                    const double lhs_err = (lhs > 0 ? lp_err(H, p, rc.error_budget) : rc.error_budget) +
                                                           1e-12 * lp_norm(Lu, p) * lp_norm(v, INFINITY);
                                    const double rhs = lp_norm(Lu, p) * b;
                                    json in = uv;
                                    in.update({{"alpha", a}, {"p", num(p)}});
                                    const std::string fam =
                                        join({"bmo", uf.label(), vf.label(), "alpha=" + fmt(a), "p=" + fmt(p)});
                                    rows.push_back(ratio_row(fam, lam, in, lhs, lhs_err, rhs, b * lp_err(Lu, p, rl.error_budget)));
                                }
                            }
                        } else {
                            const HeatFlow Fv(v);
                            for (double a : P.alpha)
                                for (double a1 : P.alpha1) {
                                    OpReport rc, r1, r2;
                                    const ScalarField H = commutator(u, v, a, {}, &rc);
                                    const ScalarField Lu = frac_sublaplacian_balakrishnan(Fu, a1, &r1);
                                    const ScalarField Lv = frac_sublaplacian_balakrishnan(Fv, a - a1, &r2);
                                    for (std::size_t k = 0; k < P.p1.size(); ++k) {
                                        const double p1 = P.p1[k], p2 = P.p2[k], p = 1 / (1 / p1 + 1 / p2);
                                        const double lhs = lp_norm(H, p);
                                        const double A = lp_norm(Lu, p1), B = lp_norm(Lv, p2);
                                        const double rhs_err = A * lp_err(Lv, p2, r2.error_budget) + B * lp_err(Lu, p1, r1.error_budget);
                                        json in = uv;
                                        in.update({{"alpha", a}, {"alpha1", a1}, {"p1", p1}, {"p2", p2}});
                                        const std::string fam = join({"split", uf.label(), vf.label(), "alpha=" + fmt(a),
                                                                      "alpha1=" + fmt(a1), "p=" + fmt(p1) + "," + fmt(p2)});
                                        rows.push_back(ratio_row(fam, lam, in, lhs, lp_err(H, p, rc.error_budget), A * B, rhs_err));
                                    }
                                }
                        }
                        return rows;
                    };
                    units.push_back(std::move(unit));
                }
        }
    return units;
}

std::vector<Unit> pairing_units(const Ctx& c, bool chanillo) {
    const auto& P = c.cfg.params;
    const std::size_t n = c.panel.size();
    std::vector<Unit> units;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& bf : c.pairing)
            for (double lam : P.lambda) {
                const FieldFunction uf = c.panel[i], wf = c.panel[(i + 1) % n];
                Unit unit;
                unit.label = join({chanillo ? "chanillo" : "pairing", uf.label(), wf.label(), bf.label()});
                unit.lambda = lam;
                unit.run = [&c, &P, uf, wf, bf, lam, chanillo] {
                    const ScalarField u = c.field(uf, lam), w = c.field(wf, lam), B = c.field(bf, lam);
                    const HeatFlow Fu(u), Fw(w), Fb(B);
                    const double b = bmo_norm(B, c.balls(lam)).value;
                    std::vector<ReportRow> rows;
                    if (chanillo) {
                        // v = B is the BMO factor; u and h = w carry the derivatives.
                        Powers pu{Fu, {}}, pw{Fw, {}};
                        for (std::size_t k = 0; k < P.s.size(); ++k) {
                            const double s = P.s[k], p = P.p[k], r = P.r[k];
                            const auto& Lu = pu.get(s);
                            const auto& Lh = pw.get(s);
                            const ScalarField diff = multiply(w, Lu.first) - multiply(u, Lh.first);
                            const double lhs = std::abs(multiply(B, diff).integral());
                            const double lhs_err = lp_norm(multiply(B, w), 2) * Lu.second * lp_norm(Lu.first, 2) +
                                                   lp_norm(multiply(B, u), 2) * Lh.second * lp_norm(Lh.first, 2);
                            const double A = lp_norm(Lu.first, p), C = lp_norm(Lh.first, r);
                            json in = {{"u", uf.to_json()}, {"h", wf.to_json()}, {"v", bf.to_json()}, {"s", s}, {"p", p}, {"r", r}};
                            const std::string fam = join({"chanillo", uf.label(), wf.label(), bf.label(), "s=" + fmt(s),
                                                          "p=" + fmt(p), "r=" + fmt(r)});
                            rows.push_back(ratio_row(fam, lam, in, lhs, lhs_err, b * A * C, b * A * C * (Lu.second + Lh.second)));
                        }
                    } else {
                        // u, v = w carry the commutator; h = B is the BMO pairing function.
                        for (double a : P.alpha) {
                            OpReport rc, ru, rv, rh;
                            const ScalarField H = commutator(u, w, a, {}, &rc);
                            const ScalarField Lu = frac_sublaplacian_balakrishnan(Fu, a, &ru);
                            const ScalarField Lv = frac_sublaplacian_balakrishnan(Fw, a, &rv);
                            const ScalarField Lh = frac_sublaplacian_balakrishnan(Fb, a, &rh);
                            const double lhs = std::abs(multiply(H, Lh).integral());
                            const double lhs_err = rc.error_budget * lp_norm(Lh, 2) + lp_norm(H, 2) * rh.error_budget;
                            for (double p : P.p) {
                                const double q = conjugate(p);
                                const double A = lp_norm(Lu, p), C = lp_norm(Lv, q);
                                const double rhs_err = b * (A * lp_err(Lv, q, rv.error_budget) + C * lp_err(Lu, p, ru.error_budget));
                                json in = {{"u", uf.to_json()}, {"v", wf.to_json()}, {"h", bf.to_json()}, {"alpha", a}, {"p", p}, {"q", num(q)}};
                                const std::string fam = join({"pairing", uf.label(), wf.label(), bf.label(), "alpha=" + fmt(a),
                                                              "p=" + fmt(p)});
                                rows.push_back(ratio_row(fam, lam, in, lhs, lhs_err, b * A * C, rhs_err));
                            }
                        }
                    }
                    return rows;
                };
                units.push_back(std::move(unit));
            }
    return units;
}

// ---------------------------------------------------------------------------------------------
// Gating

void gate(bool ok, const std::string& msg) { require(ok, ErrorKind::domain, msg); }

void gate_p(double p, const std::string& study, const std::string& name) {
    gate(p > 1 && std::isfinite(p), study + " requires 1 < " + name + " < inf (got " + fmt(p) + ")");
}

bool in_list(const std::string& s, std::initializer_list<const char*> l) {
    return std::any_of(l.begin(), l.end(), [&](const char* x) { return s == x; });
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Enums

std::string to_string(StudyId s) {
    switch (s) {
        case StudyId::kernel_verify: return "kernel_verify";
        case StudyId::besov_equiv: return "besov_equiv";
        case StudyId::poisson_equiv: return "poisson_equiv";
        case StudyId::square_sobolev: return "square_sobolev";
        case StudyId::bmo_carleson: return "bmo_carleson";
        case StudyId::integral_ineq: return "integral_ineq";
        case StudyId::commutator_lp: return "commutator_lp";
        case StudyId::commutator_pairing: return "commutator_pairing";
        case StudyId::chanillo: return "chanillo";
    }
    return "?";
}

StudyId study_id_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(StudyId::chanillo); ++i)
        if (to_string(static_cast<StudyId>(i)) == s) return static_cast<StudyId>(i);
    fail(ErrorKind::usage, "unknown study '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// Config

StudyConfig StudyConfig::from_json(const json& j) {
    check_keys(j, {"schema", "study", "group", "grid", "panel", "pairing_panel", "dilation", "params", "kernel", "seed",
                   "tolerances", "tol_scale", "threads", "output"},
               "config");
    require(j.contains("schema") && j.at("schema") == kReportSchema, ErrorKind::usage,
            std::string("config schema must be \"") + kReportSchema + "\"");
    require(j.contains("study"), ErrorKind::usage, "config needs a study");
    StudyConfig c;
    c.study = study_id_from_string(j.at("study").get<std::string>());
    c.group = j.value("group", c.group);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, {"group", "extents", "shape"}, "grid");
        require(!g.contains("group") || g.at("group") == c.group, ErrorKind::usage, "grid group differs from config group");
        c.grid = GridSpec::make(make_group(c.group), g.at("extents").get<std::vector<double>>(), g.at("shape").get<std::vector<int>>());
    } else {
        c.grid = GridSpec::standard(c.group);
    }
    if (j.contains("panel")) {
        const auto& p = j.at("panel");
        if (p.is_string()) {
            c.panel = p.get<std::string>();
            require(c.panel == "reduced" || c.panel == "full", ErrorKind::usage, "panel must be \"reduced\", \"full\" or a list");
        } else {
            require(p.is_array() && !p.empty(), ErrorKind::usage, "panel must be \"reduced\", \"full\" or a non-empty list");
            c.panel = "custom";
            for (const auto& f : p) c.panel_functions.push_back(FieldFunction::from_json(f));
        }
    }
    if (j.contains("pairing_panel")) {
        require(j.at("pairing_panel").is_array(), ErrorKind::usage, "pairing_panel must be a list");
        for (const auto& f : j.at("pairing_panel")) c.pairing_functions.push_back(FieldFunction::from_json(f));
    }
    c.dilation = j.value("dilation", c.dilation);
    if (j.contains("params")) {
        const auto& P = j.at("params");
        check_keys(P, {"s", "alpha", "p", "q", "lambda", "variants", "s1", "s2", "s3", "p1", "p2", "p3", "r", "alpha1"}, "params");
        auto rd = [&](const char* k, std::vector<double>& v) {
            if (P.contains(k)) v = to_nums(P.at(k), std::string("params.") + k);
        };
        rd("s", c.params.s);
        rd("alpha", c.params.alpha);
        rd("p", c.params.p);
        rd("q", c.params.q);
        rd("lambda", c.params.lambda);
        rd("s1", c.params.s1);
        rd("s2", c.params.s2);
        rd("s3", c.params.s3);
        rd("p1", c.params.p1);
        rd("p2", c.params.p2);
        rd("p3", c.params.p3);
        rd("r", c.params.r);
        rd("alpha1", c.params.alpha1);
        if (P.contains("variants")) c.params.variants = P.at("variants").get<std::vector<std::string>>();
    }
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        check_keys(k, {"kind", "backend", "alpha", "checks"}, "kernel");
        c.kernel.kind = k.value("kind", c.kernel.kind);
        c.kernel.backend = k.value("backend", c.kernel.backend);
        c.kernel.alpha = k.value("alpha", c.kernel.alpha);
        c.kernel.checks = k.value("checks", c.kernel.checks);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        check_keys(t, {"drift", "ratio_min", "ratio_max"}, "tolerances");
        if (t.contains("drift")) c.tolerances.drift = to_num(t.at("drift"), "tolerances.drift");
        if (t.contains("ratio_min")) c.tolerances.ratio_min = to_num(t.at("ratio_min"), "tolerances.ratio_min");
        if (t.contains("ratio_max")) c.tolerances.ratio_max = to_num(t.at("ratio_max"), "tolerances.ratio_max");
    }
    c.tol_scale = j.value("tol_scale", c.tol_scale);
    c.threads = j.value("threads", c.threads);
    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, {"dir", "format"}, "output");
        c.output_dir = o.value("dir", c.output_dir);
        c.output_format = o.value("format", c.output_format);
    }
    c.validate();
    return c;
}

json StudyConfig::to_json() const {
    json j = {{"schema", kReportSchema},
              {"study", to_string(study)},
              {"group", group},
              {"grid", {{"extents", grid.extents}, {"shape", grid.shape}}},
              {"dilation", dilation},
              {"seed", seed},
              {"tol_scale", tol_scale},
              {"threads", threads},
              {"output", {{"dir", output_dir}, {"format", output_format}}}};
    if (panel == "custom") {
        json a = json::array();
        for (const auto& f : panel_functions) a.push_back(f.to_json());
        j["panel"] = a;
    } else {
        j["panel"] = panel;
    }
    if (!pairing_functions.empty()) {
        json a = json::array();
        for (const auto& f : pairing_functions) a.push_back(f.to_json());
        j["pairing_panel"] = a;
    }
    j["params"] = {{"s", nums(params.s)},   {"alpha", nums(params.alpha)}, {"p", nums(params.p)},
                   {"q", nums(params.q)},   {"lambda", nums(params.lambda)}, {"variants", params.variants},
                   {"s1", nums(params.s1)}, {"s2", nums(params.s2)},     {"s3", nums(params.s3)},
                   {"p1", nums(params.p1)}, {"p2", nums(params.p2)},     {"p3", nums(params.p3)},
                   {"r", nums(params.r)},   {"alpha1", nums(params.alpha1)}};
    j["kernel"] = {{"kind", kernel.kind}, {"backend", kernel.backend}, {"alpha", kernel.alpha}, {"checks", kernel.checks}};
    j["tolerances"] = {{"drift", num(tolerances.drift)}, {"ratio_min", num(tolerances.ratio_min)},
                       {"ratio_max", num(tolerances.ratio_max)}};
    return j;
}

std::vector<FieldFunction> StudyConfig::panel_set() const {
    if (panel == "custom") return panel_functions;
    return standard_panel(*grid.group, panel == "reduced");
}

std::vector<FieldFunction> StudyConfig::pairing_set() const {
    return pairing_functions.empty() ? bmo_pairing_panel(*grid.group) : pairing_functions;
}

void StudyConfig::validate() const {
    const std::string st = to_string(study);
    grid.validate();
    require(grid.group->name == group, ErrorKind::usage, "grid group differs from config group");
    require(dilation == "lattice" || dilation == "function", ErrorKind::usage, "dilation must be \"lattice\" or \"function\"");
    require(threads >= 1, ErrorKind::usage, "threads must be >= 1");
    require(tol_scale >= 0 && std::isfinite(tol_scale), ErrorKind::usage, "tol_scale must be a finite number >= 0");
    require(output_format == "json" || output_format == "csv", ErrorKind::usage, "output format must be json or csv");
    require(tolerances.drift >= 0 && tolerances.ratio_min >= 0 && tolerances.ratio_max > tolerances.ratio_min,
            ErrorKind::usage, "tolerances need drift >= 0 and 0 <= ratio_min < ratio_max");
    require(!panel_set().empty(), ErrorKind::usage, "empty panel");
    for (double l : params.lambda) gate(l > 0 && std::isfinite(l), "dilations lambda must be positive");
    for (double a : params.alpha) gate(a > 0 && a < 1, st + " requires alpha in (0,1)");
    const int Q = grid.group->Q;
    const auto& P = params;
    auto variants = [&](std::initializer_list<const char*> allowed) {
        for (const auto& v : P.variants) {
            std::string names;
            for (const char* a : allowed) names += std::string(names.empty() ? "" : ", ") + a;
            require(in_list(v, allowed), ErrorKind::usage, "unknown " + st + " variant '" + v + "' (expected " + names + ")");
        }
    };
    switch (study) {
        case StudyId::kernel_verify: {
            kernel_kind_from_string(kernel.kind);
            if (!kernel.backend.empty()) backend_from_string(kernel.backend);
            require(!kernel.checks.empty(), ErrorKind::usage, "kernel_verify needs at least one check");
            for (const auto& ch : kernel.checks)
                require(in_list(ch, {"mass", "homogeneity", "symmetry", "gaussian_sandwich", "decay_bound", "semigroup"}),
                        ErrorKind::usage, "unknown kernel check '" + ch + "'");
            break;
        }
        case StudyId::besov_equiv:
            variants({"heat_dt"});
            for (double s : P.s)
                for (double a : P.alpha)
                    for (double p : P.p)
                        for (double q : P.q) {
                            SeminormParams h{s, p, q, a, BesovVariant::heat_dt};
                            check_seminorm_range(h);
                            SeminormParams d{a * s, p, q, a, BesovVariant::direct};
                            check_seminorm_range(d);
                        }
            break;
        case StudyId::poisson_equiv:
            variants({"poisson_grad", "poisson_dt", "poisson_lap"});
            for (const auto& v : P.variants.empty() ? std::vector<std::string>{"poisson_grad", "poisson_dt", "poisson_lap"} : P.variants)
                for (double s : P.s)
                    for (double a : P.alpha)
                        for (double p : P.p)
                            for (double q : P.q) {
                                SeminormParams h{s, p, q, a, besov_variant_from_string(v)};
                                check_seminorm_range(h);
                                SeminormParams d{s, p, q, a, BesovVariant::direct};
                                check_seminorm_range(d);
                            }
            break;
        case StudyId::square_sobolev:
            variants({"grad", "dt", "hess", "g_phi"});
            for (const auto& v : P.variants.empty() ? std::vector<std::string>{"grad", "g_phi"} : P.variants)
                for (double a : P.alpha)
                    for (double p : P.p) {
                        if (v == "g_phi") {
                            gate_p(p, st + " (g_phi)", "p");
                            continue;
                        }
                        for (double s : P.s) check_square_sobolev_range(Q, s, p, a, sobolev_variant_from_string(v));
                    }
            break;
        case StudyId::bmo_carleson:
            variants({"grad", "dt", "lap", "grad_dt"});
            for (const auto& v : P.variants)
                for (double a : P.alpha) {
                    PhiParams ph;
                    ph.variant = phi_variant_from_string(v);
                    ph.alpha = a;
                    check_phi_range(ph);
                }
            break;
        case StudyId::integral_ineq: {
            variants({"trilinear", "bmo"});
            const auto vs = P.variants.empty() ? std::vector<std::string>{"trilinear", "bmo"} : P.variants;
            if (std::find(vs.begin(), vs.end(), "trilinear") != vs.end()) {
                require(P.p1.size() == P.p2.size() && P.p2.size() == P.p3.size(), ErrorKind::usage,
                        "integral_ineq zips p1, p2, p3: the lists need equal lengths");
                for (std::size_t k = 0; k < P.p1.size(); ++k) {
                    gate_p(P.p1[k], st, "p1");
                    gate_p(P.p2[k], st, "p2");
                    gate_p(P.p3[k], st, "p3");
                    gate(std::abs(1 / P.p1[k] + 1 / P.p2[k] + 1 / P.p3[k] - 1) <= 1e-9, st + " requires 1/p1 + 1/p2 + 1/p3 = 1");
                }
                for (double a : P.alpha) {
                    const double top = std::min(1.0, 2 * a);
                    for (double s1 : P.s1) gate(s1 > 0 && s1 < top, st + " requires s1 in (0, min(1, 2α))");
                    for (double s2 : P.s2) gate(s2 > 0 && s2 < top, st + " requires s2 in (0, min(1, 2α))");
                }
                for (double s3 : P.s3) gate(s3 >= 0 && s3 < Q, st + " requires 0 <= s3 < Q");
            }
            if (std::find(vs.begin(), vs.end(), "bmo") != vs.end()) {
                for (double p : P.p) gate_p(p, st, "p");
                for (double a : P.alpha)
                    for (double s : P.s) gate(s > 0 && s < 2 * a && s <= 2, st + " (bmo form) requires s in (0, 2α)");
            }
            break;
        }
        case StudyId::commutator_lp: {
            variants({"bmo", "split"});
            for (double a : P.alpha) gate(a > 0 && a <= 0.5, st + " requires α in (0, 1/2]");
            const auto vs = P.variants.empty() ? std::vector<std::string>{"bmo"} : P.variants;
            if (std::find(vs.begin(), vs.end(), "bmo") != vs.end())
                for (double p : P.p) gate_p(p, st, "p");
            if (std::find(vs.begin(), vs.end(), "split") != vs.end()) {
                require(P.p1.size() == P.p2.size(), ErrorKind::usage, "commutator_lp zips p1, p2: the lists need equal lengths");
                for (std::size_t k = 0; k < P.p1.size(); ++k) {
                    gate_p(P.p1[k], st, "p1");
                    gate_p(P.p2[k], st, "p2");
                }
                for (double a : P.alpha)
                    for (double a1 : P.alpha1)
                        gate(a1 > 0 && a1 < 0.5 && a - a1 > 0 && a - a1 < 0.5,
                             st + " (split form) requires α = α1 + α2 with α1, α2 in (0, 1/2)");
            }
            break;
        }
        case StudyId::commutator_pairing:
            variants({});
            for (double a : P.alpha) gate(2 * a <= 1, st + " requires 2α <= 1");
            for (double p : P.p) gate_p(p, st, "p");
            break;
        case StudyId::chanillo:
            variants({});
            require(P.s.size() == P.p.size() && P.p.size() == P.r.size(), ErrorKind::usage,
                    "chanillo zips s, p, r: the lists need equal lengths");
            for (std::size_t k = 0; k < P.s.size(); ++k) {
                gate(P.s[k] > 0 && P.s[k] < std::min(2, Q), st + " requires s in (0, min(2, Q))");
                gate_p(P.p[k], st, "p");
                gate_p(P.r[k], st, "r");
                gate(std::abs(1 / P.p[k] + 1 / P.r[k] - P.s[k] / Q - 1) <= 1e-9, st + " requires 1/p + 1/r - s/Q = 1");
            }
            break;
    }
}

// ---------------------------------------------------------------------------------------------
// Report

void finalize_report(RatioReport& rep, const StudyConfig& cfg) {
    const double tol = cfg.tolerances.drift * cfg.tol_scale;
    const double half = 0.5 * std::log1p(tol);
    auto usable = [](const ReportRow& r) {
        return r.status == "ok" && r.kind == "ratio" && std::isfinite(r.ratio) && r.ratio > 0;
    };
    std::map<std::string, std::pair<double, double>> fam;  // family → (min, max)
    for (const auto& r : rep.rows)
        if (usable(r)) {
            auto [it, fresh] = fam.emplace(r.family, std::make_pair(r.ratio, r.ratio));
            if (!fresh) {
                it->second.first = std::min(it->second.first, r.ratio);
                it->second.second = std::max(it->second.second, r.ratio);
            }
        }
    rep.ratio_min = INFINITY;
    rep.ratio_max = 0;
    rep.dilation_drift = 0;
    bool drift_ok = true, min_ok = true, max_ok = true;
    std::size_t failed = 0, usable_rows = 0;
    for (auto& r : rep.rows) {
        if (r.status != "ok") {
            r.passed = false;
        } else if (r.kind == "check") {
            // pass flag set by the producing check
        } else if (r.kind == "null") {
            r.message.clear();
            r.passed = std::abs(r.lhs) <= r.error_budget;
            if (!r.passed) r.message = "lhs " + fmt(r.lhs) + " exceeds error budget " + fmt(r.error_budget);
        } else if (!usable(r)) {
            r.passed = false;
            r.message = "ratio is not a positive finite number";
        } else {
            r.message.clear();
            ++usable_rows;
            rep.ratio_min = std::min(rep.ratio_min, r.ratio);
            rep.ratio_max = std::max(rep.ratio_max, r.ratio);
            const auto [lo, hi] = fam.at(r.family);
            rep.dilation_drift = std::max(rep.dilation_drift, hi / lo - 1);
            const double rel = r.error_budget / r.ratio;
            const double dev = std::abs(std::log(r.ratio / std::sqrt(lo * hi)));
            r.passed = true;
            if (dev > half + rel) {
                r.passed = drift_ok = false;
                r.message = "family drift " + fmt(hi / lo - 1) + " exceeds " + fmt(tol);
            }
            if (r.ratio + r.error_budget < cfg.tolerances.ratio_min) {
                r.passed = min_ok = false;
                r.message = "ratio below " + fmt(cfg.tolerances.ratio_min);
            }
            if (r.ratio - r.error_budget > cfg.tolerances.ratio_max) {
                r.passed = max_ok = false;
                r.message = "ratio above " + fmt(cfg.tolerances.ratio_max);
            }
        }
        if (!r.passed) ++failed;
    }
    if (usable_rows == 0) rep.ratio_min = 0;
    rep.spread = usable_rows ? rep.ratio_max / rep.ratio_min : 0;
    rep.checks.clear();
    rep.checks.push_back({"rows_failed", static_cast<double>(failed), 0, failed == 0});
    if (usable_rows) {
        rep.checks.push_back({"dilation_drift", rep.dilation_drift, tol, drift_ok});
        rep.checks.push_back({"spread_finite", rep.spread, INFINITY, std::isfinite(rep.spread)});
        if (cfg.tolerances.ratio_min > 0) rep.checks.push_back({"ratio_min", rep.ratio_min, cfg.tolerances.ratio_min, min_ok});
        if (std::isfinite(cfg.tolerances.ratio_max))
            rep.checks.push_back({"ratio_max", rep.ratio_max, cfg.tolerances.ratio_max, max_ok});
    }
    rep.passed = !rep.rows.empty() && std::all_of(rep.checks.begin(), rep.checks.end(), [](const ReportCheck& c) { return c.passed; });
}

RatioReport run_study(const StudyConfig& cfg) {
    cfg.validate();
    Ctx c{cfg, cfg.panel_set(), cfg.pairing_set()};
    std::vector<Unit> units;
    switch (cfg.study) {
        case StudyId::kernel_verify: units = kernel_units(c); break;
        case StudyId::besov_equiv: units = besov_units(c, false); break;
        case StudyId::poisson_equiv: units = besov_units(c, true); break;
        case StudyId::square_sobolev: units = square_units(c); break;
        case StudyId::bmo_carleson: units = bmo_units(c); break;
        case StudyId::integral_ineq: units = integral_units(c); break;
        case StudyId::commutator_lp: units = commutator_lp_units(c); break;
        case StudyId::commutator_pairing: units = pairing_units(c, false); break;
        case StudyId::chanillo: units = pairing_units(c, true); break;
    }
    RatioReport rep;
    rep.study = cfg.study;
    rep.config = cfg.to_json();
    rep.config.erase("threads");
    rep.config.erase("output");
    rep.rows = run_units(units, cfg.threads);
    rep.environment = {{"version", kLibraryVersion}, {"seed", cfg.seed}, {"grid", cfg.grid.to_json()}, {"dilation", cfg.dilation}};
    finalize_report(rep, cfg);
    return rep;
}

json RatioReport::to_json() const {
    json rs = json::array();
    for (const auto& r : rows)
        rs.push_back({{"case", r.case_id},
                      {"family", r.family},
                      {"lambda", num(r.lambda)},
                      {"inputs", r.inputs},
                      {"kind", r.kind},
                      {"lhs", num(r.lhs)},
                      {"rhs", num(r.rhs)},
                      {"ratio", num(r.ratio)},
                      {"error_budget", num(r.error_budget)},
                      {"passed", r.passed},
                      {"status", r.status},
                      {"message", r.message}});
    json cs = json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"value", num(c.value)}, {"limit", num(c.limit)}, {"passed", c.passed}});
    return {{"schema", kReportSchema},
            {"study", to_string(study)},
            {"config", config},
            {"environment", environment},
            {"rows", rs},
            {"aggregates",
             {{"ratio_min", num(ratio_min)}, {"ratio_max", num(ratio_max)}, {"spread", num(spread)}, {"dilation_drift", num(dilation_drift)}}},
            {"checks", cs},
            {"passed", passed}};
}

RatioReport RatioReport::from_json(const json& j) {
    check_keys(j, {"schema", "study", "config", "environment", "rows", "aggregates", "checks", "passed"}, "report");
    require(j.at("schema") == kReportSchema, ErrorKind::usage, std::string("report schema must be \"") + kReportSchema + "\"");
    RatioReport rep;
    rep.study = study_id_from_string(j.at("study").get<std::string>());
    rep.config = j.at("config");
    rep.environment = j.at("environment");
    for (const auto& r : j.at("rows")) {
        check_keys(r, {"case", "family", "lambda", "inputs", "kind", "lhs", "rhs", "ratio", "error_budget", "passed", "status", "message"},
                   "report row");
        ReportRow row;
        row.case_id = r.at("case").get<std::string>();
        row.family = r.at("family").get<std::string>();
        row.lambda = to_num(r.at("lambda"), "lambda");
        row.inputs = r.at("inputs");
        row.kind = r.at("kind").get<std::string>();
        row.lhs = to_num(r.at("lhs"), "lhs");
        row.rhs = to_num(r.at("rhs"), "rhs");
        row.ratio = to_num(r.at("ratio"), "ratio");
        row.error_budget = to_num(r.at("error_budget"), "error_budget");
        row.passed = r.at("passed").get<bool>();
        row.status = r.at("status").get<std::string>();
        row.message = r.at("message").get<std::string>();
        rep.rows.push_back(std::move(row));
    }
    const auto& a = j.at("aggregates");
    check_keys(a, {"ratio_min", "ratio_max", "spread", "dilation_drift"}, "aggregates");
    rep.ratio_min = to_num(a.at("ratio_min"), "ratio_min");
    rep.ratio_max = to_num(a.at("ratio_max"), "ratio_max");
    rep.spread = to_num(a.at("spread"), "spread");
    rep.dilation_drift = to_num(a.at("dilation_drift"), "dilation_drift");
    for (const auto& c : j.at("checks"))
        rep.checks.push_back({c.at("name").get<std::string>(), to_num(c.at("value"), "value"), to_num(c.at("limit"), "limit"),
                              c.at("passed").get<bool>()});
    rep.passed = j.at("passed").get<bool>();
    return rep;
}

std::vector<const ReportRow*> RatioReport::failing_rows() const {
    std::vector<const ReportRow*> out;
    for (const auto& r : rows)
        if (!r.passed) out.push_back(&r);
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

std::string csv_num(double x) {
    if (!std::isfinite(x)) return fmt(x);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string report_csv(const RatioReport& rep) {
    std::ostringstream o;
    o << "case,family,lambda,kind,lhs,rhs,ratio,error_budget,passed,status,message,inputs\n";
    for (const auto& r : rep.rows)
        o << csv_field(r.case_id) << ',' << csv_field(r.family) << ',' << csv_num(r.lambda) << ',' << r.kind << ','
          << csv_num(r.lhs) << ',' << csv_num(r.rhs) << ',' << csv_num(r.ratio) << ',' << csv_num(r.error_budget) << ','
          << (r.passed ? "true" : "false") << ',' << r.status << ',' << csv_field(r.message) << ','
          << csv_field(r.inputs.dump()) << '\n';
    return o.str();
}

std::string emit_report(const RatioReport& rep, const std::string& format, const std::string& dir) {
    require(format == "json" || format == "csv", ErrorKind::usage, "report format must be json or csv");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create " + dir + ": " + ec.message());
    const std::string path = (std::filesystem::path(dir) / (to_string(rep.study) + "." + format)).string();
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path + ": " + std::strerror(errno));
    if (format == "json")
        out << rep.to_json().dump(2) << '\n';
    else
        out << report_csv(rep);
    out.close();
    require(!out.fail(), ErrorKind::io, "write failed for " + path + ": " + std::strerror(errno));
    return path;
}

}  // namespace chg
