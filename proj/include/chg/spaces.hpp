#pragma once

// Function-space functionals on lattice fields: Besov seminorms (direct, heat, Poisson), square
// functions, BMO and Carleson functionals, maximal functions and the scalar Calderón
// construction.

#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "chg/fields.hpp"
#include "chg/heat_flow.hpp"
#include "chg/operators.hpp"

namespace chg {

struct Seminorm {
    double value = 0;
    double error_estimate = 0;
    nlohmann::json detail = nlohmann::json::object();
};

// ---------------------------------------------------------------------------------------------
// Test panel

/// The 20-function panel: Gaussians and bumps at λ ∈ {½, ¾, 1, 3/2, 2} centred, the same
/// shapes at the four inner dilations translated, a two-bump sum and a truncated log|x|.
/// `reduced` keeps {gaussian, bump, two_bump, log_trunc} at λ = 1.
std::vector<FieldFunction> standard_panel(const GroupSpec& g, bool reduced = false);
/// BMO stressors: truncated log|x| at two dilations and smoothed indicators of both signs.
std::vector<FieldFunction> bmo_pairing_panel(const GroupSpec& g);

// ---------------------------------------------------------------------------------------------
// Besov seminorms

enum class BesovVariant { direct, heat_dt, poisson_grad, poisson_dt, poisson_lap };
std::string to_string(BesovVariant v);
BesovVariant besov_variant_from_string(const std::string& s);

struct SeminormParams {
    double s = 0.5;
    double p = 2, q = 2;
    double alpha = 0.5;
    BesovVariant variant = BesovVariant::direct;
    int sphere_res = 6;        ///< direct: directions on the unit sphere
    int panels_per_efold = 3;  ///< direct: radial Gauss panels per e-fold (anchored lattice)
    int t_per_efold = 6;       ///< extension variants: t nodes per e-fold (anchored lattice)
    int stride = 0;            ///< direct: x-sum on every stride-th lattice point; 0 = 1 (2 on H1)
};

/// ω_p(y)/|y|^s on a polar (r, ω) table; the table does not depend on s or q.
struct ModulusTable {
    double p = 2;
    int Q = 1;
    std::vector<double> r, wr;       ///< radial nodes and weights for ∫ · dr/r on [r_lo, R]
    std::vector<double> dir_w;       ///< sphere weights
    std::vector<std::vector<double>> omega;  ///< omega[i][k] = ω_p(δ_{r_i} ω_k)
    double r_lo = 0, R = 0, norm_p = 0;
};
ModulusTable modulus_table(const ScalarField& f, const SeminormParams& prm);
/// (∫ (ω_p(y)/|y|^s)^q dy/|y|^Q)^{1/q}; linear head below r_lo, ω_p = 2^{1/p}‖f‖_p past R.
Seminorm besov_from_table(const ModulusTable& t, double s, double q);

Seminorm besov_direct(const ScalarField& f, const SeminormParams& prm);
/// (∫ (t^{1−s/2} ‖∂_t u‖_p)^q dt/t)^{1/q}, u = h_α(t)∗f; equivalent to the direct seminorm of order αs.
Seminorm besov_heat(const HeatFlow& flow, const SeminormParams& prm);
/// Poisson variants: t^{1−s}‖∇_𝔾u‖ (s ∈ (0,1)), t^{1−s}‖∂_t u‖ (s < 2α), t^{2−s}‖Δ_b u‖ (s ∈ (0,2)).
Seminorm besov_poisson(const HeatFlow& flow, const SeminormParams& prm);
/// Dispatches on prm.variant.
Seminorm besov(const ScalarField& f, const SeminormParams& prm);
/// Throws a domain error naming the violated bound.
void check_seminorm_range(const SeminormParams& prm);

/// (∫ g(t) dt/t) for g sampled on log-spaced nodes: trapezoid in log t, a power head g ∝ t^{head}
/// below the first node, and a power tail fitted to the last two nodes.
double log_scale_integral(const std::vector<double>& t, const std::vector<double>& g, double head_exponent,
                          double* tail_share = nullptr);

// ---------------------------------------------------------------------------------------------
// Square functions

/// φ_t menu, with u_s the α-Poisson extension of L^{s/2}f:
///   grad     t^{1+s} ∇_𝔾 u_s        s > −1
///   dt       t^{1+s} ∂_t u_s         s > −2α
///   lap      t^{2+s} L u_s           s > −2
///   grad_dt  t^{2+s} ∇_𝔾 ∂_t u_s     s > −1 − 2α
enum class PhiVariant { grad, dt, lap, grad_dt };
std::string to_string(PhiVariant v);
PhiVariant phi_variant_from_string(const std::string& s);

struct PhiParams {
    PhiVariant variant = PhiVariant::grad;
    double s = 0;
    double alpha = 0.5;
    int t_per_efold = 6;
};
void check_phi_range(const PhiParams& ph);

/// |f∗φ_t| on anchored log-spaced t nodes spanning the lattice scales.
struct PhiStack {
    std::vector<double> t;
    std::vector<ScalarField> mag;  ///< |f∗φ_t|, Euclidean norm for vector variants
    double head_exponent = 1;      ///< |f∗φ_t| ∝ t^{head_exponent} as t → 0
};
PhiStack phi_stack(const ScalarField& f, const PhiParams& ph);

enum class SquareMode { g, S };
/// g_φ f = (∫|f∗φ_t|² dt/t)^{1/2}; S mode: (∫∫_{|x⁻¹y|<βt} |f∗φ_t(y)|² t^{−Q−1} dy dt)^{1/2}.
ScalarField square_function(const ScalarField& f, const PhiParams& ph, SquareMode mode = SquareMode::g,
                            double beta = 1);
ScalarField square_function(const PhiStack& st, SquareMode mode = SquareMode::g, double beta = 1);

/// Square-function bound: lhs = ‖(∫(t^{k−s}|D u|)² dt/t)^{1/2}‖_p with
/// D ∈ {∇_𝔾 (k=1), ∂_t (k=1), ∇²_𝔾 (k=2)} on the α-Poisson extension, rhs = ‖L^{s/2}f‖_p.
enum class SobolevVariant { grad, dt, hess };
std::string to_string(SobolevVariant v);
SobolevVariant sobolev_variant_from_string(const std::string& s);
struct SquareSobolev {
    double lhs = 0, rhs = 0, ratio = 0, error_budget = 0;
    bool skipped = false;  ///< rhs vanishes (f = 0)
};
SquareSobolev square_norm_vs_sobolev(const ScalarField& f, double s, double p, double alpha, SobolevVariant v,
                                     int t_per_efold = 6);
void check_square_sobolev_range(int Q, double s, double p, double alpha, SobolevVariant v);
/// L^{s/2} f for any real s > −Q: Balakrishnan for s > 0, I_{−s} for s < 0.
ScalarField sobolev_power(const HeatFlow& flow, double s, OpReport* rep = nullptr);

// ---------------------------------------------------------------------------------------------
// Extension integrals

/// |U|, |∇_𝔾U|, |∂_tU|, |∇̃U| with ∇̃ = (∇_𝔾, ∂_t), and |∇_𝔾∇̃U|.
enum class ExtFactor { value, grad, dt, tilde_grad, grad_tilde_grad };
struct ExtTerm {
    const HeatFlow* flow = nullptr;
    ExtFactor factor = ExtFactor::value;
};
/// ∫_0^∞ ∫ t^{power} Π|D_i U_i(t,x)| dx dt/t over the α-Poisson extensions U_i of the flows' fields.
Seminorm extension_product_integral(const std::vector<ExtTerm>& terms, double alpha, double power, int t_per_efold = 6);

// ---------------------------------------------------------------------------------------------
// BMO, Carleson, maximal functions

struct BallFamily {
    int centers_per_axis = 9;            ///< centres on a coarse sublattice of the inner half-box
    std::vector<double> radii = {0.125, 0.25, 0.5, 1, 2, 4};
    int radial_nodes = 8;
    int sphere_res = 6;
};
/// max over the family of (1/|B|)∫_B |f − m_B|.
Seminorm bmo_norm(const ScalarField& f, const BallFamily& fam = {});
/// max over the family of ((1/|B|)∫_{T(B)} |f∗φ_t|² dt dx/t)^{1/2}, T(B_r(x₀)) = {|x₀⁻¹x| < r − t}.
Seminorm carleson_functional(const ScalarField& f, const PhiParams& ph, const BallFamily& fam = {});
Seminorm carleson_functional(const PhiStack& st, const BallFamily& fam = {});
/// Haar measure of the unit ball of the homogeneous norm.
double unit_ball_volume(const GroupSpec& g);

/// Maximal-function profiles φ: heat (φ_t = h(t²)), Poisson p_α(t), power (1+|x|)^{−λ}/Z.
struct MaxProfile {
    std::string kind = "heat";
    double alpha = 0.5;
    double lambda = 0;     ///< power decay exponent; must exceed Q
    int t_per_efold = 4;
};
enum class MaxMode { M0, M };
/// M0 f = sup_t (f∗φ_t); M f = sup{|f∗φ_t(y)| : |x⁻¹y| < t}, over anchored t nodes.
ScalarField maximal(const ScalarField& f, const MaxProfile& prof, MaxMode mode);
/// The t nodes and f∗φ_t slices maximal() takes its suprema over.
std::vector<std::pair<double, ScalarField>> maximal_slices(const ScalarField& f, const MaxProfile& prof);

// ---------------------------------------------------------------------------------------------
// Calderón scalars

struct CalderonScalars {
    double alpha = 0.5;
    double a = 0.5, b = 2;  ///< η = 1 on [a, b], supported in [a/2, 2b]
    double c_alpha = 1;
    std::vector<double> s, H, Ht, G;  ///< tables on a log grid covering [a/2, 2b]
    double eta_integral = 0;
    double H_at(double s) const;
    double Ht_at(double s) const;
    double G_at(double s) const;
};
/// H_α(s) = 2^{−(α+1)} c_α θ^{1/2} s^α ∫ τ^{−(α+1)} e^{−τs} e^{−s/4τ} dτ, θ = (2α)^{−2α};
/// H̃_α = sH_α′ by differentiating under the integral; G = η(s) s / (H̃_α(s) ∫η).
CalderonScalars calderon_scalars(double alpha, double a = 0.5, double b = 2, double c_alpha = 1);
double calderon_H(double alpha, double s, double c_alpha = 1);
double calderon_Htilde(double alpha, double s, double c_alpha = 1);
/// ∫ H̃_α(s) G(s) ds/s with fresh H̃ evaluations against the tabulated G.
double reproducing_check(const CalderonScalars& cs);
/// ∫_ε^A t ψ_t ∗ ∂_t p_α(t) ∗ f dt/t on ℝⁿ, ψ synthesised by the radial multiplier G(t|ξ|).
ScalarField euclidean_reproducing_apply(const ScalarField& f, const CalderonScalars& cs, double eps, double A);

// ---------------------------------------------------------------------------------------------
// Schur-kernel constants

/// sup|K|, sup_y ∫|K| dt/t, sup_t ∫|K| dy/|y|^Q for the two kernels bounding the heat seminorm:
/// K₁ = t^{1−s/2}|y|^{αs−2α}χ_{|y|^{2α}≥t}, K₂ = t^{−(Q+αs)/2α}|y|^{Q+αs}χ_{|y|^{2α}≤t}.
struct SchurConstants {
    double sup = 0, t_integral = 0, y_integral = 0;
};
SchurConstants schur_constants(const GroupSpec& g, int which, double s, double alpha, int sphere_res = 8);

}  // namespace chg
