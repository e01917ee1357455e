#pragma once

// Extensions, the fractional sub-Laplacian L^α (L = −Δ_b) by two routes plus a Euclidean
// Fourier oracle, the fractional integral and the three-term commutator.

#include <functional>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "chg/fields.hpp"
#include "chg/heat_flow.hpp"

namespace chg {

/// Numerical side information attached to an operator output.
struct OpReport {
    double error_budget = 0;  ///< estimated L² error of the output
    nlohmann::json detail = nlohmann::json::object();
};

// ---------------------------------------------------------------------------------------------
// Subordinator weights

/// f_{t,α}(s) and ∂_t f_{t,α}(s) from a master table of f_{1,α} (log-cubic interpolation,
/// power-law right tail), via f_{t,α}(s) = t^{-1/α} f_{1,α}(s t^{-1/α}).
class StableProfile {
public:
    static std::shared_ptr<const StableProfile> get(double alpha);
    double density(double t, double s) const;
    double density_dt(double t, double s) const;
    double alpha() const { return alpha_; }

private:
    explicit StableProfile(double alpha);
    double alpha_, l0_, dl_;
    std::vector<double> logf_, g_;  // log f_{1,α}(σ) and f + σ f' on the log-σ grid
    double tail_c_;                 // f_{1,α}(σ) ≈ tail_c σ^{-1-α} past the grid
    double interp(const std::vector<double>& v, double l) const;
};

// ---------------------------------------------------------------------------------------------
// Extensions

enum class ExtensionKind { poisson, heat };

struct ExtensionStack {
    ExtensionKind kind = ExtensionKind::poisson;
    double alpha = 0.5;
    ScalarField base;
    std::vector<double> t_nodes;
    std::vector<ScalarField> u;     ///< u(t_k, ·)
    std::vector<ScalarField> u_t;   ///< ∂_t u(t_k, ·), from differentiated weights
    std::vector<ScalarField> u_tt;  ///< ∂_t² u (Poisson only)
    OpReport report;

    std::vector<ScalarField> gradient(std::size_t k) const;
    /// Δ_b u(t_k).
    ScalarField sublaplacian(std::size_t k) const;
    /// ∇̃u = (∇_𝔾u, ∂_t u) with ∂_t by centred differences on the log t-grid (interior nodes only).
    std::vector<ScalarField> tilde_gradient(std::size_t k) const;
    /// Relative residual of ∂_t(t^{1−2α}∂_t U) + t^{1−2α}Δ_b U at node k, on the interior
    /// lattice ring `ring` (Poisson only).
    double pde_residual(std::size_t k, int ring = 3) const;

    /// Writes manifest.json {alpha, kind, t_nodes, provenance, grid} and u_<k>.cgf slices.
    void export_dir(const std::string& dir) const;
};

/// 64 log-spaced nodes on [1e-2, 1e2].
std::vector<double> default_t_nodes();

/// u(t) = p_α(t)∗f through the subordination weights C_α t^{2α} s^{-1-α} e^{-t²/4s} on a heat flow.
ExtensionStack poisson_extension(const HeatFlow& flow, double alpha, std::vector<double> t_nodes = default_t_nodes());
ExtensionStack poisson_extension(const ScalarField& f, double alpha, std::vector<double> t_nodes = default_t_nodes());
/// u(t) = h_α(t)∗f through the stable densities f_{t,α}(s).
ExtensionStack heat_extension(const HeatFlow& flow, double alpha, std::vector<double> t_nodes = default_t_nodes());
ExtensionStack heat_extension(const ScalarField& f, double alpha, std::vector<double> t_nodes = default_t_nodes());

// ---------------------------------------------------------------------------------------------
// Fractional sub-Laplacian

struct PolarOptions {
    double eps_cells = 2;      ///< inner radius ε in units of the finest horizontal spacing
    double r_max = 0;          ///< 0: beyond the box seen from every output point
    int panels_per_efold = 2;  ///< radial Gauss panels per e-fold of r (on a fixed log lattice)
    int gauss = 4;
    int sphere_res = 8;
    int stride = 1;            ///< evaluate on every stride-th lattice point (odd point counts)
};

/// ½∫(2f(x) − f(xy) − f(xy⁻¹)) K_α(y) dy with K_α = R̃_{−2α}/α, by polar quadrature; the ball
/// |y| < ε is replaced by its second-order Taylor term μ ε^{2−2α}/(4−4α)·(−Δ_b f).
ScalarField frac_sublaplacian_pv(const ScalarField& f, double alpha, const PolarOptions& opt = {}, OpReport* rep = nullptr);
/// (α/Γ(1−α)) ∫ s^{-α-1}(f − H_s f) ds on a heat flow.
ScalarField frac_sublaplacian_balakrishnan(const HeatFlow& flow, double alpha, OpReport* rep = nullptr);
ScalarField frac_sublaplacian_balakrishnan(const ScalarField& f, double alpha, OpReport* rep = nullptr);
/// Euclidean oracle: multiplier |ξ|^{2α} on a zero-padded FFT.
ScalarField frac_sublaplacian_fft(const ScalarField& f, double alpha, int pad = 8);
/// Applies the radial Fourier multiplier m(|ξ|²) on a zero-padded FFT (Euclidean groups).
ScalarField euclidean_multiplier(const ScalarField& f, const std::function<double(double)>& m, int pad = 8);

/// Samples of a field on the stride-`stride` sublattice (stride must divide N−1 on every axis).
ScalarField restrict_to_stride(const ScalarField& f, int stride);

/// I_s f = (1/Γ(s/2)) ∫ t^{s/2−1} H_t f dt = f ∗ R_s, 0 < s < Q.
ScalarField frac_integral(const HeatFlow& flow, double s, OpReport* rep = nullptr);
ScalarField frac_integral(const ScalarField& f, double s, OpReport* rep = nullptr);

/// Three-term commutator L^α(uv) − u L^α v − v L^α u, computed pointwise as
/// −∫(u(xy) − u(x))(v(xy) − v(x)) K_α(y) dy with the PV quadrature.
ScalarField commutator(const ScalarField& u, const ScalarField& v, double alpha, const PolarOptions& opt = {},
                       OpReport* rep = nullptr);
/// The same assembled from three PV evaluations.
ScalarField commutator_assembled(const ScalarField& u, const ScalarField& v, double alpha, const PolarOptions& opt = {});

/// Angular constants of K_α: A = Σ w_k K(ω_k), μ = Σ w_k K(ω_k)|ω_h|²/m.
struct KernelMoments {
    double A = 0, mu = 0;
};
KernelMoments pv_kernel_moments(const GroupPtr& g, double alpha, int sphere_res);

}  // namespace chg
