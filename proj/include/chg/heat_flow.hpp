#pragma once

// Heat semigroup slices H_s f = f ∗ h_s of one lattice field on a log-spaced s-grid.
//
// R^n: exact Fourier multiplier e^{-s|ξ|²} on a zero-padded box.
// H1: Fourier transform in c; each frequency ω evolves under the lattice magnetic operator
//   (L_ω g)_{ij} = [2g − e^{−iωb_j h_a/2} g_{i+1,j} − e^{iωb_j h_a/2} g_{i−1,j}] / h_a²
//                + [2g − e^{iωa_i h_b/2} g_{i,j+1} − e^{−iωa_i h_b/2} g_{i,j−1}] / h_b²
// (Dirichlet on a padded (a, b) box), propagated between nodes by Chebyshev expansion.
//
// Past s_flow, where the padded box stops containing the flow, slices come from the model
// H_s f ≈ M·h(s + s*, c⁻¹x) (M the mass, c the barycenter, s* from the horizontal second moment).
// Slices are stored in single precision.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "chg/fields.hpp"

namespace chg {

struct HeatFlowOptions {
    int nodes_per_efold = 8;
    int tail_nodes_per_efold = 3;
    double s_min = 0;           ///< 0: 0.02·h² with h the finest horizontal spacing
    double s_far = 0;           ///< 0: 1e4·L² with L the largest horizontal half-width
    double pad = 0;             ///< padded half-width / base half-width; 0: 32 (R1), 4 (R2), 2 (R3), 3 (H1)
    double c_pad = 2;           ///< H1: c-period / base c-width
    double boundary_tol = 1e-3; ///< s_flow = d² / (4 ln(1/tol)), d = distance from the mass to the padding edge
};

struct HeatNode {
    double s = 0, lo = 0, hi = 0;  ///< node and its cell [lo, hi] (geometric midpoints)
    bool modelled = false;         ///< slice comes from the far-field model
};

class HeatFlow {
public:
    explicit HeatFlow(const ScalarField& f, const HeatFlowOptions& opt = {});

    const ScalarField& base() const { return f_; }
    const std::vector<HeatNode>& nodes() const { return nodes_; }
    ScalarField slice(std::size_t k) const;
    /// L f and L² f for the generator L = −Δ_b as discretised by the flow.
    const ScalarField& Lf() const { return Lf_; }
    const ScalarField& L2f() const { return L2f_; }

    double s_flow() const { return s_flow_; }
    double mass() const { return mass_; }
    /// Relative L² mismatch between the last computed slice and the model at the same s.
    double tail_mismatch() const { return tail_mismatch_; }
    int Q() const { return f_.grid.group->Q; }

    /// Σ_k w_k H_{s_k} f + a·f + b·Lf + c·L²f.
    ScalarField combine(const std::vector<double>& w, double a, double b, double c, const std::string& prov) const;

    /// Cell integrals ∫_{lo_k}^{hi_k} g(s) ds (4-point Gauss in log s).
    std::vector<double> cell_weights(const std::function<double(double)>& g) const;
    /// Moments ∫_0^{lo_0} s^j g(s) ds, j = 0, 1, 2, for the Taylor head e^{-sL} ≈ 1 − sL + s²L²/2.
    std::array<double, 3> head_moments(const std::function<double(double)>& g) const;
    /// ∫_{hi_last}^∞ g(s) (s / s_last)^{-Q/2} ds: the remainder carried by the last slice.
    double remainder_weight(const std::function<double(double)>& g) const;
    /// ∫_0^∞ g(s) H_s f ds; g must be integrable at 0 and make the remainder finite.
    ScalarField integrate(const std::function<double(double)>& g, const std::string& prov) const;

private:
    ScalarField f_, Lf_, L2f_;
    std::vector<HeatNode> nodes_;
    std::vector<std::vector<float>> slices_;
    double s_flow_ = 0, mass_ = 0, tail_mismatch_ = 0;

    void run_euclidean(const HeatFlowOptions& opt);
    void run_h1(const HeatFlowOptions& opt);
    void build_nodes(double s_min, double s_flow, double s_far, const HeatFlowOptions& opt);
    void add_model_slices();
};

}  // namespace chg
