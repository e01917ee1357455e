#pragma once

// Lattice fields on a group: sampling, interpolation, norms, translation, convolution and the
// horizontal difference operators.

#include <cmath>
#include <json.hpp>
#include <string>
#include <vector>

#include "chg/group.hpp"

namespace chg {

struct KernelHandle;

/// Uniform lattice in exponential coordinates on Π[-L_j, L_j], N_j points per axis.
struct GridSpec {
    GroupPtr group;
    std::vector<double> extents;
    std::vector<int> shape;

    static GridSpec make(GroupPtr g, std::vector<double> extents, std::vector<int> shape);
    /// 257 on [-10,10] (R1), 129² on [-8,8]² (R2), 65³ on [-6,6]³ (R3), 64²×96 on [-6,6]²×[-12,12] (H1).
    static GridSpec standard(const std::string& group);

    int dim() const { return static_cast<int>(shape.size()); }
    double spacing(int j) const { return 2 * extents[j] / (shape[j] - 1); }
    double coord(int j, int i) const { return -extents[j] + i * spacing(j); }
    std::size_t size() const;
    std::size_t stride(int j) const;
    double cell_volume() const;
    /// Lattice on which f∘δ_λ has the same samples as f on this lattice.
    GridSpec dilated(double lambda) const;
    /// Point counts odd and lattice symmetric, so 0 is a node and coordinates are multiples of h.
    bool centered() const;
    void validate() const;
    void point(std::size_t idx, double* x) const;

    nlohmann::json to_json() const;
    static GridSpec from_json(const nlohmann::json& j);
    bool operator==(const GridSpec& o) const;
};

struct ScalarField {
    GridSpec grid;
    std::vector<double> values;
    std::string provenance;
    double boundary_ratio = 0;  ///< max |f| on the outer ring / max |f|
    double exterior = 0;        ///< value taken off the lattice by interpolation and polar tails
    double leakage = 0;         ///< estimated relative mass lost by the producing operation

    ScalarField() = default;
    /// Throws a data error on non-finite values.
    ScalarField(GridSpec g, std::vector<double> v, std::string prov);
    static ScalarField zeros(const GridSpec& g, std::string prov = "zero");

    double integral() const;
    double max_abs() const;
    void refresh_boundary();

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double a);
};
ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double a, ScalarField f);
/// Pointwise product.
ScalarField multiply(const ScalarField& a, const ScalarField& b);

/// Built-in analytic test functions f(x) = A·φ(δ_λ(c⁻¹·x)), with
/// ρ² = |x_1|²/σ² + |x_2|²/σ⁴ (second layer only on H1):
///   zero, constant, gaussian e^{-ρ²}, bump e^{1-1/(1-ρ²)}, plateau (1 for ρ < ½, smooth step to 0
///   at ρ = 1), two_bump (bumps at ±param·σ along x_1), log_trunc min(param, log⁺(σ/|x|)),
///   coordinate (x_j with j = param).
struct FieldFunction {
    std::string id = "gaussian";
    double amplitude = 1;
    double sigma = 1;
    double lambda = 1;
    std::vector<double> center;
    double param = 0;

    double operator()(const GroupSpec& g, const double* x) const;
    std::string label() const;
    nlohmann::json to_json() const;
    static FieldFunction from_json(const nlohmann::json& j);
};

ScalarField sample_field(const FieldFunction& fn, const GridSpec& grid);

/// Riemann-sum L^p norm; p = INFINITY gives the max norm.
double lp_norm(const ScalarField& f, double p);
/// Same, skipping `ring` points next to every face.
double lp_norm_interior(const ScalarField& f, double p, int ring);

/// Tensor 4-point Lagrange interpolation; samples outside the box count as 0.
double interpolate(const ScalarField& f, const double* x);

/// x ↦ f(x·y). leakage = share of ∫|f| that left the box.
ScalarField shift_field(const ScalarField& f, const GroupElement& y);

/// (f∗g)(x) = ∫ f(x·y⁻¹) g(y) dy on the lattice of f. Euclidean groups use a zero-padded FFT;
/// on H1 the c-direction is transformed and the first layer is summed directly, the c-offset
/// ½(a b' − b a') being applied as an exact phase. leakage = 1 − ∫(f∗g)/(∫f·∫g).
ScalarField group_convolve(const ScalarField& f, const ScalarField& g);
/// Same with g = K(t, ·) evaluated analytically on the lattice offsets (heat on H1 uses its
/// exact partial Fourier transform in c). Riesz kernels are refused; see frac_integral.
ScalarField group_convolve(const ScalarField& f, const KernelHandle& k, double t);

/// X_i f by central differences; the outer ring is set to 0.
std::vector<ScalarField> horizontal_gradient(const ScalarField& f);
/// Δ_b f = Σ X_i² f with a compact second-order stencil; outer ring set to 0.
ScalarField sublaplacian(const ScalarField& f);

/// Binary CGF1 format.
void save_field(const ScalarField& f, const std::string& path);
ScalarField load_field(const std::string& path);
/// CSV of a 1D field, or of the 2D slice through axes (ax0, ax1) at the node nearest 0 elsewhere.
void write_field_csv(const ScalarField& f, const std::string& path, int ax0 = 0, int ax1 = 1);

}  // namespace chg
