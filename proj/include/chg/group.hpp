#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace chg {

enum class NormKind { euclidean, koranyi };

/// Immutable description of a stratified group of step <= 2 in exponential coordinates.
struct GroupSpec {
    std::string name;
    std::vector<int> layer_dims;
    int step = 1;
    int Q = 0;
    NormKind norm_kind = NormKind::euclidean;
    /// bracket[(i*m1 + j)*m2 + k] = coefficient of Z_k in [X_i, X_j].
    std::vector<double> bracket;

    int dim() const;
    int horizontal_dim() const { return layer_dims.empty() ? 0 : layer_dims[0]; }
    int vertical_dim() const { return step >= 2 ? layer_dims[1] : 0; }
    /// Degree of coordinate j under dilations (1 or 2).
    int degree(int j) const { return j < horizontal_dim() ? 1 : 2; }
    bool is_heisenberg() const { return name == "H1"; }
    bool is_euclidean() const { return step == 1; }

    /// Checks Q = Σ i·m_i and antisymmetry of the bracket table; throws data error.
    void validate() const;

    nlohmann::json to_json() const;
    static GroupSpec from_json(const nlohmann::json& j);

    static GroupSpec euclidean(int n);
    static GroupSpec heisenberg();
    /// Built-in lookup: "R1", "R2", "R3", "H1".
    static GroupSpec by_name(const std::string& name);

    bool operator==(const GroupSpec& o) const {
        return name == o.name && layer_dims == o.layer_dims && step == o.step && norm_kind == o.norm_kind;
    }
};

using GroupPtr = std::shared_ptr<const GroupSpec>;
GroupPtr make_group(const std::string& name);

struct GroupElement {
    GroupPtr spec;
    std::vector<double> coords;

    GroupElement() = default;
    GroupElement(GroupPtr s, std::vector<double> c);
    static GroupElement zero(GroupPtr s);
    double operator[](int i) const { return coords[i]; }
};

// Raw-pointer kernels used in inner loops; n = spec.dim().
void product_raw(const GroupSpec& g, const double* x, const double* y, double* out);
double norm_raw(const GroupSpec& g, const double* x);
void dilate_raw(const GroupSpec& g, double lambda, const double* x, double* out);

GroupElement group_product(const GroupElement& x, const GroupElement& y);
GroupElement group_inverse(const GroupElement& x);
GroupElement dilate(double lambda, const GroupElement& x);
double homogeneous_norm(const GroupElement& x);
/// Coefficients of the left-invariant field X_i (1-based) at x.
std::vector<double> horizontal_vector_coeffs(int i, const GroupElement& x);
/// Points with |ω| = 1, deterministic in seed.
std::vector<GroupElement> sphere_sample(const GroupPtr& spec, int count, std::uint64_t seed);

/// Deterministic quadrature on the unit sphere of the homogeneous norm, normalised so that
/// ∫ g(y) dy = ∫_0^∞ Σ_k w_k g(δ_r ω_k) r^{Q-1} dr.
struct SphereRule {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
};
SphereRule sphere_rule(const GroupSpec& g, int resolution);

}  // namespace chg
