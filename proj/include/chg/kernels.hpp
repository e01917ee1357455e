#pragma once

// Heat, fractional heat, fractional Poisson and Riesz kernels on the supported groups.

#include <cstdint>
#include <memory>
#include <mutex>
#include <json.hpp>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "chg/group.hpp"
#include "chg/heisenberg_heat.hpp"

namespace chg {

enum class KernelKind { heat, frac_heat, poisson, riesz, tilde_riesz };
enum class Backend { closed_form, quadrature, pde_grid, monte_carlo };

std::string to_string(KernelKind k);
std::string to_string(Backend b);
KernelKind kernel_kind_from_string(const std::string& s);
Backend backend_from_string(const std::string& s);

/// Node settings for the subordination integrals over the heat time s. The nodes are log-spaced
/// between head·S_lo and tail·S_hi, where S_lo, S_hi are the natural scales of the integrand
/// (|x|², t², t^{1/α}); a power law fitted to the last two nodes supplies the remainder.
struct QuadSettings {
    int nodes_per_efold = 15;
    double head = 4e-3;
    double tail = 1e5;
    bool heat_table = true;  ///< H1: serve heat values inside subordination integrals from the memo table
    int mc_paths = 200000;   ///< Monte Carlo paths for single-point heat evaluation
    std::uint64_t mc_seed = 0;  ///< mixed into the per-point Monte Carlo stream
};

/// Thread-safe memo of kernel values keyed by (settings fingerprint, t, |x_1|², |x_2|), so handle
/// copies that change kind, order, backend or quadrature settings never read each other's values.
class KernelCache {
public:
    using Key = std::tuple<std::uint64_t, double, double, double>;
    bool find(const Key& k, double& v) const;
    void insert(const Key& k, double v);
    std::size_t size() const;

private:
    struct Hash {
        std::size_t operator()(const Key& k) const;
    };
    mutable std::shared_mutex mu_;
    std::unordered_map<Key, double, Hash> map_;
};

struct KernelHandle {
    KernelKind kind = KernelKind::heat;
    double alpha = 0;
    GroupPtr group;
    Backend backend = Backend::closed_form;
    QuadSettings quad;
    std::shared_ptr<KernelCache> cache;  ///< null disables memoisation

    /// Default backend: closed form on R^n, quadrature on H1.
    static KernelHandle make(KernelKind kind, const std::string& group, double alpha = 0, bool memo = true);
    void validate() const;
    nlohmann::json to_json() const;

    // Lazily built PDE solution shared by copies of the handle.
    struct PdeState {
        std::mutex mu;
        std::unique_ptr<H1HeatPDE> pde;
        std::vector<double> times;
    };
    std::shared_ptr<PdeState> pde = std::make_shared<PdeState>();
};

/// Heat kernel h(t, x) of ∂_t u = Σ X_j² u.
double heat_eval(const KernelHandle& k, double t, const GroupElement& x);
/// Heat kernel by shell coordinates: ρ2 = |first layer|², v = |second layer| (0 on R^n).
double heat_shell(const KernelHandle& k, double t, double rho2, double v);
/// Runs the PDE backend once for all listed times (values are then served from the grid).
void prepare_pde(const KernelHandle& k, std::vector<double> times);

double frac_heat_eval(const KernelHandle& k, double t, const GroupElement& x);
double poisson_eval(const KernelHandle& k, double t, const GroupElement& x);
double riesz_eval(const KernelHandle& k, const GroupElement& x);
double tilde_riesz_eval(const KernelHandle& k, const GroupElement& x);
/// Dispatches on kind; t is ignored for the Riesz kernels.
double kernel_eval(const KernelHandle& k, double t, const GroupElement& x);

/// Fractional Poisson constant C_α = (4^α Γ(α))⁻¹.
double poisson_constant(double alpha);

/// ∫ h(t, x) dx for H1 on a 64×64×96-type lattice box: trapezoid in (a, b), four-point Gauss per
/// cell in c. Extents are the half-widths of the box.
double h1_grid_mass(const KernelHandle& k, double t, int na, int nc, double La, double Lc);

struct KernelCheck {
    std::string name;
    bool pass = false;
    double measured = 0;  ///< constant or worst ratio
    double residual = 0;
    std::string detail;
};
struct KernelReport {
    nlohmann::json handle;
    std::vector<KernelCheck> checks;
    bool all_pass() const;
    nlohmann::json to_json() const;
};

/// Checks drawn from {mass, homogeneity, symmetry, gaussian_sandwich, decay_bound, semigroup}.
KernelReport kernel_property_report(const KernelHandle& k, const std::vector<std::string>& checks);

/// Tabulation of a radial profile: rows (t, |x|, value) along the first coordinate axis.
struct KernelTable {
    std::vector<double> t, norm, value;
};
KernelTable tabulate_kernel(const KernelHandle& k, const std::vector<double>& times,
                            const std::vector<double>& norms);
void write_kernel_csv(const KernelTable& tab, const std::string& path);

}  // namespace chg
