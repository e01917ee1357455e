#pragma once

#include <limits>
#include <memory>
#include <vector>

namespace chg {

struct StableDensityParams {
    double alpha = 0.5;
    double t = 1.0;
    int nodes = 2000;           ///< trapezoid nodes of the inversion integral (log variable)
    double tail_tol = 1e-12;    ///< integrand magnitude at which the ray is cut
    bool use_fast_path = true;  ///< closed form at α = ½

    void validate() const;
};

/// One-sided stable density f_{t,α}(s); zero for s <= 0.
double stable_density(const StableDensityParams& p, double s);
/// Generic inversion path, never the closed form.
double stable_density_generic(const StableDensityParams& p, double s);
/// Closed form at α = ½.
double stable_density_half(double t, double s);
/// ∂f_{t,α}(s)/∂t, used for analytic time derivatives of subordinated extensions.
double stable_density_dt(const StableDensityParams& p, double s);
/// Large-s convergent series (k terms) for f_{t,α}(s).
double stable_density_series(double alpha, double t, double s, int terms = 40);

/// ∫ f_{t,α}(s) e^{-sλ} ds by quadrature of the density.
double laplace_check(const StableDensityParams& p, double lambda);
/// ∫ f_{t,α}(s) s^δ ds; +∞ for δ >= α.
double moment(const StableDensityParams& p, double delta);
/// Γ(1-δ/α)/Γ(1-δ)·t^{δ/α}, or +∞.
double moment_formula(double alpha, double t, double delta);

/// Density tabulated on a log grid in s, reused across Laplace/moment evaluations.
struct StableTable {
    double alpha, t;
    std::vector<double> s, f;
    static std::shared_ptr<const StableTable> get(const StableDensityParams& p);
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace chg
