#pragma once

// Heat kernel of ∂_t u = (X₁² + X₂²)u on H1, three independent backends.
// All kernels depend on (r² = a² + b², |c|) only.

#include <cstdint>
#include <memory>
#include <vector>

namespace chg {

/// Oscillatory 1D integral
///   h(t,r,c) = (4π²t²)⁻¹ ∫_0^∞ cos(u c/t) (u / sinh u) exp(-u coth u · r²/4t) du,
/// evaluated on a contour shifted through the saddle so tail values keep relative accuracy.
double h1_heat_quadrature(double t, double r2, double c);

/// Grid PDE for radial solutions: u_t = u_rr + u_r/r + (r²/4) u_cc on a stretched (r, c) grid,
/// Peaceman-Rachford ADI with implicit-Euler start-up, started from a normalised point mass.
class H1HeatPDE {
public:
    struct Options {
        double dr0 = 0.008;         ///< spacing for r < r_uniform
        double dc0 = 0.0045;        ///< spacing for c < c_uniform
        double r_uniform = 3.6;
        double c_uniform = 3.0;
        double growth = 0.03;       ///< geometric growth of the spacing beyond the uniform part
        double r_max = 60.0;
        double c_max = 250.0;
        double t_start = 2e-4;      ///< time at which the smoothed point mass is released
        double step_ratio = 0.004;  ///< Δt / t
    };
    H1HeatPDE() : H1HeatPDE(Options{}) {}
    explicit H1HeatPDE(const Options& o);

    /// Evolves to each requested time (sorted ascending) and records the solution.
    void run(const std::vector<double>& times);
    /// Kernel value at a recorded time; log-bicubic interpolation on the (r, c) grid.
    double eval(double t, double r2, double c) const;
    /// Mass Σ u·2πr·dr·dc·2 of a recorded slice.
    double mass(double t) const;

    const std::vector<double>& r_nodes() const { return r_; }
    const std::vector<double>& c_nodes() const { return c_; }
    int steps() const { return steps_; }

private:
    Options opt_;
    std::vector<double> r_, c_, rf_, cf_;  // cell centres and faces
    std::vector<double> times_;
    std::vector<std::vector<double>> slices_;
    int steps_ = 0;
    int slice_index(double t) const;
};

/// Conditional Monte Carlo of the horizontal diffusion dA = dW₁, dB = dW₂,
/// dC = ½(A dW₂ − B dW₁) (generator ½ΣX², so SDE time 2t ↔ kernel time t).
/// The A-path is a Brownian bridge (Karhunen-Loève, K modes); given it, (B_τ, C_τ) is Gaussian
/// and is integrated out exactly. Far points use exponential tilting of the bridge's quadratic
/// functional with an exactly known likelihood ratio.
class H1HeatMonteCarlo {
public:
    struct Options {
        std::uint64_t seed = 20240607;
        std::int64_t paths = 333334;  ///< bridge paths per batch (shared by all points of the batch)
        int modes = 96;
        int pilot = 2000;             ///< pilot paths used to pick the tilt of each point
    };
    struct Estimate {
        double value = 0, std_error = 0, theta = 0;
    };
    H1HeatMonteCarlo() : H1HeatMonteCarlo(Options{}) {}
    explicit H1HeatMonteCarlo(const Options& o);

    /// All points share one set of bridge paths (common random numbers); each gets its own tilt.
    std::vector<Estimate> eval_batch(double t, const std::vector<std::pair<double, double>>& r2c) const;
    Estimate eval(double t, double r2, double c) const { return eval_batch(t, {{r2, c}})[0]; }
    std::int64_t paths_used() const { return paths_used_; }

private:
    Options opt_;
    mutable std::int64_t paths_used_ = 0;
    mutable std::uint64_t batches_ = 0;
};

/// Memo table of h(1, r, c) on a fine (r, |c|) grid with log-bicubic interpolation;
/// other times follow from h(t, x) = t⁻² h(1, δ_{1/√t} x).
class H1HeatTable {
public:
    static std::shared_ptr<const H1HeatTable> instance();
    double eval(double t, double r2, double c) const;

private:
    H1HeatTable();
    double dr_, dc_;
    int nr_, nc_;
    std::vector<double> logv_;
};

}  // namespace chg
