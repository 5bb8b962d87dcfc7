#pragma once

// =============================================================================
// Squared Bessel processes and sampled diffusions
// =============================================================================
// BESQ: dY = 2 sqrt(Y) db + delta dt, simulated by full-truncation Euler
//   Y' = max(Y + delta dt + 2 sqrt(max(Y, 0)) sqrt(dt) Z, 0).
// phi(t, y) = E[F(Y_S) | Y_t = y] is estimated by Monte Carlo; the process is
// time-homogeneous so it restarts at time 0 with horizon S - t.
// =============================================================================

#include "hybstab/certificate/certificate.hpp"
#include "hybstab/chain/simulate.hpp"
#include "hybstab/hybrid/region.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hybstab {

struct BesqSpec {
    double delta = 2.0;
    double y0 = 1.0;
    double S = 1.0;
    double dt = 1e-3;
    std::size_t paths = 100000;

    /// dt > 0, S >= 0, delta >= 0, y0 >= 0 and S / dt integral within 1e-9.
    void validate() const;
    [[nodiscard]] std::size_t steps() const;
};

struct BesqResult {
    std::vector<double> terminal;
    std::vector<std::vector<double>> paths;  ///< filled only when requested
    StatPoint mean;
};

BesqResult besq_simulate(const BesqSpec& spec, std::uint64_t seed, bool keep_paths = false);

struct BesqMeanCheck {
    double target = 0.0;      ///< y0 + delta S
    StatPoint coarse;         ///< step dt
    StatPoint fine;           ///< step dt / 2, same Brownian increments
    double bias_budget = 0.0; ///< |mean(coarse - fine)| + 3 SE(coarse - fine)
    double deviation = 0.0;   ///< |mean(coarse) - target|
    bool ok = false;          ///< deviation <= 3 SE + bias budget
};

BesqMeanCheck besq_mean_check(const BesqSpec& spec, std::uint64_t seed);

/// Nonnegative increasing payoff F.
struct Payoff {
    enum class Kind { constant, linear, power, custom };

    Kind kind = Kind::linear;
    double c = 1.0;  ///< F = c, c y, or c y^p
    double p = 1.0;
    std::function<double(double)> fn;

    static Payoff constant(double c);
    static Payoff linear(double c = 1.0);
    static Payoff power(double c, double p);
    static Payoff custom(std::function<double(double)> fn, std::string name);

    double operator()(double y) const;
    [[nodiscard]] bool affine() const { return kind == Kind::constant || kind == Kind::linear; }
    [[nodiscard]] std::string describe() const;

private:
    std::string name_;
};

/// phi(t, y) +/- SE. At t = S the value is F(y) exactly.
StatPoint phi_estimate(double t, double y, const Payoff& F, const BesqSpec& spec, std::uint64_t seed);

/// Exact phi for affine payoffs: c (y + delta (S - t)) or the constant.
double phi_affine(double t, double y, const Payoff& F, const BesqSpec& spec);

/// E[Y_T^2] from y for BESQ(delta): y^2 + (2 delta + 4)(y T + delta T^2 / 2).
double besq_second_moment(double y, double delta, double T);

struct ShapeCheck {
    std::vector<double> ys;
    std::vector<StatPoint> phi;         ///< at ys
    bool monotone = true;
    double worst_monotone = kInf;       ///< min over pairs of (phi2 - phi1 + 3 SE) of the paired difference
    bool convex = true;
    double worst_convex = kInf;         ///< min over pairs of (mean of ends - midpoint + 3 SE)
    std::vector<double> pde_residual;   ///< at interior grid points
    double max_abs_residual = 0.0;
    bool residual_available = true;
    std::string note;
};

/// Common random numbers: every grid point (and every midpoint) is driven by the
/// same per-path stream. The PDE residual needs a uniform grid of at least 5 points.
ShapeCheck phi_shape_check(const Payoff& F, const BesqSpec& spec, const std::vector<double>& ys, double t,
                           std::uint64_t seed);

struct CouplingCheck {
    std::size_t pairs = 0;
    std::size_t violations = 0;  ///< paths with Y^(1)_S > Y^(2)_S although y1 < y2
};

/// Pathwise order under the shared driver for consecutive grid values.
CouplingCheck besq_coupling_check(const BesqSpec& spec, const std::vector<double>& ys, std::uint64_t seed);

// -----------------------------------------------------------------------------
// Drifted diffusions dX = b(t, X) dt + dW
// -----------------------------------------------------------------------------

struct Drift {
    enum class Kind { linear, radial, custom };

    Kind kind = Kind::linear;
    double kappa = 1.0;  ///< linear: -kappa x
    double c = 0.0;      ///< radial: -x + c x / ||x||
    std::function<Vec(double, const Vec&)> fn;

    static Drift linear(double kappa);
    static Drift radial(double c);
    static Drift custom(std::function<Vec(double, const Vec&)> fn);

    Vec operator()(double t, const Vec& x) const;
    [[nodiscard]] std::string describe() const;
};

struct SectorReport {
    bool ok = true;
    double worst = -kInf;  ///< max over samples of <x, b(t, x)>
    Vec at;
    double at_t = 0.0;
    std::size_t checked = 0;
};

/// Rings of radii in (K radius, r_outer] with `directions` points each.
std::vector<Vec> sector_grid(double k_radius, double r_outer, int rings, int directions, std::size_t dim);

/// Pass iff <x, b(t, x)> < 0 at every (t, x). Grid points inside K are a validation error.
SectorReport sector_check(const Drift& b, const Region& K, const std::vector<Vec>& grid, const std::vector<double>& times);

struct DiffusionSpec {
    Drift drift;
    Region K = Region::ball(1.0);
    std::size_t dim = 2;
    double dt = 1e-2;
    Time horizon = 5;  ///< integer time
    bool noise = true;

    void validate() const;
};

/// Integer-time chain Z_i = X_{i ^ tau_K}, with tau_K detected at step resolution.
TrajectoryBatch sampled_chain_extract(const DiffusionSpec& spec, const Vec& x0, std::size_t n, std::uint64_t seed);

/// zeta_t = phi(t, ||x||^2) for an affine payoff with delta_besq = dim and S = horizon,
/// packaged as a certificate on R^d (theta = 1, V = ||x||^2).
Certificate besq_diffusion_certificate(const Payoff& F, const DiffusionSpec& spec);

}  // namespace hybstab
