#pragma once

// =============================================================================
// Randomly switched systems X_{t+1} = f_{sigma_t}(X_t) with Markov switching
// =============================================================================
// The Markov state is the pair (sigma_t, X_t); paths store it as joint states
// with the mode in `site`. Per step the mode chain is advanced after the map
// is applied, so a path consumes one uniform for sigma_0 and one per step.
// =============================================================================

#include "hybstab/chain/simulate.hpp"
#include "hybstab/core/class_k.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hybstab {

class SwitchingChain {
public:
    /// P must be row-stochastic; `initial` must be a probability vector.
    SwitchingChain(Matrix P, Vec initial);
    /// Uniform initial law.
    explicit SwitchingChain(Matrix P);

    [[nodiscard]] std::size_t modes() const { return P_.rows; }
    [[nodiscard]] const Matrix& P() const { return P_; }
    [[nodiscard]] const Vec& initial() const { return initial_; }
    [[nodiscard]] double p_hat() const { return p_hat_; }
    [[nodiscard]] double p_tilde() const { return p_tilde_; }
    /// Every mode reaches every other through positive entries.
    [[nodiscard]] bool irreducible() const { return irreducible_; }
    void require_irreducible() const;

    [[nodiscard]] int draw_initial(Rng& rng) const;
    [[nodiscard]] int draw_next(int mode, Rng& rng) const;

private:
    Matrix P_;
    Vec initial_;
    double p_hat_ = 0.0;
    double p_tilde_ = 0.0;
    bool irreducible_ = false;
};

/// One subsystem map f_i(x, w). The disturbance enters additively through an
/// input matrix (identity when omitted); w is ignored when empty.
class ModeMap {
public:
    enum class Family { linear, affine, tanh, custom };
    using Fn = std::function<Vec(const Vec& x, const Vec& w)>;

    static ModeMap linear(Matrix A, std::optional<Matrix> input = std::nullopt);
    /// A x + b with user-declared equilibrium.
    static ModeMap affine(Matrix A, Vec b, Vec equilibrium);
    /// a * tanh(x) componentwise (+ w); globally Lipschitz with constant |a|.
    static ModeMap tanh(double a, std::size_t dim);
    static ModeMap custom(Fn f, std::size_t dim, std::function<double(double radius)> lipschitz,
                          Vec equilibrium = {});

    [[nodiscard]] Vec operator()(const Vec& x) const { return f_(x, {}); }
    [[nodiscard]] Vec operator()(const Vec& x, const Vec& w) const { return f_(x, w); }

    [[nodiscard]] Family family() const { return family_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] const Vec& equilibrium() const { return equilibrium_; }
    /// Linear part for the linear family.
    [[nodiscard]] const std::optional<Matrix>& matrix() const { return A_; }
    [[nodiscard]] bool has_input_matrix() const { return has_input_; }
    /// Lipschitz bound on the ball of the given radius.
    [[nodiscard]] double lipschitz(double radius) const { return lipschitz_(radius); }
    [[nodiscard]] std::string describe() const { return description_; }

private:
    ModeMap() = default;

    Family family_ = Family::custom;
    std::size_t dim_ = 0;
    Fn f_;
    std::function<double(double)> lipschitz_;
    Vec equilibrium_;
    std::optional<Matrix> A_;
    bool has_input_ = false;
    std::string description_;
};

/// Spectral norm of a small dense matrix (power iteration on A^T A).
double operator_norm(const Matrix& A);

struct SwitchedSystem {
    std::vector<ModeMap> maps;
    SwitchingChain chain;

    [[nodiscard]] std::size_t dim() const { return maps.empty() ? 0 : maps.front().dim(); }
    /// Mode count matches the chain, dimensions agree, and each equilibrium is a
    /// fixed point of its map within 1e-10.
    void validate() const;
    /// All maps linear without an input matrix: the state can be tracked as a
    /// unit direction times a log-domain scale.
    [[nodiscard]] bool positively_homogeneous() const;
};

/// Transition kernel of the pair: (i, x) -> (j, f_i(x)) with probability p_ij.
KernelPtr joint_kernel(const SwitchedSystem& sys);

// -----------------------------------------------------------------------------
// Lyapunov families
// -----------------------------------------------------------------------------

struct LyapunovFamily {
    enum class Kind { weighted_norm, custom };

    Kind kind = Kind::weighted_norm;
    Vec weights;  ///< c_i for V_i(x) = c_i ||x - x_i*||
    std::vector<std::function<double(const Vec&)>> custom_V;
    ClassK alpha1 = ClassK::linear(1.0);
    ClassK alpha2 = ClassK::linear(1.0);
    double mu = 1.0;
    double r = 0.0;
    std::optional<double> lambda0;
    std::optional<Matrix> Lambda;
    std::vector<Vec> equilibria;  ///< empty means all at the origin

    static LyapunovFamily weighted_norms(Vec weights, double mu, ClassK alpha1, ClassK alpha2);

    [[nodiscard]] std::size_t modes() const;
    [[nodiscard]] double V(std::size_t i, const Vec& x) const;
    /// V_i(x) 1{||x|| > r}
    [[nodiscard]] double V_trunc(std::size_t i, const Vec& x) const;
    /// log V_i(x), using the log-norm for weighted norms so tiny states do not underflow.
    [[nodiscard]] long double log_V(std::size_t i, const Vec& x, long double log_norm) const;
    [[nodiscard]] Vec equilibrium(std::size_t i, std::size_t dim) const;
};

// -----------------------------------------------------------------------------
// Stability conditions
// -----------------------------------------------------------------------------

struct ConditionResult {
    bool ok = false;
    double value = 0.0;       ///< lambda0 (p_hat + mu p_tilde) or mu max_i sum_j p_ij lambda_ji
    double alpha_star = 0.0;  ///< -ln(value) / 2; positive exactly when ok
    double p_hat = 0.0;
    double p_tilde = 0.0;
};

ConditionResult check_S1(double lambda0, double mu, const SwitchingChain& chain);
ConditionResult check_S2(const Matrix& Lambda, double mu, const SwitchingChain& chain);

/// min(C(t-s, k) p_hat^{t-s-k} p_tilde^k, 1) for 0 <= k <= t-s, else 0.
double switching_count_bound(double p_hat, double p_tilde, Time s, Time t, std::int64_t k);
double switching_count_bound(const SwitchingChain& chain, Time s, Time t, std::int64_t k);

// -----------------------------------------------------------------------------
// Simulation
// -----------------------------------------------------------------------------

using DisturbanceFn = std::function<Vec(Time)>;

struct SwitchedBatch {
    TrajectoryBatch batch;                         ///< joint states (mode, x); `mode` filled
    std::vector<std::vector<int>> switches;        ///< N_t per path
    std::vector<std::vector<long double>> log_norm;///< log ||X_t|| per path
    std::vector<Time> overflow_time;               ///< first non-finite time per path, -1 if none
    Time first_overflow = -1;
};

/// n paths of the switched system from x0. With a disturbance the step is
/// f_{sigma_t}(X_t, w_t), and w_t is recorded for every t <= T.
SwitchedBatch simulate_switched(const SwitchedSystem& sys, const Vec& x0, Time T, std::size_t n,
                                std::uint64_t seed, const DisturbanceFn* disturbance = nullptr);

/// Mode paths only (sigma_0 .. sigma_T) using the same stream layout.
std::vector<std::vector<int>> simulate_modes(const SwitchingChain& chain, Time T, std::size_t n, std::uint64_t seed);

/// Post-hoc switch counts N_t = sum_{s <= t} 1{sigma_{s-1} != sigma_s}.
std::vector<int> count_switches(const std::vector<int>& modes);

/// Empirical law of the number of switches in (s, t] over the given mode paths;
/// entry k is P(N = k) for k = 0..t-s.
std::vector<StatPoint> empirical_switch_law(const std::vector<std::vector<int>>& modes, Time s, Time t);

// -----------------------------------------------------------------------------
// Verification and diagnostics
// -----------------------------------------------------------------------------

struct LogRadialGrid {
    double r_min = 1e-3;
    double r_max = 1e3;
    int radii = 25;
    int directions = 16;

    [[nodiscard]] std::vector<Vec> points(std::size_t dim) const;
};

struct LyapunovItem {
    std::string name;
    bool applicable = true;
    bool ok = true;
    double worst = kInf;  ///< min of rhs - lhs over the grid (relative to max(1, |rhs|))
    Vec at;
    std::size_t mode_i = 0;
    std::size_t mode_j = 0;
    std::size_t checked = 0;
};

struct LyapunovReport {
    std::vector<LyapunovItem> items;  ///< V1, V2, V3, V3'
    [[nodiscard]] bool ok() const;
    [[nodiscard]] const LyapunovItem& item(const std::string& name) const;
};

LyapunovReport verify_lyapunov_family(const LyapunovFamily& lyap, const SwitchedSystem& sys,
                                      const LogRadialGrid& grid = {});

struct PathwiseViolation {
    std::size_t path = 0;
    Time t = 0;
    long double log_excess = 0.0L;
};

struct PathwiseReport {
    bool ok = true;
    bool precondition_ok = true;
    std::string precondition;
    std::size_t checked = 0;
    long double worst_log_ratio = -std::numeric_limits<long double>::infinity();  ///< max of log(lhs / rhs)
    std::vector<PathwiseViolation> violations;
};

/// V'_{sigma_t}(X_t) <= mu^{N_t} lambda0^t V'_{sigma_0}(x0) (1 + 1e-9) for t < tau_r,
/// evaluated in the log domain. Runs the (V1)-(V3) grid checks first.
PathwiseReport pathwise_inequality_check(const SwitchedBatch& sb, const LyapunovFamily& lyap,
                                         const SwitchedSystem& sys, const LogRadialGrid& grid = {});

struct DiagnosticsOptions {
    double decay_target = 1e-6;      ///< (a): final discounted mean below this fraction of the initial
    double as_threshold = 1e-20;     ///< (b): max_paths ||X_T|| / ||x0|| below this
    bool check_envelope = true;      ///< (b'): ||X_T|| <= mu^{N_T} lambda0^T ||x0|| in the log domain
};

struct DiagnosticsReport {
    // (a)
    bool discounted_ok = true;
    bool discounted_monotone = true;
    StatSummary discounted;  ///< mean of e^{alpha* t} V_{sigma_t}(X_t)
    double discounted_ratio = 0.0;  ///< final / initial mean
    // (b)
    bool as_ok = true;
    long double max_log_final_ratio = 0.0L;  ///< max_paths log(||X_T|| / ||x0||)
    bool envelope_ok = true;
    std::size_t envelope_violations = 0;
    // (c)
    bool l1_ok = true;
    StatSummary alpha1_mean;
    double l1_bound = 0.0;
    double l1_sup_mean = 0.0;
    double l1_margin_se = kInf;
    bool divergent = false;
    [[nodiscard]] bool ok() const { return discounted_ok && as_ok && envelope_ok && l1_ok; }
};

DiagnosticsReport stability_diagnostics(const SwitchedBatch& sb, const LyapunovFamily& lyap, const SwitchedSystem& sys,
                                        double alpha_star, const DiagnosticsOptions& options = {});

/// Evidence for ker(f_i - id) = {0}: the smallest ||f_i(x) - x|| / ||x|| per map.
/// Exact (smallest singular value of A - I) for linear maps, a grid minimum otherwise.
struct FixedPointEvidence {
    bool ok = true;
    double tol = 1e-8;
    std::vector<double> min_ratio;
    std::vector<Vec> at;      ///< grid minimiser; empty for linear maps
    std::vector<bool> exact;
    std::size_t checked = 0;
};

FixedPointEvidence fixed_point_search(const SwitchedSystem& sys, const LogRadialGrid& grid = {}, double tol = 1e-8);

/// Smallest singular value of a square matrix.
double min_singular_value(const Matrix& A);

// Finitely many (epsilon, delta) and (r, epsilon', T) instances of the stability
// definitions, with delta and T taken from the constructive choices:
//   SM1: delta = 0.999 alpha2^{-1}(eps), sup_t mean alpha1(|X_t|) <= eps + 3 SE
//   SM2: T = max(0, ln(eps' / alpha2(r)) / ln(a')), a' = value e^{alpha}; sup_{t > T} mean <= eps' + 3 SE
//   AS1: from |x0| < 1, T_j is the last time path j is at least eps; delta = min_j eps L^{-T_j} ^ 1
//        with L the largest Lipschitz constant on the unit ball; rerun from 0.999 delta, same seed.

struct FinitizationOptions {
    std::vector<double> eps = {1.0, 0.1, 0.01};
    std::vector<double> radii = {1.0, 10.0};
    Vec direction;  ///< start direction; defaults to the first axis
    Time horizon = 100;
    std::size_t paths = 1000;
};

struct FiniteCase {
    std::string item;  ///< SM1, SM2 or AS1
    double eps = 0.0;
    double r = 0.0;    ///< SM2 radius
    double delta = 0.0;
    double T = 0.0;    ///< SM2 waiting time or AS1 max T_j
    double value = 0.0; ///< sup of the mean (SM) or of max_j |X_t| (AS1)
    double se = 0.0;
    bool applicable = true;
    bool ok = true;
    std::string note;
};

struct FinitizationReport {
    double a_prime = 0.0;
    std::vector<FiniteCase> cases;
    [[nodiscard]] bool ok() const;
};

FinitizationReport finite_stability_checks(const SwitchedSystem& sys, const LyapunovFamily& lyap, double alpha_star,
                                           const FinitizationOptions& options, std::uint64_t seed);

}  // namespace hybstab
