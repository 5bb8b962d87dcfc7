#pragma once

// =============================================================================
// Supermartingale certificates (phi, V, theta, K)
// =============================================================================
// A certificate bounds sup_t E[V(X_t)] by C*beta + delta + gamma*phi(0, x0):
//   C     = sum theta(t)          gamma = sup theta(t)
//   delta = sup_{x in K} V(x)     beta  = sup_{x in K} E_x[phi(0, X_1) 1{X_1 not in K}]
// The stopped process phi(t ^ tau_K, X_{t ^ tau_K}) must be a supermartingale
// from every start outside K, and phi(t, x) >= V(x) / theta(t) outside K.
// =============================================================================

#include "hybstab/certificate/theta.hpp"
#include "hybstab/chain/simulate.hpp"
#include "hybstab/hybrid/region.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hybstab {

using StateFn = std::function<double(const State&)>;
using PhiFn = std::function<double(Time, const State&)>;

class Certificate {
public:
    enum class Form {
        exponential,           ///< e^{alpha t} V(x)
        exponential_outside_K, ///< e^{alpha t} V(x) off K, 0 on K
        table,                 ///< lookup into a value table
        custom
    };

    static Certificate exponential(StateFn V, double alpha, Region K);
    static Certificate exponential_outside_K(StateFn V, double alpha, Region K);
    static Certificate custom(PhiFn phi, StateFn V, Theta theta, Region K, Form form = Form::custom,
                              std::string description = "custom");

    [[nodiscard]] double phi(Time t, const State& x) const { return phi_(t, x); }
    [[nodiscard]] double V(const State& x) const { return V_(x); }
    [[nodiscard]] const Theta& theta() const { return theta_; }
    [[nodiscard]] const Region& K() const { return K_; }
    [[nodiscard]] Form form() const { return form_; }
    [[nodiscard]] const std::string& description() const { return description_; }
    [[nodiscard]] const PhiFn& phi_fn() const { return phi_; }
    [[nodiscard]] const StateFn& V_fn() const { return V_; }

private:
    Certificate(PhiFn phi, StateFn V, Theta theta, Region K, Form form, std::string description);

    PhiFn phi_;
    StateFn V_;
    Theta theta_;
    Region K_;
    Form form_;
    std::string description_;
};

std::string to_string(Certificate::Form form);

// -----------------------------------------------------------------------------
// Constants
// -----------------------------------------------------------------------------

enum class Provenance { exact, monte_carlo, grid };
std::string to_string(Provenance p);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    Provenance provenance = Provenance::exact;
    std::string note;
};

struct CertificateConstants {
    Estimate C;
    Estimate gamma;
    Estimate delta;
    Estimate beta;

    /// All four finite and nonnegative, and C >= gamma.
    [[nodiscard]] bool accepted() const;
};

CertificateConstants constants_from(const CGamma& cg, Estimate delta, Estimate beta);

struct DeltaOptions {
    std::size_t points_per_axis = 201;     ///< ball grids; always includes the boundary ends
    std::size_t dim = 1;                   ///< coordinates of ball regions
    std::optional<double> lipschitz;       ///< adds L * (half cell diagonal) when supplied
    std::vector<std::int64_t> modes;       ///< evaluate joint states (mode, y) for each mode; empty = real states
};

/// sup_{x in K} V(x): exact for finite K, grid maximum (plus Lipschitz slack)
/// for balls. Throws DomainError for empty K and NumericError for infinite V.
Estimate compute_delta(const StateFn& V, const Region& K, const DeltaOptions& options = {});

struct BetaOptions {
    enum class Mode { exact, monte_carlo };
    Mode mode = Mode::exact;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    /// Start points; defaults to the members of a finite K. Required for balls.
    std::optional<std::vector<State>> candidates;
};

struct BetaResult {
    Estimate beta;
    State argmax;
    std::vector<std::pair<State, StatPoint>> per_start;
};

/// beta = max over start points x0 in K of E[phi(0, X_1) 1{X_1 not in K}] under
/// one step of `kernel` from x0 (time index 0). Exact mode needs finite rows.
BetaResult compute_beta(const Kernel& kernel, const PhiFn& phi, const Region& K, const BetaOptions& options = {});

/// C*beta + delta + gamma*phi0.
double theorem_bound(const CertificateConstants& constants, double phi0);

// -----------------------------------------------------------------------------
// Verification
// -----------------------------------------------------------------------------

struct StateSlack {
    State x;
    Time t = 0;
    double slack = kInf;
};

struct ExactVerifyReport {
    bool ok = true;
    double worst_slack = kInf;  ///< min over (t, x) of phi(t,x) - sum_y P_t(x,y) phi(t+1,y)
    Time worst_t = 0;
    State worst_x;
    std::size_t checked = 0;
    std::size_t violations = 0;
    std::vector<StateSlack> per_state;  ///< worst slack over t for each checked x outside K
    bool envelope_ok = true;            ///< phi(t,x) >= V(x)/theta(t) at every checked (t, x)
    double worst_envelope_gap = kInf;
    std::string coverage;
};

/// Checks the one-step supermartingale inequality of the stopped process for
/// every t < T and every x outside K in `domain` (all states for finite kernels
/// when empty). Rows must have finite support; targets in K contribute
/// phi(t+1, y) once. Tolerance is 1e-12 relative to max(1, |phi(t,x)|).
ExactVerifyReport verify_supermartingale_exact(const Kernel& kernel, const Certificate& cert, Time T,
                                               std::vector<State> domain = {});

struct McTimePoint {
    Time t = 0;
    StatPoint increment;       ///< mean and SE of the stopped increment over all paths
    std::size_t surviving = 0; ///< paths with tau_K > t
    bool tested = false;
    double z = 0.0;
    bool rejected = false;
};

struct McVerifyReport {
    bool ok = true;
    double confidence = 0.99;
    double z_critical = 0.0;
    std::vector<McTimePoint> points;
    std::size_t skipped = 0;
    std::size_t rejections = 0;
    Time first_rejection = -1;
    /// E[V(X_s) 1{tau > s}] <= phi(0, x0) theta(s) within 3 SE at every s.
    bool first_bound_ok = true;
    double first_bound_worst_margin = kInf;  ///< min of (bound - mean) / SE (inf when SE = 0 and gap >= 0)
    Time first_bound_worst_s = 0;
};

/// Statistical surrogate: one-sided z-test per time that the mean stopped
/// increment is <= 0. Only paths starting outside K take part; time points
/// with fewer than `min_surviving` active paths are skipped.
McVerifyReport verify_supermartingale_mc(const TrajectoryBatch& batch, const Certificate& cert,
                                         double confidence = 0.99, std::size_t min_surviving = 100);

struct BoundCheckReport {
    bool ok = true;           ///< no per-time mean exceeds bound + 3 SE
    double bound = 0.0;
    double sup_mean = 0.0;
    Time sup_t = 0;
    double margin_se = kInf;  ///< min over t of (bound - mean_t) / SE_t
    StatSummary means;
};

BoundCheckReport empirical_bound_check(const TrajectoryBatch& batch, const StateFn& V, double bound);

/// (bound - mean) / se with the conventions used in reports: +inf for a
/// nonnegative gap at zero SE, -inf for a negative one.
double margin_in_se(double bound, double mean, double se);

}  // namespace hybstab
