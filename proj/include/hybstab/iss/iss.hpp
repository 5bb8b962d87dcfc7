#pragma once

// Input-to-state stability in L1 for switched systems driven by a bounded
// deterministic disturbance: X_{t+1} = f_{sigma_t}(X_t, w_t).

#include "hybstab/certificate/certificate.hpp"
#include "hybstab/switched/switched.hpp"

#include <string>
#include <vector>

namespace hybstab {

class DisturbanceSignal {
public:
    enum class Kind { zero, constant, sinusoid, bang_bang, table };

    static DisturbanceSignal zero(std::size_t dim);
    static DisturbanceSignal constant(Vec w);
    /// amplitude * sin(2 pi t / period + phase) in every coordinate.
    static DisturbanceSignal sinusoid(double amplitude, double period, double phase, std::size_t dim);
    /// +/- level in every coordinate, flipping sign every `period` steps.
    static DisturbanceSignal bang_bang(double level, Time period, std::size_t dim);
    /// Explicit values; queries past the table are errors.
    static DisturbanceSignal table(std::vector<Vec> values);
    /// Rows of comma-separated values; an optional non-numeric header and a leading `t` column are skipped.
    static DisturbanceSignal from_csv(const std::string& path);

    [[nodiscard]] Vec at(Time t) const;
    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    /// max_{t <= T} ||w_t||
    [[nodiscard]] double sup_norm(Time T) const;
    [[nodiscard]] bool identically_zero(Time T) const;
    [[nodiscard]] std::string describe() const;

private:
    DisturbanceSignal() = default;

    Kind kind_ = Kind::zero;
    std::size_t dim_ = 1;
    Vec value_;
    double amplitude_ = 0.0;
    double period_ = 1.0;
    double phase_ = 0.0;
    std::vector<Vec> table_;
};

struct DisturbedSystem {
    SwitchedSystem system;      ///< maps evaluated as f_i(x, w)
    DisturbanceSignal disturbance = DisturbanceSignal::zero(1);
    double w_max = 0.0;
    LyapunovFamily lyap;        ///< needs Lambda
    ClassK rho = ClassK::linear(1.0);

    /// f_i(0, 0) = 0 within 1e-10 and a Lambda matrix is present.
    void validate() const;
};

struct IssEnvelope {
    ConditionResult condition;
    double alpha_star = 0.0;
    double K_radius = 0.0;
    Estimate beta;
    Estimate delta;
    double transient0 = 0.0;  ///< alpha2(||x0||)
    double offset = 0.0;      ///< beta / (1 - e^{-alpha*}) + delta
    std::vector<double> values;

    [[nodiscard]] double at(Time t) const;
};

/// Envelope t -> alpha2(||x0||) e^{-alpha* t} + beta / (1 - e^{-alpha*}) + delta with
/// K = {||y|| <= rho(w_max)}. beta is the maximum over a grid of K, every mode,
/// and the disturbance values the signal takes up to T (plus +/- w_max).
/// Throws DomainError when the (S2)-type condition fails. alpha_star <= 0 selects
/// the default -ln(value) / 2.
IssEnvelope iss_bound(const DisturbedSystem& sys, const Vec& x0, Time T, double alpha_star = 0.0);

struct IssLyapunovReport {
    LyapunovItem bounds;      ///< alpha1 <= V_i <= alpha2
    LyapunovItem comparable;  ///< V_i <= mu V_j on all of R^d
    LyapunovItem decrease;    ///< V_i(f_j(x, w)) <= lambda_ij V_i(x) when ||x|| > rho(||w||)
    [[nodiscard]] bool ok() const { return bounds.ok && comparable.ok && decrease.ok; }
};

IssLyapunovReport verify_iss_family(const DisturbedSystem& sys, const LogRadialGrid& grid = {});

struct IssReport {
    bool precondition_ok = true;
    std::string precondition;
    bool ran = false;
    bool ok = false;
    IssEnvelope envelope;
    StatSummary alpha1_mean;
    double worst_margin_se = kInf;
    Time worst_t = 0;
    bool zero_disturbance = false;
    std::optional<DiagnosticsReport> diagnostics;  ///< filled when w = 0 on the horizon
};

/// Simulates n paths and checks mean alpha1(||X_t||) <= envelope(t) + 3 SE for all t <= T.
/// A disturbance exceeding w_max is a precondition failure and nothing is simulated.
IssReport iss_check(const DisturbedSystem& sys, const Vec& x0, Time T, std::size_t n, std::uint64_t seed,
                    double alpha_star = 0.0);

}  // namespace hybstab
