#pragma once

// =============================================================================
// Markov transition kernels
// =============================================================================
// A kernel maps (time index, state) to the law of the next state. Finite
// kernels are row-stochastic matrices, validated once at construction; a
// violating row is a construction error. Kernels are immutable after
// construction and safe to share across threads.
// =============================================================================

#include "hybstab/core/rng.hpp"
#include "hybstab/core/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hybstab {

struct Transition {
    State to;
    double prob = 0.0;
};

class Kernel {
public:
    virtual ~Kernel() = default;

    [[nodiscard]] virtual SpaceKind space() const = 0;
    [[nodiscard]] virtual bool homogeneous() const = 0;

    /// Number of time indices the law is defined for; queries t >= horizon are
    /// errors. nullopt means defined for all t.
    [[nodiscard]] virtual std::optional<Time> horizon() const { return std::nullopt; }

    /// Number of states for finite kinds.
    [[nodiscard]] virtual std::optional<std::size_t> finite_size() const { return std::nullopt; }

    /// Throws DomainError if x is not in the state space.
    virtual void check_state(const State& x) const = 0;

    /// Draws X_{t+1} given X_t = x.
    virtual State sample(Time t, const State& x, Rng& rng) const = 0;

    /// Exact law of X_{t+1} when it has finite support; nullopt otherwise.
    [[nodiscard]] virtual std::optional<std::vector<Transition>> row(Time t, const State& x) const {
        (void)t;
        (void)x;
        return std::nullopt;
    }

    /// Human-readable label used in CSV state columns (finite and lattice kinds).
    [[nodiscard]] virtual std::string label(const State& x) const;

    /// Dimension of continuous coordinates (0 for discrete spaces).
    [[nodiscard]] virtual std::size_t dim() const { return 0; }

protected:
    void check_time(Time t) const;
};

using KernelPtr = std::shared_ptr<const Kernel>;

/// Throws ValidationError naming the offending row if `m` is not square and
/// row-stochastic within 1e-12 with nonnegative entries.
void validate_stochastic(const Matrix& m, const std::string& field = "matrix");

// -----------------------------------------------------------------------------
// Finite kernels: single matrix, explicit/cyclic family, or closed-form rule
// -----------------------------------------------------------------------------

class FiniteKernel final : public Kernel {
public:
    enum class Extent {
        single,    ///< one matrix for every t
        explicit_, ///< matrices[t] for t < matrices.size(); later t are errors
        cyclic     ///< matrices[t mod size]
    };
    using Rule = std::function<Matrix(Time)>;

    FiniteKernel(std::vector<std::string> labels, Matrix matrix);
    FiniteKernel(std::vector<std::string> labels, std::vector<Matrix> family, Extent extent);
    /// Closed-form time-indexed rule; each queried matrix is validated.
    FiniteKernel(std::vector<std::string> labels, Rule rule, std::optional<Time> horizon);

    [[nodiscard]] SpaceKind space() const override { return SpaceKind::finite; }
    [[nodiscard]] bool homogeneous() const override { return extent_ == Extent::single; }
    [[nodiscard]] std::optional<Time> horizon() const override;
    [[nodiscard]] std::optional<std::size_t> finite_size() const override { return labels_.size(); }
    void check_state(const State& x) const override;
    State sample(Time t, const State& x, Rng& rng) const override;
    [[nodiscard]] std::optional<std::vector<Transition>> row(Time t, const State& x) const override;
    [[nodiscard]] std::string label(const State& x) const override;

    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] Matrix matrix_at(Time t) const;
    /// Index of a label; throws DomainError if absent.
    [[nodiscard]] std::int64_t index_of(const std::string& label) const;

private:
    std::vector<std::string> labels_;
    std::vector<Matrix> family_;
    Extent extent_ = Extent::single;
    Rule rule_;
    std::optional<Time> rule_horizon_;
};

// -----------------------------------------------------------------------------
// Builtin samplers
// -----------------------------------------------------------------------------

/// Nearest-neighbour walk on the nonnegative integers. From x the walk moves to
/// x+1 with probability p_up(t) and to max(x-1, 0) otherwise (a hold at 0).
/// p_up(t) = schedule[t mod schedule.size()]; a one-entry schedule is homogeneous.
class BiasedWalkKernel final : public Kernel {
public:
    explicit BiasedWalkKernel(std::vector<double> up_schedule);

    [[nodiscard]] SpaceKind space() const override { return SpaceKind::lattice; }
    [[nodiscard]] bool homogeneous() const override { return schedule_.size() == 1; }
    void check_state(const State& x) const override;
    State sample(Time t, const State& x, Rng& rng) const override;
    [[nodiscard]] std::optional<std::vector<Transition>> row(Time t, const State& x) const override;

    [[nodiscard]] double p_up(Time t) const;
    [[nodiscard]] const std::vector<double>& schedule() const { return schedule_; }

private:
    std::vector<double> schedule_;
};

/// X_{t+1} = A X_t + noise_std * N(0, I).
class LinearGaussianKernel final : public Kernel {
public:
    LinearGaussianKernel(Matrix a, double noise_std);

    [[nodiscard]] SpaceKind space() const override { return SpaceKind::real; }
    [[nodiscard]] bool homogeneous() const override { return true; }
    void check_state(const State& x) const override;
    State sample(Time t, const State& x, Rng& rng) const override;
    [[nodiscard]] std::size_t dim() const override { return a_.rows; }

private:
    Matrix a_;
    double noise_std_;
};

/// User-composed sampler on any space; `law` may return a finite row.
class FunctionKernel final : public Kernel {
public:
    using Sampler = std::function<State(Time, const State&, Rng&)>;
    using RowFn = std::function<std::optional<std::vector<Transition>>(Time, const State&)>;

    FunctionKernel(SpaceKind space, std::size_t dim, bool homogeneous, Sampler sampler, RowFn row = {});

    [[nodiscard]] SpaceKind space() const override { return space_; }
    [[nodiscard]] bool homogeneous() const override { return homogeneous_; }
    void check_state(const State& x) const override;
    State sample(Time t, const State& x, Rng& rng) const override { return sampler_(t, x, rng); }
    [[nodiscard]] std::optional<std::vector<Transition>> row(Time t, const State& x) const override;
    [[nodiscard]] std::size_t dim() const override { return dim_; }

private:
    SpaceKind space_;
    std::size_t dim_;
    bool homogeneous_;
    Sampler sampler_;
    RowFn row_;
};

/// Inverse-CDF draw from a finite probability vector (exhaustive scan).
std::size_t draw_index(const std::vector<double>& probs, double u);

}  // namespace hybstab
