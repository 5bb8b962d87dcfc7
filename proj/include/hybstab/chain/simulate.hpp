#pragma once

#include "hybstab/chain/kernel.hpp"
#include "hybstab/core/stats.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace hybstab {

/// One simulated path on times 0..T. `mode` and `disturbance`, when present,
/// have one entry per time as well.
struct Trajectory {
    std::uint64_t seed = 0;
    std::vector<State> states;
    std::vector<int> mode;
    std::vector<Vec> disturbance;

    [[nodiscard]] Time horizon() const { return static_cast<Time>(states.size()) - 1; }
};

struct TrajectoryBatch {
    SpaceKind space = SpaceKind::finite;
    std::uint64_t seed = 0;
    std::vector<Trajectory> paths;

    [[nodiscard]] std::size_t size() const { return paths.size(); }
    /// Common horizon; throws if paths disagree.
    [[nodiscard]] Time horizon() const;
};

struct StatSummary {
    std::vector<StatPoint> per_time;
    double confidence = 0.99;
};

/// Draws X_{t+1} given X_t = x under the kernel's time-t law.
State sample_step(const Kernel& kernel, Time t, const State& x, Rng& rng);

/// n independent paths from x0; path j uses child_seed(seed, j).
TrajectoryBatch simulate_batch(const Kernel& kernel, const State& x0, Time horizon, std::size_t n,
                               std::uint64_t seed);

/// Per-time mean and SE of g(X_t) across paths.
StatSummary estimate_functional(const TrajectoryBatch& batch, const std::function<double(const State&)>& g);
/// Time-dependent variant: g(t, X_t).
StatSummary estimate_functional(const TrajectoryBatch& batch,
                                const std::function<double(Time, const State&)>& g);

/// Writes `path_id,t,state...,mode,disturbance...`. State columns depend on the
/// space: one `state` label column for finite/lattice, x0..x{d-1} for real, and
/// `mode` plus x columns for joint states. Doubles use 17 significant digits.
void write_trajectories_csv(std::ostream& os, const TrajectoryBatch& batch, const Kernel* labeller = nullptr,
                            std::size_t max_paths = SIZE_MAX);

}  // namespace hybstab
