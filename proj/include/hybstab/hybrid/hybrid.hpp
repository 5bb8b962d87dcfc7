#pragma once

// =============================================================================
// (Y,Z)-hybrid processes and excursion bookkeeping
// =============================================================================
// Inside K the process steps with the homogeneous kernel Y. On leaving K at
// time sigma_i it steps with Z at local clock t - sigma_i, so the first step
// taken from the exit state uses Z at clock 0. A process started outside K
// runs Z from clock 0 at time 0.
// =============================================================================

#include "hybstab/chain/simulate.hpp"
#include "hybstab/hybrid/region.hpp"

#include <functional>
#include <iosfwd>
#include <optional>

namespace hybstab {

enum class Regime : int { inside = 0, outside = 1 };

struct HybridSpec {
    KernelPtr inside;   ///< Y, time-homogeneous
    KernelPtr outside;  ///< Z, possibly time-indexed by the local clock
    Region region;

    void validate() const;
};

/// Builds paths of the hybrid process. `mode[t]` is the regime that generates
/// the step taken from time t.
TrajectoryBatch simulate_hybrid(const HybridSpec& spec, const State& x0, Time horizon, std::size_t n,
                                std::uint64_t seed);

/// Entry times tau_i, exit times sigma_i and the per-time g_t / h_t of one path.
/// The visits to K are exactly the union of [tau_i, sigma_i); an interval still
/// open at the horizon has sigma_i = +inf.
struct ExcursionRecord {
    std::vector<Time> tau;
    std::vector<ExtTime> sigma;
    std::vector<ExtTime> g;  ///< sup{s <= t : X_s in K}, -inf if empty
    std::vector<ExtTime> h;  ///< inf{s >= t : X_s in K}, +inf if empty (within the horizon)
};

ExcursionRecord excursion_decompose(const Trajectory& path, const Region& region);

/// tau_K = inf{t > 0 : X_t in K}; +inf if K is not hit within the horizon.
ExtTime first_hit_time(const Trajectory& path, const Region& region);

/// Local clock of Z at every time outside K (t - last exit time, or t when the
/// path started outside K); nullopt inside K.
std::vector<std::optional<Time>> local_clock(const ExcursionRecord& record, const Trajectory& path,
                                             const Region& region);

/// Chi-square homogeneity test of the next-state law at a fixed current state
/// across groups of histories. A rejection shows that X_{t+1} given X_t = x
/// depends on more than x, i.e. the process is not Markov.
struct MarkovFailureTest {
    State at;
    std::vector<std::vector<std::size_t>> table;  ///< [history class][next-state category]
    std::vector<State> categories;
    double statistic = 0.0;
    double dof = 0.0;
    double critical = 0.0;
    double confidence = 0.99;
    bool markov_rejected = false;
    std::size_t occurrences = 0;
};

/// history_class maps (path, time) to a class index in [0, n_classes) or -1 to skip.
MarkovFailureTest markov_failure_test(const TrajectoryBatch& batch, const State& at, int n_classes,
                                      const std::function<int(std::size_t path, Time t)>& history_class,
                                      double confidence = 0.99);

/// Convenience for hybrid batches: classes are the local clock modulo `period`.
MarkovFailureTest markov_failure_by_clock(const TrajectoryBatch& batch, const Region& region, const State& at,
                                          int period, double confidence = 0.99);

/// CSV exports: (path_id,i,tau_i,sigma_i) and (path_id,t,g_t,h_t).
void write_excursions_csv(std::ostream& os, const std::vector<ExcursionRecord>& records);
void write_gh_csv(std::ostream& os, const std::vector<ExcursionRecord>& records);

}  // namespace hybstab
