#include "hybstab/chain/simulate.hpp"

#include "hybstab/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace hybstab {

Time TrajectoryBatch::horizon() const {
    if (paths.empty()) return -1;
    const Time h = paths.front().horizon();
    for (const auto& p : paths) {
        if (p.horizon() != h) throw DomainError("trajectory batch has ragged horizons");
    }
    return h;
}

State sample_step(const Kernel& kernel, Time t, const State& x, Rng& rng) { return kernel.sample(t, x, rng); }

TrajectoryBatch simulate_batch(const Kernel& kernel, const State& x0, Time horizon, std::size_t n,
                               std::uint64_t seed) {
    if (horizon < 0) throw ValidationError("horizon", "must be >= 0");
    if (n == 0) throw ValidationError("paths", "must be >= 1");
    kernel.check_state(x0);

    TrajectoryBatch batch;
    batch.space = kernel.space();
    batch.seed = seed;
    batch.paths.resize(n);
    parallel_for(n, [&](std::size_t j) {
        Trajectory& path = batch.paths[j];
        path.seed = child_seed(seed, j);
        Rng rng(path.seed);
        path.states.reserve(static_cast<std::size_t>(horizon) + 1);
        path.states.push_back(x0);
        for (Time t = 0; t < horizon; ++t) {
            path.states.push_back(sample_step(kernel, t, path.states.back(), rng));
        }
    });
    return batch;
}

StatSummary estimate_functional(const TrajectoryBatch& batch,
                                const std::function<double(Time, const State&)>& g) {
    StatSummary out;
    const Time horizon = batch.horizon();
    if (horizon < 0) return out;
    out.per_time.resize(static_cast<std::size_t>(horizon) + 1);
    std::vector<double> column(batch.size());
    for (Time t = 0; t <= horizon; ++t) {
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const double v = g(t, batch.paths[j].states[static_cast<std::size_t>(t)]);
            if (!std::isfinite(v)) {
                throw NumericError("functional is not finite at path " + std::to_string(j) + ", t=" +
                                   std::to_string(t));
            }
            column[j] = v;
        }
        out.per_time[static_cast<std::size_t>(t)] = summarize(column);
    }
    return out;
}

StatSummary estimate_functional(const TrajectoryBatch& batch, const std::function<double(const State&)>& g) {
    return estimate_functional(batch, [&g](Time, const State& x) { return g(x); });
}

void write_trajectories_csv(std::ostream& os, const TrajectoryBatch& batch, const Kernel* labeller,
                            std::size_t max_paths) {
    const std::size_t n = std::min(max_paths, batch.size());
    std::size_t dim = 0;
    std::size_t wdim = 0;
    bool has_mode = false;
    if (n > 0) {
        const auto& first = batch.paths.front();
        if (!first.states.empty()) dim = first.states.front().x.size();
        has_mode = !first.mode.empty() || batch.space == SpaceKind::joint;
        if (!first.disturbance.empty()) wdim = first.disturbance.front().size();
    }
    const bool continuous = batch.space == SpaceKind::real || batch.space == SpaceKind::joint;

    os << "path_id,t";
    if (continuous) {
        for (std::size_t k = 0; k < dim; ++k) os << ",x" << k;
    } else {
        os << ",state";
    }
    if (has_mode) os << ",mode";
    for (std::size_t k = 0; k < wdim; ++k) os << ",w" << k;
    os << '\n';

    const auto old_precision = os.precision(17);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& p = batch.paths[j];
        for (std::size_t t = 0; t < p.states.size(); ++t) {
            const State& s = p.states[t];
            os << j << ',' << t;
            if (continuous) {
                for (double c : s.x) os << ',' << c;
            } else {
                os << ',' << (labeller ? labeller->label(s) : std::to_string(s.site));
            }
            if (has_mode) os << ',' << (p.mode.empty() ? static_cast<int>(s.site) : p.mode[t]);
            if (wdim > 0) {
                for (double w : p.disturbance[t]) os << ',' << w;
            }
            os << '\n';
        }
    }
    os.precision(old_precision);
}

}  // namespace hybstab
