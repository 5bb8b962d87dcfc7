#include "hybstab/hybrid/hybrid.hpp"

#include "hybstab/core/parallel.hpp"
#include "hybstab/core/stats.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace hybstab {

void HybridSpec::validate() const {
    if (!inside || !outside) throw ValidationError("hybrid", "both Y and Z kernels are required");
    if (!inside->homogeneous()) throw ValidationError("hybrid.Y", "Y kernel must be time-homogeneous");
    if (inside->space() != outside->space()) throw ValidationError("hybrid", "Y and Z live on different spaces");
}

TrajectoryBatch simulate_hybrid(const HybridSpec& spec, const State& x0, Time horizon, std::size_t n,
                                std::uint64_t seed) {
    spec.validate();
    if (horizon < 0) throw ValidationError("horizon", "must be >= 0");
    if (n == 0) throw ValidationError("paths", "must be >= 1");
    spec.inside->check_state(x0);

    TrajectoryBatch batch;
    batch.space = spec.inside->space();
    batch.seed = seed;
    batch.paths.resize(n);
    parallel_for(n, [&](std::size_t j) {
        Trajectory& path = batch.paths[j];
        path.seed = child_seed(seed, j);
        Rng rng(path.seed);
        path.states.reserve(static_cast<std::size_t>(horizon) + 1);
        path.mode.reserve(static_cast<std::size_t>(horizon) + 1);
        path.states.push_back(x0);
        Time exit_time = 0;  // start outside K: Z clock runs from time 0
        for (Time t = 0;; ++t) {
            const State& x = path.states.back();
            const bool in_k = spec.region.contains(x);
            path.mode.push_back(static_cast<int>(in_k ? Regime::inside : Regime::outside));
            if (t == horizon) break;
            if (in_k) {
                path.states.push_back(spec.inside->sample(0, x, rng));
                if (!spec.region.contains(path.states.back())) exit_time = t + 1;
            } else {
                const Time clock = t - exit_time;
                if (auto h = spec.outside->horizon(); h && clock >= *h) {
                    throw HorizonError("path " + std::to_string(j) + ": excursion at t=" + std::to_string(t) +
                                       " needs Z at local clock " + std::to_string(clock) +
                                       " beyond its horizon " + std::to_string(*h));
                }
                path.states.push_back(spec.outside->sample(clock, x, rng));
            }
        }
    });
    return batch;
}

ExcursionRecord excursion_decompose(const Trajectory& path, const Region& region) {
    ExcursionRecord rec;
    const std::size_t n = path.states.size();
    std::vector<bool> in(n);
    for (std::size_t t = 0; t < n; ++t) in[t] = region.contains(path.states[t]);

    rec.g.resize(n, ExtTime::neg_inf());
    rec.h.resize(n, ExtTime::pos_inf());
    ExtTime last = ExtTime::neg_inf();
    for (std::size_t t = 0; t < n; ++t) {
        if (in[t]) last = ExtTime::at(static_cast<Time>(t));
        rec.g[t] = last;
    }
    ExtTime next = ExtTime::pos_inf();
    for (std::size_t k = n; k-- > 0;) {
        if (in[k]) next = ExtTime::at(static_cast<Time>(k));
        rec.h[k] = next;
    }

    bool inside = false;
    for (std::size_t t = 0; t < n; ++t) {
        if (!inside && in[t]) {
            rec.tau.push_back(static_cast<Time>(t));
            inside = true;
        } else if (inside && !in[t]) {
            rec.sigma.push_back(ExtTime::at(static_cast<Time>(t)));
            inside = false;
        }
    }
    if (inside) rec.sigma.push_back(ExtTime::pos_inf());
    return rec;
}

ExtTime first_hit_time(const Trajectory& path, const Region& region) {
    for (std::size_t t = 1; t < path.states.size(); ++t) {
        if (region.contains(path.states[t])) return ExtTime::at(static_cast<Time>(t));
    }
    return ExtTime::pos_inf();
}

std::vector<std::optional<Time>> local_clock(const ExcursionRecord& record, const Trajectory& path,
                                             const Region& region) {
    std::vector<std::optional<Time>> clock(path.states.size());
    Time exit_time = 0;
    std::size_t next_sigma = 0;
    for (std::size_t t = 0; t < path.states.size(); ++t) {
        while (next_sigma < record.sigma.size() && record.sigma[next_sigma].is_finite() &&
               record.sigma[next_sigma].value <= static_cast<Time>(t)) {
            exit_time = record.sigma[next_sigma].value;
            ++next_sigma;
        }
        if (!region.contains(path.states[t])) clock[t] = static_cast<Time>(t) - exit_time;
    }
    return clock;
}

MarkovFailureTest markov_failure_test(const TrajectoryBatch& batch, const State& at, int n_classes,
                                      const std::function<int(std::size_t, Time)>& history_class,
                                      double confidence) {
    MarkovFailureTest out;
    out.at = at;
    out.confidence = confidence;
    std::map<State, std::size_t> category_index;
    std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(n_classes));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& states = batch.paths[j].states;
        for (std::size_t t = 0; t + 1 < states.size(); ++t) {
            if (!(states[t] == at)) continue;
            const int cls = history_class(j, static_cast<Time>(t));
            if (cls < 0 || cls >= n_classes) continue;
            auto [it, fresh] = category_index.try_emplace(states[t + 1], category_index.size());
            if (fresh) {
                out.categories.push_back(states[t + 1]);
                for (auto& row : counts) row.push_back(0);
            }
            ++counts[static_cast<std::size_t>(cls)][it->second];
            ++out.occurrences;
        }
    }

    // drop history classes that never occurred
    for (auto& row : counts) {
        std::size_t total = 0;
        for (auto c : row) total += c;
        if (total > 0) out.table.push_back(row);
    }
    const std::size_t rows = out.table.size();
    const std::size_t cols = out.categories.size();
    if (rows < 2 || cols < 2) return out;

    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            row_sum[r] += static_cast<double>(out.table[r][c]);
            col_sum[c] += static_cast<double>(out.table[r][c]);
            total += static_cast<double>(out.table[r][c]);
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double expected = row_sum[r] * col_sum[c] / total;
            const double diff = static_cast<double>(out.table[r][c]) - expected;
            out.statistic += diff * diff / expected;
        }
    }
    out.dof = static_cast<double>((rows - 1) * (cols - 1));
    out.critical = chi_square_critical(out.dof, confidence);
    out.markov_rejected = out.statistic > out.critical;
    return out;
}

MarkovFailureTest markov_failure_by_clock(const TrajectoryBatch& batch, const Region& region, const State& at,
                                          int period, double confidence) {
    std::vector<std::vector<std::optional<Time>>> clocks(batch.size());
    parallel_for(batch.size(), [&](std::size_t j) {
        const auto rec = excursion_decompose(batch.paths[j], region);
        clocks[j] = local_clock(rec, batch.paths[j], region);
    });
    return markov_failure_test(
        batch, at, period,
        [&](std::size_t j, Time t) {
            const auto& c = clocks[j][static_cast<std::size_t>(t)];
            return c ? static_cast<int>(*c % period) : -1;
        },
        confidence);
}

void write_excursions_csv(std::ostream& os, const std::vector<ExcursionRecord>& records) {
    os << "path_id,i,tau_i,sigma_i\n";
    for (std::size_t j = 0; j < records.size(); ++j) {
        const auto& r = records[j];
        for (std::size_t i = 0; i < r.tau.size(); ++i) {
            os << j << ',' << (i + 1) << ',' << r.tau[i] << ',' << r.sigma[i].str() << '\n';
        }
    }
}

void write_gh_csv(std::ostream& os, const std::vector<ExcursionRecord>& records) {
    os << "path_id,t,g_t,h_t\n";
    for (std::size_t j = 0; j < records.size(); ++j) {
        const auto& r = records[j];
        for (std::size_t t = 0; t < r.g.size(); ++t) {
            os << j << ',' << t << ',' << r.g[t].str() << ',' << r.h[t].str() << '\n';
        }
    }
}

}  // namespace hybstab
