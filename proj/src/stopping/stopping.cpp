#include "hybstab/stopping/stopping.hpp"

#include "hybstab/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace hybstab {

namespace {

std::size_t state_count(const Kernel& kernel) {
    auto n = kernel.finite_size();
    if (!n) throw ValidationError("kernel", "optimal stopping needs a finite state space");
    return *n;
}

double continuation(const Kernel& kernel, Time n, std::int64_t x, const std::vector<double>& next) {
    auto row = kernel.row(n, site_state(x));
    if (!row) throw ValidationError("kernel", "finite rows required");
    double s = 0.0;
    for (const auto& tr : *row) {
        if (tr.prob != 0.0) s += tr.prob * next.at(static_cast<std::size_t>(tr.to.site));
    }
    return s;
}

}  // namespace

double Reward::operator()(Time n, const State& x) const {
    if (K.contains(x)) return 0.0;
    return V(x) * theta.inverse(n);
}

double ValueTable::at(Time t, std::int64_t x) const {
    if (t < 0) throw DomainError("value table queried at negative time");
    const auto n = static_cast<std::size_t>(std::min(t, N));
    return phi.at(n).at(static_cast<std::size_t>(x));
}

ValueTable value_iterate(const Kernel& kernel, const Reward& reward, Time N) {
    if (N < 0) throw ValidationError("horizon", "must be >= 0");
    const std::size_t S = state_count(kernel);
    ValueTable table;
    table.N = N;
    table.phi.assign(static_cast<std::size_t>(N) + 1, std::vector<double>(S, 0.0));

    auto reward_at = [&](Time n, std::size_t x) {
        const double h = reward(n, site_state(static_cast<std::int64_t>(x)));
        if (!std::isfinite(h)) {
            throw NumericError("certificate infeasible: reward V/theta overflows at n=" + std::to_string(n) +
                               ", state " + std::to_string(x));
        }
        return h;
    };

    auto& last = table.phi[static_cast<std::size_t>(N)];
    for (std::size_t x = 0; x < S; ++x) last[x] = reward_at(N, x);

    for (Time n = N - 1; n >= 0; --n) {
        const auto& next = table.phi[static_cast<std::size_t>(n) + 1];
        auto& cur = table.phi[static_cast<std::size_t>(n)];
        parallel_for(S, [&](std::size_t x) {
            if (reward.K.contains(site_state(static_cast<std::int64_t>(x)))) {
                cur[x] = 0.0;
                return;
            }
            const double cont = continuation(kernel, n, static_cast<std::int64_t>(x), next);
            cur[x] = std::max(reward_at(n, x), cont);
            if (!std::isfinite(cur[x])) throw NumericError("certificate infeasible: value overflow");
        });
    }
    return table;
}

Certificate table_to_certificate(const ValueTable& table, const Reward& reward) {
    for (const auto& row : table.phi) {
        for (double v : row) {
            if (!std::isfinite(v)) throw NumericError("value table has infinite entries");
        }
    }
    auto phi = [table](Time t, const State& x) { return table.at(t, x.site); };
    return Certificate::custom(phi, reward.V, reward.theta, reward.K, Certificate::Form::table,
                               "value table, N=" + std::to_string(table.N) + " (clamped beyond N)");
}

TableCheck check_envelope(const ValueTable& table, const Reward& reward) {
    TableCheck c;
    for (Time n = 0; n <= table.N; ++n) {
        for (std::size_t x = 0; x < table.states(); ++x) {
            const double d = table.phi[static_cast<std::size_t>(n)][x] -
                             reward(n, site_state(static_cast<std::int64_t>(x)));
            if (d < c.worst) {
                c.worst = d;
                c.worst_n = n;
                c.worst_x = static_cast<std::int64_t>(x);
            }
        }
    }
    c.ok = c.worst >= 0.0;
    return c;
}

TableCheck check_one_step(const ValueTable& table, const Kernel& kernel, const Region& K) {
    TableCheck c;
    for (Time n = 0; n < table.N; ++n) {
        const auto& next = table.phi[static_cast<std::size_t>(n) + 1];
        for (std::size_t x = 0; x < table.states(); ++x) {
            const auto xi = static_cast<std::int64_t>(x);
            if (K.contains(site_state(xi))) continue;
            const double d = table.phi[static_cast<std::size_t>(n)][x] - continuation(kernel, n, xi, next);
            if (d < c.worst) {
                c.worst = d;
                c.worst_n = n;
                c.worst_x = xi;
            }
        }
    }
    c.ok = c.worst >= 0.0;
    return c;
}

TableCheck check_zero_on_K(const ValueTable& table, const Region& K) {
    TableCheck c;
    c.worst = 0.0;
    for (Time n = 0; n <= table.N; ++n) {
        for (std::size_t x = 0; x < table.states(); ++x) {
            const auto xi = static_cast<std::int64_t>(x);
            if (!K.contains(site_state(xi))) continue;
            const double v = -std::abs(table.phi[static_cast<std::size_t>(n)][x]);
            if (v < c.worst) {
                c.worst = v;
                c.worst_n = n;
                c.worst_x = xi;
            }
        }
    }
    c.ok = c.worst == 0.0;
    return c;
}

double truncation_gap(const Kernel& kernel, const Reward& reward, Time N, Time extra) {
    const ValueTable a = value_iterate(kernel, reward, N);
    const ValueTable b = value_iterate(kernel, reward, N + extra);
    double gap = 0.0;
    for (Time n = 0; n <= N; ++n) {
        for (std::size_t x = 0; x < a.states(); ++x) {
            gap = std::max(gap, std::abs(a.phi[static_cast<std::size_t>(n)][x] - b.phi[static_cast<std::size_t>(n)][x]));
        }
    }
    return gap;
}

MinimalityReport minimality_check(const ValueTable& table, const PhiFn& psi, const Kernel& kernel,
                                  const Reward& reward) {
    MinimalityReport rep;
    const std::size_t S = table.states();
    std::vector<std::vector<double>> grid(static_cast<std::size_t>(table.N) + 1, std::vector<double>(S));
    for (Time n = 0; n <= table.N; ++n) {
        for (std::size_t x = 0; x < S; ++x) {
            grid[static_cast<std::size_t>(n)][x] = psi(n, site_state(static_cast<std::int64_t>(x)));
        }
    }
    for (Time n = 0; n <= table.N && rep.candidate_valid; ++n) {
        for (std::size_t x = 0; x < S; ++x) {
            const auto xi = static_cast<std::int64_t>(x);
            const double v = grid[static_cast<std::size_t>(n)][x];
            if (v < reward(n, site_state(xi))) {
                rep.candidate_valid = false;
                rep.reason = "does not dominate the reward at n=" + std::to_string(n) + ", state " + std::to_string(x);
                break;
            }
            if (n < table.N && !reward.K.contains(site_state(xi))) {
                const double cont = continuation(kernel, n, xi, grid[static_cast<std::size_t>(n) + 1]);
                if (v < cont - 1e-12 * std::max(1.0, std::abs(v))) {
                    rep.candidate_valid = false;
                    rep.reason = "not a supermartingale at n=" + std::to_string(n) + ", state " + std::to_string(x);
                    break;
                }
            }
        }
    }
    for (Time n = 0; n <= table.N; ++n) {
        for (std::size_t x = 0; x < S; ++x) {
            rep.worst = std::min(rep.worst, grid[static_cast<std::size_t>(n)][x] - table.phi[static_cast<std::size_t>(n)][x]);
        }
    }
    rep.dominates = rep.worst >= -1e-12;
    return rep;
}

void write_table_csv(std::ostream& os, const ValueTable& table, const Kernel* labeller) {
    os << "n,state,phi\n";
    const auto old = os.precision(17);
    for (Time n = 0; n <= table.N; ++n) {
        for (std::size_t x = 0; x < table.states(); ++x) {
            const State s = site_state(static_cast<std::int64_t>(x));
            os << n << ',' << (labeller ? labeller->label(s) : std::to_string(x)) << ','
               << table.phi[static_cast<std::size_t>(n)][x] << '\n';
        }
    }
    os.precision(old);
}

}  // namespace hybstab
