#pragma once

// Finite-horizon optimal stopping on finite state spaces. The reward is
// h(n, x) = V(x) / theta(n) off K and 0 on K; the value table is the smallest
// function dominating h that is a one-step supermartingale off K.

#include "hybstab/certificate/certificate.hpp"
#include "hybstab/chain/kernel.hpp"

#include <iosfwd>
#include <vector>

namespace hybstab {

struct Reward {
    StateFn V;
    Theta theta = Theta::exponential(0.0);
    Region K;

    [[nodiscard]] double operator()(Time n, const State& x) const;
};

struct ValueTable {
    Time N = 0;
    /// phi[n][x] for 0 <= n <= N and x indexing the kernel's states.
    std::vector<std::vector<double>> phi;

    [[nodiscard]] std::size_t states() const { return phi.empty() ? 0 : phi.front().size(); }
    /// Lookup with t clamped to N.
    [[nodiscard]] double at(Time t, std::int64_t x) const;
};

/// Backward induction phi(N) = h(N), phi(n, x) = max(h(n, x), sum_y P_n(x, y) phi(n+1, y))
/// off K, 0 on K. Throws NumericError (certificate infeasible) on overflow.
ValueTable value_iterate(const Kernel& kernel, const Reward& reward, Time N);

/// Certificate whose phi is the table (clamped at N) and whose theta and K are
/// the reward's.
Certificate table_to_certificate(const ValueTable& table, const Reward& reward);

struct TableCheck {
    bool ok = true;
    double worst = kInf;  ///< minimum of the checked difference
    Time worst_n = 0;
    std::int64_t worst_x = 0;
};

/// phi(n, x) - h(n, x) >= 0 everywhere.
TableCheck check_envelope(const ValueTable& table, const Reward& reward);
/// phi(n, x) - sum_y P_n(x, y) phi(n+1, y) >= 0 for x off K and n < N.
TableCheck check_one_step(const ValueTable& table, const Kernel& kernel, const Region& K);
/// phi = 0 on K.
TableCheck check_zero_on_K(const ValueTable& table, const Region& K);

/// sup over n <= N and x of |phi_N(n, x) - phi_{N+extra}(n, x)|.
double truncation_gap(const Kernel& kernel, const Reward& reward, Time N, Time extra = 5);

struct MinimalityReport {
    bool candidate_valid = true;  ///< psi dominates h, has psi(N) >= h(N) and is a one-step supermartingale
    bool dominates = true;        ///< psi >= phi pointwise
    double worst = kInf;          ///< min of psi - phi
    std::string reason;
};

/// Compares an alternative certificate psi(n, x) on 0 <= n <= N with the table.
MinimalityReport minimality_check(const ValueTable& table, const PhiFn& psi, const Kernel& kernel,
                                  const Reward& reward);

/// CSV columns n,state,phi.
void write_table_csv(std::ostream& os, const ValueTable& table, const Kernel* labeller = nullptr);

}  // namespace hybstab
