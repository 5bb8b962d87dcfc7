#pragma once

// Independent optimal-stopping oracles on the outcome tree of a finite chain.
// Neither uses the Markov property: values are computed on full histories.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// P(t) is the transition matrix of the step taken from time t.
using MatrixAt = std::function<std::vector<std::vector<double>>(int t)>;
/// Reward h(t, x); states in K are encoded by in_k.
using RewardFn = std::function<double(int t, int x)>;

struct StoppingProblem {
    MatrixAt P;
    RewardFn h;
    std::vector<bool> in_k;
    int N = 0;
};

namespace detail {

// Value of the best rule from a node whose full history is `path`, ending at time t.
inline double tree_value(const StoppingProblem& pb, std::vector<int>& path, int t) {
    const int x = path.back();
    if (pb.in_k[static_cast<std::size_t>(x)]) return 0.0;
    const double stop = pb.h(t, x);
    if (t == pb.N) return stop;
    const auto P = pb.P(t);
    double cont = 0.0;
    for (std::size_t y = 0; y < P[static_cast<std::size_t>(x)].size(); ++y) {
        const double p = P[static_cast<std::size_t>(x)][y];
        if (p == 0.0) continue;
        path.push_back(static_cast<int>(y));
        cont += p * tree_value(pb, path, t + 1);
        path.pop_back();
    }
    return std::max(stop, cont);
}

struct TreeNode {
    int t = 0;
    int x = 0;
    std::vector<std::pair<double, int>> children;  // (probability, node index)
};

inline int build_tree(const StoppingProblem& pb, std::vector<TreeNode>& nodes, int t, int x) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({t, x, {}});
    if (pb.in_k[static_cast<std::size_t>(x)] || t == pb.N) return id;
    const auto P = pb.P(t);
    for (std::size_t y = 0; y < P[static_cast<std::size_t>(x)].size(); ++y) {
        const double p = P[static_cast<std::size_t>(x)][y];
        if (p == 0.0) continue;
        const int child = build_tree(pb, nodes, t + 1, static_cast<int>(y));
        nodes[static_cast<std::size_t>(id)].children.emplace_back(p, child);
    }
    return id;
}

inline double rule_payoff(const StoppingProblem& pb, const std::vector<TreeNode>& nodes,
                          const std::vector<int>& decision_index, std::uint64_t rule, int id) {
    const auto& nd = nodes[static_cast<std::size_t>(id)];
    if (pb.in_k[static_cast<std::size_t>(nd.x)]) return 0.0;
    if (nd.children.empty()) return pb.h(nd.t, nd.x);
    const int d = decision_index[static_cast<std::size_t>(id)];
    if ((rule >> d) & 1U) return pb.h(nd.t, nd.x);
    double v = 0.0;
    for (const auto& [p, c] : nd.children) v += p * rule_payoff(pb, nodes, decision_index, rule, c);
    return v;
}

}  // namespace detail

/// Best expected reward from (n, x0) by recursion over the history tree.
inline double history_tree_value(const StoppingProblem& pb, int n, int x0) {
    std::vector<int> path{x0};
    return detail::tree_value(pb, path, n);
}

/// Literal maximization over every adapted stopping rule (a stop/continue bit
/// at each non-terminal node). Returns a negative value when the tree has more
/// than `max_decisions` decision nodes.
inline double enumerate_rules_value(const StoppingProblem& pb, int n, int x0, int max_decisions = 20) {
    std::vector<detail::TreeNode> nodes;
    detail::build_tree(pb, nodes, n, x0);
    std::vector<int> decision_index(nodes.size(), -1);
    int decisions = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].children.empty() && !pb.in_k[static_cast<std::size_t>(nodes[i].x)]) {
            decision_index[i] = decisions++;
        }
    }
    if (decisions > max_decisions) return -1.0;
    double best = -1.0;
    const std::uint64_t rules = std::uint64_t{1} << decisions;
    for (std::uint64_t rule = 0; rule < rules; ++rule) {
        best = std::max(best, detail::rule_payoff(pb, nodes, decision_index, rule, 0));
    }
    return best;
}

}  // namespace oracle
