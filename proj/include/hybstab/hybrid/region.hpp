#pragma once

#include "hybstab/core/types.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hybstab {

/// Target/safe set K. Membership is total and deterministic on the state space.
class Region {
public:
    enum class Kind { everything, nothing, finite_set, ball, predicate_table };

    static Region everything();
    static Region nothing();
    /// Set of discrete sites (finite labels or lattice coordinates). For joint
    /// states the site is the mode, so finite sets are not meaningful there.
    static Region finite_set(std::set<std::int64_t> sites);
    /// Closed Euclidean ball on the continuous coordinates; the mode of a joint
    /// state is ignored, so on joint spaces this is (all modes) x ball.
    static Region ball(double radius, Vec center = {});
    /// inside[i] is membership of finite state i.
    static Region predicate_table(std::vector<bool> inside);

    [[nodiscard]] bool contains(const State& x) const;

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] const Vec& center() const { return center_; }

    /// Explicit members for finite kinds (sites as states); nullopt otherwise.
    [[nodiscard]] std::optional<std::vector<State>> enumerate() const;
    [[nodiscard]] bool empty_set() const;
    [[nodiscard]] std::string describe() const;

private:
    Kind kind_ = Kind::nothing;
    std::set<std::int64_t> sites_;
    std::vector<bool> table_;
    double radius_ = 0.0;
    Vec center_;
};

}  // namespace hybstab
