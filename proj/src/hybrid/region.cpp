#include "hybstab/hybrid/region.hpp"

#include <cmath>
#include <sstream>

namespace hybstab {

Region Region::everything() {
    Region r;
    r.kind_ = Kind::everything;
    return r;
}

Region Region::nothing() {
    Region r;
    r.kind_ = Kind::nothing;
    return r;
}

Region Region::finite_set(std::set<std::int64_t> sites) {
    Region r;
    r.kind_ = Kind::finite_set;
    r.sites_ = std::move(sites);
    return r;
}

Region Region::ball(double radius, Vec center) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw ValidationError("radius", "must be finite and >= 0");
    Region r;
    r.kind_ = Kind::ball;
    r.radius_ = radius;
    r.center_ = std::move(center);
    return r;
}

Region Region::predicate_table(std::vector<bool> inside) {
    Region r;
    r.kind_ = Kind::predicate_table;
    r.table_ = std::move(inside);
    return r;
}

bool Region::contains(const State& x) const {
    switch (kind_) {
        case Kind::everything: return true;
        case Kind::nothing: return false;
        case Kind::finite_set: return sites_.count(x.site) > 0;
        case Kind::predicate_table:
            if (x.site < 0 || x.site >= static_cast<std::int64_t>(table_.size())) {
                throw DomainError("predicate table has no entry for state " + std::to_string(x.site));
            }
            return table_[static_cast<std::size_t>(x.site)];
        case Kind::ball: {
            double s = 0.0;
            for (std::size_t k = 0; k < x.x.size(); ++k) {
                const double c = center_.empty() ? 0.0 : center_.at(k);
                s += (x.x[k] - c) * (x.x[k] - c);
            }
            return std::sqrt(s) <= radius_;
        }
    }
    return false;
}

std::optional<std::vector<State>> Region::enumerate() const {
    std::vector<State> out;
    switch (kind_) {
        case Kind::nothing: return out;
        case Kind::finite_set:
            for (auto s : sites_) out.push_back(site_state(s));
            return out;
        case Kind::predicate_table:
            for (std::size_t i = 0; i < table_.size(); ++i) {
                if (table_[i]) out.push_back(site_state(static_cast<std::int64_t>(i)));
            }
            return out;
        default: return std::nullopt;
    }
}

bool Region::empty_set() const {
    if (kind_ == Kind::nothing) return true;
    if (auto members = enumerate()) return members->empty();
    return false;
}

std::string Region::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::everything: return "everything";
        case Kind::nothing: return "empty";
        case Kind::finite_set: {
            os << "{";
            bool first = true;
            for (auto s : sites_) {
                os << (first ? "" : ",") << s;
                first = false;
            }
            os << "}";
            return os.str();
        }
        case Kind::predicate_table: {
            os << "table[";
            for (std::size_t i = 0; i < table_.size(); ++i) os << (table_[i] ? '1' : '0');
            os << "]";
            return os.str();
        }
        case Kind::ball: os << "ball(r=" << radius_ << ")"; return os.str();
    }
    return "?";
}

}  // namespace hybstab
