#include "hybstab/chain/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybstab {

std::string Kernel::label(const State& x) const { return std::to_string(x.site); }

void Kernel::check_time(Time t) const {
    if (t < 0) throw HorizonError("negative time index " + std::to_string(t));
    if (auto h = horizon(); h && t >= *h) {
        throw HorizonError("time index " + std::to_string(t) + " past declared horizon " + std::to_string(*h));
    }
}

void validate_stochastic(const Matrix& m, const std::string& field) {
    if (m.rows == 0 || m.rows != m.cols) {
        throw ValidationError(field, "transition matrix must be square and nonempty");
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double p = m(i, j);
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw ValidationError(field + ".row[" + std::to_string(i) + "]",
                                      "entry " + std::to_string(j) + " is negative or non-finite");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(15);
            os << "row sums to " << sum << " (must be 1 within 1e-12)";
            throw ValidationError(field + ".row[" + std::to_string(i) + "]", os.str());
        }
    }
}

std::size_t draw_index(const std::vector<double>& probs, double u) {
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        last_positive = j;
        cumulative += probs[j];
        if (u < cumulative) return j;
    }
    // u landed in the rounding gap above the final partial sum
    return last_positive;
}

// -----------------------------------------------------------------------------
// FiniteKernel
// -----------------------------------------------------------------------------

namespace {
void check_labels(const std::vector<std::string>& labels, std::size_t n) {
    if (labels.size() != n) {
        throw ValidationError("states", "expected " + std::to_string(n) + " state labels, got " +
                                            std::to_string(labels.size()));
    }
}
}  // namespace

FiniteKernel::FiniteKernel(std::vector<std::string> labels, Matrix matrix)
    : labels_(std::move(labels)), extent_(Extent::single) {
    validate_stochastic(matrix);
    check_labels(labels_, matrix.rows);
    family_.push_back(std::move(matrix));
}

FiniteKernel::FiniteKernel(std::vector<std::string> labels, std::vector<Matrix> family, Extent extent)
    : labels_(std::move(labels)), family_(std::move(family)), extent_(extent) {
    if (family_.empty()) throw ValidationError("matrices", "matrix family is empty");
    if (extent_ == Extent::single && family_.size() != 1) {
        throw ValidationError("matrices", "single-matrix kernel given a family");
    }
    for (std::size_t t = 0; t < family_.size(); ++t) {
        validate_stochastic(family_[t], "matrices[" + std::to_string(t) + "]");
        check_labels(labels_, family_[t].rows);
    }
}

FiniteKernel::FiniteKernel(std::vector<std::string> labels, Rule rule, std::optional<Time> horizon)
    : labels_(std::move(labels)), extent_(Extent::explicit_), rule_(std::move(rule)), rule_horizon_(horizon) {
    if (!rule_) throw ValidationError("rule", "empty closed-form rule");
}

std::optional<Time> FiniteKernel::horizon() const {
    if (rule_) return rule_horizon_;
    if (extent_ == Extent::explicit_) return static_cast<Time>(family_.size());
    return std::nullopt;
}

void FiniteKernel::check_state(const State& x) const {
    if (x.site < 0 || x.site >= static_cast<std::int64_t>(labels_.size())) {
        throw DomainError("state index " + std::to_string(x.site) + " not in finite space of size " +
                          std::to_string(labels_.size()));
    }
}

Matrix FiniteKernel::matrix_at(Time t) const {
    check_time(t);
    if (rule_) {
        Matrix m = rule_(t);
        validate_stochastic(m, "rule(t=" + std::to_string(t) + ")");
        check_labels(labels_, m.rows);
        return m;
    }
    switch (extent_) {
        case Extent::single: return family_.front();
        case Extent::explicit_: return family_[static_cast<std::size_t>(t)];
        case Extent::cyclic: return family_[static_cast<std::size_t>(t) % family_.size()];
    }
    return family_.front();
}

State FiniteKernel::sample(Time t, const State& x, Rng& rng) const {
    check_state(x);
    check_time(t);
    const std::size_t i = static_cast<std::size_t>(x.site);
    const double u = rng.uniform();
    if (!rule_) {
        const Matrix& m = extent_ == Extent::single     ? family_.front()
                          : extent_ == Extent::cyclic   ? family_[static_cast<std::size_t>(t) % family_.size()]
                                                        : family_[static_cast<std::size_t>(t)];
        return site_state(static_cast<std::int64_t>(draw_index(m.row(i), u)));
    }
    const Matrix m = matrix_at(t);
    return site_state(static_cast<std::int64_t>(draw_index(m.row(i), u)));
}

std::optional<std::vector<Transition>> FiniteKernel::row(Time t, const State& x) const {
    check_state(x);
    const Matrix m = matrix_at(t);
    std::vector<Transition> out;
    const std::size_t i = static_cast<std::size_t>(x.site);
    for (std::size_t j = 0; j < m.cols; ++j) {
        if (m(i, j) > 0.0) out.push_back({site_state(static_cast<std::int64_t>(j)), m(i, j)});
    }
    return out;
}

std::string FiniteKernel::label(const State& x) const {
    check_state(x);
    return labels_[static_cast<std::size_t>(x.site)];
}

std::int64_t FiniteKernel::index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw DomainError("unknown state label '" + label + "'");
    return it - labels_.begin();
}

// -----------------------------------------------------------------------------
// BiasedWalkKernel
// -----------------------------------------------------------------------------

BiasedWalkKernel::BiasedWalkKernel(std::vector<double> up_schedule) : schedule_(std::move(up_schedule)) {
    if (schedule_.empty()) throw ValidationError("p_up", "empty up-probability schedule");
    for (std::size_t k = 0; k < schedule_.size(); ++k) {
        if (!(schedule_[k] >= 0.0 && schedule_[k] <= 1.0)) {
            throw ValidationError("p_up[" + std::to_string(k) + "]", "probability outside [0, 1]");
        }
    }
}

double BiasedWalkKernel::p_up(Time t) const { return schedule_[static_cast<std::size_t>(t) % schedule_.size()]; }

void BiasedWalkKernel::check_state(const State& x) const {
    if (x.site < 0) throw DomainError("biased walk lives on the nonnegative integers, got " + std::to_string(x.site));
}

State BiasedWalkKernel::sample(Time t, const State& x, Rng& rng) const {
    check_state(x);
    check_time(t);
    const double u = rng.uniform();
    if (u < p_up(t)) return site_state(x.site + 1);
    return site_state(std::max<std::int64_t>(x.site - 1, 0));
}

std::optional<std::vector<Transition>> BiasedWalkKernel::row(Time t, const State& x) const {
    check_state(x);
    check_time(t);
    const double p = p_up(t);
    if (x.site == 0) return std::vector<Transition>{{site_state(1), p}, {site_state(0), 1.0 - p}};
    return std::vector<Transition>{{site_state(x.site + 1), p}, {site_state(x.site - 1), 1.0 - p}};
}

// -----------------------------------------------------------------------------
// LinearGaussianKernel
// -----------------------------------------------------------------------------

LinearGaussianKernel::LinearGaussianKernel(Matrix a, double noise_std) : a_(std::move(a)), noise_std_(noise_std) {
    if (a_.rows == 0 || a_.rows != a_.cols) throw ValidationError("A", "linear map must be square");
    if (!(noise_std_ >= 0.0)) throw ValidationError("noise_std", "must be nonnegative");
}

void LinearGaussianKernel::check_state(const State& x) const {
    if (x.x.size() != a_.rows) throw DomainError("state dimension " + std::to_string(x.x.size()) + " != " +
                                                 std::to_string(a_.rows));
}

State LinearGaussianKernel::sample(Time t, const State& x, Rng& rng) const {
    (void)t;
    check_state(x);
    Vec next = a_.apply(x.x);
    for (double& c : next) c += noise_std_ * rng.normal();
    return real_state(std::move(next));
}

// -----------------------------------------------------------------------------
// FunctionKernel
// -----------------------------------------------------------------------------

FunctionKernel::FunctionKernel(SpaceKind space, std::size_t dim, bool homogeneous, Sampler sampler, RowFn row)
    : space_(space), dim_(dim), homogeneous_(homogeneous), sampler_(std::move(sampler)), row_(std::move(row)) {
    if (!sampler_) throw ValidationError("sampler", "empty sampler");
}

void FunctionKernel::check_state(const State& x) const {
    if ((space_ == SpaceKind::real || space_ == SpaceKind::joint) && x.x.size() != dim_) {
        throw DomainError("state dimension mismatch");
    }
}

std::optional<std::vector<Transition>> FunctionKernel::row(Time t, const State& x) const {
    if (!row_) return std::nullopt;
    return row_(t, x);
}

}  // namespace hybstab
