#include "hybstab/switched/switched.hpp"

#include "hybstab/certificate/certificate.hpp"
#include "hybstab/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hybstab {

namespace {

constexpr double kRelTol = 1e-12;

double relative_slack(double lhs, double rhs) {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale == 0.0) return 0.0;
    return (rhs - lhs) / scale;
}

bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double c) { return std::isfinite(c); });
}

bool all_zero(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; });
}

Vec sub(const Vec& a, const Vec& b) {
    Vec out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - (k < b.size() ? b[k] : 0.0);
    return out;
}

}  // namespace

// -----------------------------------------------------------------------------
// SwitchingChain
// -----------------------------------------------------------------------------

SwitchingChain::SwitchingChain(Matrix P, Vec initial) : P_(std::move(P)), initial_(std::move(initial)) {
    validate_stochastic(P_, "switching.P");
    if (initial_.size() != P_.rows) {
        throw ValidationError("switching.initial", "needs " + std::to_string(P_.rows) + " entries");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < initial_.size(); ++i) {
        if (!(initial_[i] >= 0.0)) throw ValidationError("switching.initial[" + std::to_string(i) + "]", "must be >= 0");
        s += initial_[i];
    }
    if (std::abs(s - 1.0) > 1e-12) throw ValidationError("switching.initial", "must sum to 1, sums to " + std::to_string(s));

    const std::size_t n = P_.rows;
    for (std::size_t i = 0; i < n; ++i) {
        p_hat_ = std::max(p_hat_, P_(i, i));
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) p_tilde_ = std::max(p_tilde_, P_(i, j));
        }
    }
    irreducible_ = true;
    for (std::size_t start = 0; start < n && irreducible_; ++start) {
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> stack{start};
        seen[start] = true;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                if (P_(i, j) > 0.0 && !seen[j]) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            }
        }
        irreducible_ = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    }
}

SwitchingChain::SwitchingChain(Matrix P)
    : SwitchingChain(P, Vec(P.rows, P.rows ? 1.0 / static_cast<double>(P.rows) : 0.0)) {}

void SwitchingChain::require_irreducible() const {
    if (!irreducible_) throw ValidationError("switching.P", "chain is not irreducible");
}

int SwitchingChain::draw_initial(Rng& rng) const { return static_cast<int>(draw_index(initial_, rng.uniform())); }

int SwitchingChain::draw_next(int mode, Rng& rng) const {
    return static_cast<int>(draw_index(P_.row(static_cast<std::size_t>(mode)), rng.uniform()));
}

// -----------------------------------------------------------------------------
// Maps
// -----------------------------------------------------------------------------

double operator_norm(const Matrix& A) {
    const std::size_t n = A.cols;
    if (n == 0 || A.rows == 0) return 0.0;
    Vec v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = 1.0 + 0.1 * static_cast<double>(k);
    double lambda = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const double nv = norm(v);
        if (nv == 0.0) return 0.0;
        for (auto& c : v) c /= nv;
        const Vec av = A.apply(v);
        Vec w(n, 0.0);
        for (std::size_t i = 0; i < A.rows; ++i) {
            for (std::size_t j = 0; j < n; ++j) w[j] += A(i, j) * av[i];
        }
        const double next = dot(v, w);
        v = w;
        if (it > 10 && std::abs(next - lambda) <= 1e-15 * std::max(1.0, next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

ModeMap ModeMap::linear(Matrix A, std::optional<Matrix> input) {
    if (A.rows != A.cols || A.rows == 0) throw ValidationError("map.A", "must be a nonempty square matrix");
    if (input && input->rows != A.rows) throw ValidationError("map.B", "row count must match A");
    ModeMap m;
    m.family_ = Family::linear;
    m.dim_ = A.rows;
    m.equilibrium_ = Vec(A.rows, 0.0);
    const double L = operator_norm(A);
    m.lipschitz_ = [L](double) { return L; };
    m.f_ = [A, input](const Vec& x, const Vec& w) {
        Vec y = A.apply(x);
        if (!w.empty()) {
            const Vec bw = input ? input->apply(w) : w;
            for (std::size_t k = 0; k < y.size(); ++k) y[k] += bw.at(k);
        }
        return y;
    };
    std::ostringstream os;
    os << "linear " << A.rows << "x" << A.cols << " (norm " << L << ")";
    m.description_ = os.str();
    m.A_ = std::move(A);
    if (input) m.description_ += " with input matrix";
    m.has_input_ = input.has_value();
    return m;
}

ModeMap ModeMap::affine(Matrix A, Vec b, Vec equilibrium) {
    if (A.rows != A.cols || A.rows == 0) throw ValidationError("map.A", "must be a nonempty square matrix");
    if (b.size() != A.rows) throw ValidationError("map.b", "length must match A");
    if (equilibrium.size() != A.rows) throw ValidationError("map.equilibrium", "length must match A");
    ModeMap m;
    m.family_ = Family::affine;
    m.dim_ = A.rows;
    m.equilibrium_ = std::move(equilibrium);
    const double L = operator_norm(A);
    m.lipschitz_ = [L](double) { return L; };
    m.f_ = [A, b](const Vec& x, const Vec& w) {
        Vec y = A.apply(x);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += b[k] + (w.empty() ? 0.0 : w.at(k));
        return y;
    };
    m.description_ = "affine";
    return m;
}

ModeMap ModeMap::tanh(double a, std::size_t dim) {
    if (dim == 0) throw ValidationError("map.dim", "must be >= 1");
    ModeMap m;
    m.family_ = Family::tanh;
    m.dim_ = dim;
    m.equilibrium_ = Vec(dim, 0.0);
    m.lipschitz_ = [a](double) { return std::abs(a); };
    m.f_ = [a](const Vec& x, const Vec& w) {
        Vec y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = a * std::tanh(x[k]) + (w.empty() ? 0.0 : w.at(k));
        return y;
    };
    std::ostringstream os;
    os << a << " tanh(x)";
    m.description_ = os.str();
    return m;
}

ModeMap ModeMap::custom(Fn f, std::size_t dim, std::function<double(double)> lipschitz, Vec equilibrium) {
    if (!f || !lipschitz) throw ValidationError("map", "custom maps need an evaluator and a Lipschitz bound");
    ModeMap m;
    m.family_ = Family::custom;
    m.dim_ = dim;
    m.f_ = std::move(f);
    m.lipschitz_ = std::move(lipschitz);
    m.equilibrium_ = equilibrium.empty() ? Vec(dim, 0.0) : std::move(equilibrium);
    m.description_ = "custom";
    return m;
}

void SwitchedSystem::validate() const {
    if (maps.empty()) throw ValidationError("system.maps", "at least one map is required");
    if (maps.size() != chain.modes()) {
        throw ValidationError("system.maps", std::to_string(maps.size()) + " maps for a " +
                                                 std::to_string(chain.modes()) + "-mode chain");
    }
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const std::string field = "system.maps[" + std::to_string(i) + "]";
        if (maps[i].dim() != dim()) throw ValidationError(field, "dimension mismatch");
        const Vec& xs = maps[i].equilibrium();
        const double gap = norm(sub(maps[i](xs), xs));
        if (!(gap <= 1e-10)) {
            throw ValidationError(field, "declared equilibrium is not a fixed point (gap " + std::to_string(gap) + ")");
        }
    }
}

bool SwitchedSystem::positively_homogeneous() const {
    return std::all_of(maps.begin(), maps.end(), [](const ModeMap& m) { return m.family() == ModeMap::Family::linear; });
}

KernelPtr joint_kernel(const SwitchedSystem& sys) {
    sys.validate();
    auto shared = std::make_shared<SwitchedSystem>(sys);
    auto sampler = [shared](Time, const State& s, Rng& rng) {
        const auto i = static_cast<std::size_t>(s.site);
        Vec y = shared->maps.at(i)(s.x);
        const int j = shared->chain.draw_next(static_cast<int>(i), rng);
        return joint_state(j, std::move(y));
    };
    auto row = [shared](Time, const State& s) -> std::optional<std::vector<Transition>> {
        const auto i = static_cast<std::size_t>(s.site);
        const Vec y = shared->maps.at(i)(s.x);
        std::vector<Transition> out;
        for (std::size_t j = 0; j < shared->chain.modes(); ++j) {
            const double p = shared->chain.P()(i, j);
            if (p > 0.0) out.push_back({joint_state(static_cast<std::int64_t>(j), y), p});
        }
        return out;
    };
    return std::make_shared<FunctionKernel>(SpaceKind::joint, sys.dim(), true, sampler, row);
}

// -----------------------------------------------------------------------------
// Lyapunov families
// -----------------------------------------------------------------------------

LyapunovFamily LyapunovFamily::weighted_norms(Vec weights, double mu, ClassK alpha1, ClassK alpha2) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0)) throw ValidationError("lyapunov.weights[" + std::to_string(i) + "]", "must be > 0");
    }
    if (!(mu >= 1.0)) throw ValidationError("lyapunov.mu", "must be >= 1");
    LyapunovFamily f;
    f.kind = Kind::weighted_norm;
    f.weights = std::move(weights);
    f.mu = mu;
    f.alpha1 = alpha1;
    f.alpha2 = alpha2;
    return f;
}

std::size_t LyapunovFamily::modes() const { return kind == Kind::weighted_norm ? weights.size() : custom_V.size(); }

Vec LyapunovFamily::equilibrium(std::size_t i, std::size_t dim) const {
    if (equilibria.empty()) return Vec(dim, 0.0);
    return equilibria.at(i);
}

double LyapunovFamily::V(std::size_t i, const Vec& x) const {
    if (kind == Kind::weighted_norm) {
        const double w = weights.at(i);
        return equilibria.empty() ? w * norm(x) : w * norm(sub(x, equilibria.at(i)));
    }
    return custom_V.at(i)(x);
}

double LyapunovFamily::V_trunc(std::size_t i, const Vec& x) const { return norm(x) > r ? V(i, x) : 0.0; }

long double LyapunovFamily::log_V(std::size_t i, const Vec& x, long double log_norm) const {
    if (kind == Kind::weighted_norm && equilibria.empty()) {
        return std::log(static_cast<long double>(weights.at(i))) + log_norm;
    }
    return std::log(static_cast<long double>(V(i, x)));
}

// -----------------------------------------------------------------------------
// Conditions
// -----------------------------------------------------------------------------

ConditionResult check_S1(double lambda0, double mu, const SwitchingChain& chain) {
    if (!(lambda0 > 0.0 && lambda0 < 1.0)) throw ValidationError("lambda0", "must lie in (0, 1)");
    if (!(mu >= 1.0)) throw ValidationError("mu", "must be >= 1");
    ConditionResult r;
    r.p_hat = chain.p_hat();
    r.p_tilde = chain.p_tilde();
    r.value = lambda0 * (r.p_hat + mu * r.p_tilde);
    r.ok = r.value < 1.0;
    r.alpha_star = -std::log(r.value) / 2.0;
    return r;
}

ConditionResult check_S2(const Matrix& Lambda, double mu, const SwitchingChain& chain) {
    const std::size_t n = chain.modes();
    if (Lambda.rows != n || Lambda.cols != n) {
        throw ValidationError("Lambda", "must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    for (double v : Lambda.data) {
        if (!(v >= 0.0)) throw ValidationError("Lambda", "entries must be >= 0");
    }
    if (!(mu >= 1.0)) throw ValidationError("mu", "must be >= 1");
    ConditionResult r;
    r.p_hat = chain.p_hat();
    r.p_tilde = chain.p_tilde();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += chain.P()(i, j) * Lambda(j, i);
        worst = std::max(worst, s);
    }
    r.value = mu * worst;
    r.ok = r.value < 1.0;
    r.alpha_star = -std::log(r.value) / 2.0;
    return r;
}

double switching_count_bound(double p_hat, double p_tilde, Time s, Time t, std::int64_t k) {
    if (!(s < t)) throw ValidationError("window", "needs s < t");
    const Time n = t - s;
    if (k < 0 || k > n) return 0.0;
    double binom = 1.0;
    const std::int64_t kk = std::min<std::int64_t>(k, n - k);
    for (std::int64_t m = 1; m <= kk; ++m) {
        binom *= static_cast<double>(n - kk + m);
        binom /= static_cast<double>(m);
    }
    const double v = binom * std::pow(p_hat, static_cast<double>(n - k)) * std::pow(p_tilde, static_cast<double>(k));
    return std::min(v, 1.0);
}

double switching_count_bound(const SwitchingChain& chain, Time s, Time t, std::int64_t k) {
    return switching_count_bound(chain.p_hat(), chain.p_tilde(), s, t, k);
}

// -----------------------------------------------------------------------------
// Simulation
// -----------------------------------------------------------------------------

SwitchedBatch simulate_switched(const SwitchedSystem& sys, const Vec& x0, Time T, std::size_t n, std::uint64_t seed,
                                const DisturbanceFn* disturbance) {
    sys.validate();
    if (T < 0) throw ValidationError("horizon", "must be >= 0");
    if (n == 0) throw ValidationError("paths", "must be >= 1");
    if (x0.size() != sys.dim()) throw ValidationError("x0", "dimension must be " + std::to_string(sys.dim()));

    std::vector<Vec> w;
    if (disturbance) {
        for (Time t = 0; t <= T; ++t) w.push_back((*disturbance)(t));
    }
    const bool shadow_ok = sys.positively_homogeneous();
    const auto steps = static_cast<std::size_t>(T);

    SwitchedBatch sb;
    sb.batch.space = SpaceKind::joint;
    sb.batch.seed = seed;
    sb.batch.paths.resize(n);
    sb.switches.resize(n);
    sb.log_norm.resize(n);
    sb.overflow_time.assign(n, -1);

    parallel_for(n, [&](std::size_t j) {
        Trajectory& path = sb.batch.paths[j];
        path.seed = child_seed(seed, j);
        Rng rng(path.seed);
        auto& N = sb.switches[j];
        auto& L = sb.log_norm[j];
        path.states.reserve(steps + 1);
        path.mode.reserve(steps + 1);
        N.reserve(steps + 1);
        L.reserve(steps + 1);

        int mode = sys.chain.draw_initial(rng);
        Vec x = x0;
        // shadow direction and log scale, valid while every applied step is linear and undisturbed
        const double n0 = norm(x0);
        Vec u = x0;
        long double scale = std::log(static_cast<long double>(n0));
        if (n0 > 0.0) {
            for (auto& c : u) c /= n0;
        }
        bool shadow = shadow_ok && n0 > 0.0;
        int switches = 0;

        auto log_norm_of = [&](const Vec& v) -> long double {
            const double nv = norm(v);
            if (std::isfinite(nv) && nv > 1e-280) return std::log(static_cast<long double>(nv));
            if (shadow) return scale;
            return std::log(static_cast<long double>(nv));
        };

        for (std::size_t t = 0;; ++t) {
            path.states.push_back(joint_state(mode, x));
            path.mode.push_back(mode);
            if (!w.empty()) path.disturbance.push_back(w[t]);
            N.push_back(switches);
            L.push_back(log_norm_of(x));
            if (sb.overflow_time[j] < 0 && !all_finite(x)) sb.overflow_time[j] = static_cast<Time>(t);
            if (t == steps) break;

            const ModeMap& f = sys.maps[static_cast<std::size_t>(mode)];
            if (w.empty()) {
                x = f(x);
            } else {
                x = f(x, w[t]);
                if (!all_zero(w[t])) shadow = false;
            }
            if (shadow) {
                u = f(u);
                const double s = norm(u);
                if (s > 0.0 && std::isfinite(s)) {
                    scale += std::log(static_cast<long double>(s));
                    for (auto& c : u) c /= s;
                } else {
                    shadow = false;
                }
            }
            const int next = sys.chain.draw_next(mode, rng);
            if (next != mode) ++switches;
            mode = next;
        }
    });
    for (Time t : sb.overflow_time) {
        if (t >= 0 && (sb.first_overflow < 0 || t < sb.first_overflow)) sb.first_overflow = t;
    }
    return sb;
}

std::vector<std::vector<int>> simulate_modes(const SwitchingChain& chain, Time T, std::size_t n, std::uint64_t seed) {
    if (T < 0) throw ValidationError("horizon", "must be >= 0");
    std::vector<std::vector<int>> out(n);
    parallel_for(n, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        auto& m = out[j];
        m.reserve(static_cast<std::size_t>(T) + 1);
        m.push_back(chain.draw_initial(rng));
        for (Time t = 0; t < T; ++t) m.push_back(chain.draw_next(m.back(), rng));
    });
    return out;
}

std::vector<int> count_switches(const std::vector<int>& modes) {
    std::vector<int> out(modes.size(), 0);
    for (std::size_t t = 1; t < modes.size(); ++t) out[t] = out[t - 1] + (modes[t] != modes[t - 1] ? 1 : 0);
    return out;
}

std::vector<StatPoint> empirical_switch_law(const std::vector<std::vector<int>>& modes, Time s, Time t) {
    if (!(s < t) || s < 0) throw ValidationError("window", "needs 0 <= s < t");
    const auto width = static_cast<std::size_t>(t - s);
    std::vector<std::size_t> counts(width + 1, 0);
    for (const auto& m : modes) {
        if (m.size() <= static_cast<std::size_t>(t)) throw ValidationError("window", "mode path shorter than t");
        std::size_t k = 0;
        for (auto u = static_cast<std::size_t>(s) + 1; u <= static_cast<std::size_t>(t); ++u) k += m[u] != m[u - 1];
        ++counts[k];
    }
    std::vector<StatPoint> law(width + 1);
    const auto n = static_cast<double>(modes.size());
    for (std::size_t k = 0; k <= width; ++k) {
        const double p = static_cast<double>(counts[k]) / n;
        law[k] = StatPoint{p, n > 1 ? std::sqrt(p * (1.0 - p) / (n - 1.0)) : 0.0, modes.size()};
    }
    return law;
}

// -----------------------------------------------------------------------------
// Grid verification
// -----------------------------------------------------------------------------

std::vector<Vec> LogRadialGrid::points(std::size_t dim) const {
    if (!(r_min > 0.0) || !(r_max >= r_min) || radii < 1 || directions < 1) {
        throw ValidationError("grid", "needs 0 < r_min <= r_max and positive counts");
    }
    std::vector<Vec> dirs;
    if (dim == 1) {
        dirs = {{1.0}, {-1.0}};
    } else if (dim == 2) {
        for (int k = 0; k < directions; ++k) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(directions);
            dirs.push_back({std::cos(a), std::sin(a)});
        }
    } else {
        for (std::size_t k = 0; k < dim; ++k) {
            for (double sgn : {1.0, -1.0}) {
                Vec e(dim, 0.0);
                e[k] = sgn;
                dirs.push_back(e);
            }
        }
        if (dim <= 6) {
            const double c = 1.0 / std::sqrt(static_cast<double>(dim));
            for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {
                Vec e(dim);
                for (std::size_t k = 0; k < dim; ++k) e[k] = (mask >> k) & 1U ? -c : c;
                dirs.push_back(e);
            }
        }
    }
    std::vector<Vec> out;
    for (int i = 0; i < radii; ++i) {
        const double r = radii == 1 ? r_min
                                    : r_min * std::pow(r_max / r_min, static_cast<double>(i) / static_cast<double>(radii - 1));
        for (const auto& d : dirs) {
            Vec p(d);
            for (auto& c : p) c *= r;
            out.push_back(std::move(p));
        }
    }
    return out;
}

bool LyapunovReport::ok() const {
    return std::all_of(items.begin(), items.end(), [](const LyapunovItem& it) { return !it.applicable || it.ok; });
}

const LyapunovItem& LyapunovReport::item(const std::string& name) const {
    for (const auto& it : items) {
        if (it.name == name) return it;
    }
    throw DomainError("no Lyapunov item named " + name);
}

LyapunovReport verify_lyapunov_family(const LyapunovFamily& lyap, const SwitchedSystem& sys, const LogRadialGrid& grid) {
    const std::size_t M = sys.maps.size();
    if (lyap.modes() != M) throw ValidationError("lyapunov", "family has " + std::to_string(lyap.modes()) + " functions for " +
                                                                 std::to_string(M) + " modes");
    const std::size_t d = sys.dim();
    std::vector<Vec> pts = grid.points(d);

    LyapunovReport rep;
    auto named = [](const char* name) {
        LyapunovItem it;
        it.name = name;
        return it;
    };
    LyapunovItem v1 = named("V1"), v2 = named("V2"), v3 = named("V3"), v3p = named("V3'");
    v3.applicable = lyap.lambda0.has_value();
    v3p.applicable = lyap.Lambda.has_value();
    if (v3p.applicable && (lyap.Lambda->rows != M || lyap.Lambda->cols != M)) {
        throw ValidationError("lyapunov.Lambda", "dimension mismatch");
    }

    auto record = [](LyapunovItem& it, double lhs, double rhs, const Vec& x, std::size_t i, std::size_t j) {
        ++it.checked;
        const double s = relative_slack(lhs, rhs);
        if (s < it.worst) {
            it.worst = s;
            it.at = x;
            it.mode_i = i;
            it.mode_j = j;
        }
    };

    for (std::size_t i = 0; i < M; ++i) {
        const Vec xs = lyap.equilibrium(i, d);
        record(v1, lyap.V(i, xs), 0.0, xs, i, i);
        for (const auto& p : pts) {
            Vec x = xs;
            for (std::size_t k = 0; k < d; ++k) x[k] += p[k];
            const double e = norm(sub(x, xs));
            const double v = lyap.V(i, x);
            record(v1, lyap.alpha1(e), v, x, i, i);
            record(v1, v, lyap.alpha2(e), x, i, i);
        }
    }
    for (const auto& x : pts) {
        if (norm(x) <= lyap.r) continue;
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < M; ++j) record(v2, lyap.V(i, x), lyap.mu * lyap.V(j, x), x, i, j);
        }
    }
    for (const auto& x : pts) {
        for (std::size_t i = 0; i < M; ++i) {
            if (v3.applicable) record(v3, lyap.V(i, sys.maps[i](x)), *lyap.lambda0 * lyap.V(i, x), x, i, i);
            if (v3p.applicable) {
                for (std::size_t j = 0; j < M; ++j) {
                    record(v3p, lyap.V(i, sys.maps[j](x)), (*lyap.Lambda)(i, j) * lyap.V(i, x), x, i, j);
                }
            }
        }
    }
    for (auto* it : {&v1, &v2, &v3, &v3p}) {
        it->ok = !it->applicable || it->worst >= -kRelTol;
        rep.items.push_back(*it);
    }
    return rep;
}

PathwiseReport pathwise_inequality_check(const SwitchedBatch& sb, const LyapunovFamily& lyap, const SwitchedSystem& sys,
                                         const LogRadialGrid& grid) {
    PathwiseReport rep;
    if (!lyap.lambda0) {
        rep.ok = rep.precondition_ok = false;
        rep.precondition = "family has no scalar lambda0";
        return rep;
    }
    const LyapunovReport pre = verify_lyapunov_family(lyap, sys, grid);
    for (const char* name : {"V1", "V2", "V3"}) {
        if (!pre.item(name).ok) {
            rep.precondition_ok = false;
            rep.precondition += std::string(rep.precondition.empty() ? "" : ", ") + name + " fails on the grid";
        }
    }
    if (!rep.precondition_ok) {
        rep.ok = false;
        return rep;
    }
    rep.precondition = "V1, V2, V3 hold on the grid";

    const long double log_mu = std::log(static_cast<long double>(lyap.mu));
    const long double log_lambda = std::log(static_cast<long double>(*lyap.lambda0));
    const long double tol = std::log1p(1e-9L);
    const std::size_t n = sb.batch.size();
    std::vector<std::vector<PathwiseViolation>> per_path(n);
    std::vector<long double> worst(n, -std::numeric_limits<long double>::infinity());
    std::vector<std::size_t> checked(n, 0);

    parallel_for(n, [&](std::size_t j) {
        const auto& path = sb.batch.paths[j];
        const auto& L = sb.log_norm[j];
        const auto& N = sb.switches[j];
        const Vec& x0 = path.states.front().x;
        if (!(norm(x0) > lyap.r)) return;
        const auto m0 = static_cast<std::size_t>(path.mode.front());
        const long double start = lyap.log_V(m0, x0, L.front());
        for (std::size_t t = 0; t < path.states.size(); ++t) {
            const Vec& x = path.states[t].x;
            if (std::exp(L[t]) <= static_cast<long double>(lyap.r) && lyap.r > 0.0) break;  // tau_r reached
            if (lyap.r == 0.0 && L[t] == -std::numeric_limits<long double>::infinity()) break;
            const long double lhs = lyap.log_V(static_cast<std::size_t>(path.mode[t]), x, L[t]);
            const long double rhs = static_cast<long double>(N[t]) * log_mu + static_cast<long double>(t) * log_lambda + start;
            const long double excess = lhs - rhs;
            ++checked[j];
            worst[j] = std::max(worst[j], excess);
            if (excess > tol || std::isnan(static_cast<double>(excess))) per_path[j].push_back({j, static_cast<Time>(t), excess});
        }
    });
    for (std::size_t j = 0; j < n; ++j) {
        rep.checked += checked[j];
        rep.worst_log_ratio = std::max(rep.worst_log_ratio, worst[j]);
        rep.violations.insert(rep.violations.end(), per_path[j].begin(), per_path[j].end());
    }
    rep.ok = rep.violations.empty();
    return rep;
}

DiagnosticsReport stability_diagnostics(const SwitchedBatch& sb, const LyapunovFamily& lyap, const SwitchedSystem& sys,
                                        double alpha_star, const DiagnosticsOptions& options) {
    DiagnosticsReport rep;
    const std::size_t n = sb.batch.size();
    const Time T = sb.batch.horizon();
    if (n == 0 || T < 0) return rep;
    const auto steps = static_cast<std::size_t>(T);

    // (a) discounted Lyapunov mean
    std::vector<std::vector<double>> disc(n, std::vector<double>(steps + 1));
    parallel_for(n, [&](std::size_t j) {
        const auto& path = sb.batch.paths[j];
        for (std::size_t t = 0; t <= steps; ++t) {
            const long double lv = lyap.log_V(static_cast<std::size_t>(path.mode[t]), path.states[t].x, sb.log_norm[j][t]);
            disc[j][t] = static_cast<double>(std::exp(static_cast<long double>(alpha_star) * static_cast<long double>(t) + lv));
        }
    });
    std::vector<double> col(n), diff(n);
    rep.discounted.per_time.resize(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) {
        for (std::size_t j = 0; j < n; ++j) col[j] = disc[j][t];
        rep.discounted.per_time[t] = summarize(col);
        if (t > 0) {
            double scale = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                diff[j] = disc[j][t] - disc[j][t - 1];
                scale = std::max(scale, disc[j][t - 1]);
            }
            const StatPoint d = summarize(diff);
            if (!(d.mean <= 3.0 * d.se + kRelTol * scale)) rep.discounted_monotone = false;
        }
    }
    const double m0 = rep.discounted.per_time.front().mean;
    const double mT = rep.discounted.per_time.back().mean;
    rep.discounted_ratio = m0 > 0.0 ? mT / m0 : 0.0;
    rep.discounted_ok = rep.discounted_monotone && std::isfinite(mT) && rep.discounted_ratio <= options.decay_target;

    // (b) almost-sure convergence surrogate and pathwise envelope
    rep.max_log_final_ratio = -std::numeric_limits<long double>::infinity();
    const long double log_mu = std::log(static_cast<long double>(lyap.mu));
    const long double log_lambda = lyap.lambda0 ? std::log(static_cast<long double>(*lyap.lambda0)) : 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
        const long double r = sb.log_norm[j].back() - sb.log_norm[j].front();
        rep.max_log_final_ratio = std::max(rep.max_log_final_ratio, std::isnan(static_cast<double>(r))
                                                                          ? std::numeric_limits<long double>::infinity()
                                                                          : r);
        if (options.check_envelope && lyap.lambda0) {
            const long double env = static_cast<long double>(sb.switches[j].back()) * log_mu +
                                    static_cast<long double>(T) * log_lambda + std::log1p(1e-9L);
            if (!(r <= env)) ++rep.envelope_violations;
        }
    }
    rep.as_ok = sb.first_overflow < 0 &&
                rep.max_log_final_ratio <= static_cast<long double>(std::log(options.as_threshold));
    rep.envelope_ok = rep.envelope_violations == 0 && (lyap.lambda0.has_value() || !options.check_envelope);

    // (c) L1 bound via the certificate on the joint space
    const std::size_t M = sys.maps.size();
    const double r = lyap.r;
    DeltaOptions dopt;
    dopt.dim = sys.dim();
    for (std::size_t i = 0; i < M; ++i) dopt.modes.push_back(static_cast<std::int64_t>(i));
    auto Vjoint = [&lyap](const State& s) { return lyap.V_trunc(static_cast<std::size_t>(s.site), s.x); };
    const Region K = Region::ball(r);
    const Estimate delta = compute_delta(Vjoint, K, dopt);

    BetaOptions bopt;
    std::vector<State> cand;
    std::vector<Vec> ball_pts{Vec(sys.dim(), 0.0)};
    if (r > 0.0) {
        LogRadialGrid g{r * 1e-3, r, 10, 16};
        for (auto& p : g.points(sys.dim())) ball_pts.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < M; ++i) {
        for (const auto& p : ball_pts) cand.push_back(joint_state(static_cast<std::int64_t>(i), p));
    }
    bopt.candidates = cand;
    auto kernel = joint_kernel(sys);
    const double a = alpha_star;
    auto phi = [&lyap, a](Time t, const State& s) {
        return std::exp(a * static_cast<double>(t)) * lyap.V_trunc(static_cast<std::size_t>(s.site), s.x);
    };
    const BetaResult beta = compute_beta(*kernel, phi, K, bopt);

    const Vec& x0 = sb.batch.paths.front().states.front().x;
    double phi0 = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        if (sys.chain.initial()[i] > 0.0) phi0 = std::max(phi0, lyap.V_trunc(i, x0));
    }
    if (alpha_star > 0.0) {
        const CertificateConstants c = constants_from(compute_C_gamma(Theta::exponential(alpha_star)), delta, beta.beta);
        rep.l1_bound = theorem_bound(c, phi0) + lyap.alpha1(r);
    } else {
        rep.l1_bound = kInf;
    }
    rep.alpha1_mean.per_time.resize(steps + 1);
    rep.l1_sup_mean = 0.0;
    for (std::size_t t = 0; t <= steps; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            col[j] = lyap.alpha1(static_cast<double>(std::exp(sb.log_norm[j][t])));
        }
        const StatPoint p = summarize(col);
        rep.alpha1_mean.per_time[t] = p;
        rep.l1_sup_mean = std::max(rep.l1_sup_mean, p.mean);
        rep.l1_margin_se = std::min(rep.l1_margin_se, margin_in_se(rep.l1_bound, p.mean, p.se));
        if (!std::isfinite(p.mean) || p.mean > rep.l1_bound + 3.0 * p.se) rep.l1_ok = false;
    }
    if (!std::isfinite(rep.l1_bound)) rep.l1_ok = false;

    rep.divergent = sb.first_overflow >= 0 || rep.max_log_final_ratio > 0.0L || rep.discounted_ratio > 1.0;
    return rep;
}

double min_singular_value(const Matrix& A) {
    if (A.rows != A.cols) throw ValidationError("matrix", "must be square");
    const std::size_t n = A.cols;
    if (n == 0) return 0.0;
    // one-sided Jacobi: rotate column pairs until mutually orthogonal
    Matrix B = A;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    alpha += B(i, p) * B(i, p);
                    beta += B(i, q) * B(i, q);
                    gamma += B(i, p) * B(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double bp = B(i, p), bq = B(i, q);
                    B(i, p) = c * bp - sn * bq;
                    B(i, q) = sn * bp + c * bq;
                }
            }
        }
        if (!rotated) break;
    }
    double smallest = kInf;
    for (std::size_t j = 0; j < n; ++j) {
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) s2 += B(i, j) * B(i, j);
        smallest = std::min(smallest, std::sqrt(s2));
    }
    return smallest;
}

FixedPointEvidence fixed_point_search(const SwitchedSystem& sys, const LogRadialGrid& grid, double tol) {
    sys.validate();
    FixedPointEvidence ev;
    ev.tol = tol;
    const std::size_t d = sys.dim();
    const auto pts = grid.points(d);
    for (const auto& m : sys.maps) {
        if (m.family() == ModeMap::Family::linear && m.matrix()) {
            Matrix B = *m.matrix();
            for (std::size_t k = 0; k < d; ++k) B(k, k) -= 1.0;
            ev.min_ratio.push_back(min_singular_value(B));
            ev.at.emplace_back();
            ev.exact.push_back(true);
            ++ev.checked;
        } else {
            double best = kInf;
            Vec at;
            for (const auto& x : pts) {
                const double ratio = norm(sub(m(x), x)) / norm(x);
                ++ev.checked;
                if (ratio < best) {
                    best = ratio;
                    at = x;
                }
            }
            ev.min_ratio.push_back(best);
            ev.at.push_back(at);
            ev.exact.push_back(false);
        }
        if (!(ev.min_ratio.back() > tol)) ev.ok = false;
    }
    return ev;
}

bool FinitizationReport::ok() const {
    return std::all_of(cases.begin(), cases.end(), [](const FiniteCase& c) { return !c.applicable || c.ok; });
}

FinitizationReport finite_stability_checks(const SwitchedSystem& sys, const LyapunovFamily& lyap, double alpha_star,
                                           const FinitizationOptions& options, std::uint64_t seed) {
    sys.validate();
    if (options.horizon < 1 || options.paths == 0) throw ValidationError("finitization", "needs horizon >= 1 and paths >= 1");
    const std::size_t d = sys.dim();
    Vec u = options.direction.empty() ? Vec(d, 0.0) : options.direction;
    if (options.direction.empty()) u[0] = 1.0;
    if (u.size() != d || !(norm(u) > 0.0)) throw ValidationError("finitization.direction", "must be a nonzero vector of the state dimension");
    const double un = norm(u);
    for (auto& c : u) c /= un;
    auto scaled = [&u](double s) {
        Vec x = u;
        for (auto& c : x) c *= s;
        return x;
    };
    const Time T = options.horizon;
    const std::size_t n = options.paths;
    auto mean_alpha1 = [&lyap, T, n](const SwitchedBatch& sb, Time from, double& worst_se) {
        double sup = 0.0;
        worst_se = 0.0;
        std::vector<double> col(n);
        for (Time t = from; t <= T; ++t) {
            for (std::size_t j = 0; j < n; ++j) {
                col[j] = lyap.alpha1(static_cast<double>(std::exp(sb.log_norm[j][static_cast<std::size_t>(t)])));
            }
            const StatPoint p = summarize(col);
            if (p.mean >= sup) {
                sup = p.mean;
                worst_se = p.se;
            }
        }
        return sup;
    };

    FinitizationReport rep;
    std::optional<double> value;
    if (lyap.lambda0) {
        value = check_S1(*lyap.lambda0, lyap.mu, sys.chain).value;
    } else if (lyap.Lambda) {
        value = check_S2(*lyap.Lambda, lyap.mu, sys.chain).value;
    }
    rep.a_prime = value ? *value * std::exp(alpha_star) : std::numeric_limits<double>::quiet_NaN();

    std::uint64_t stream = 0;
    for (double eps : options.eps) {
        FiniteCase c;
        c.item = "SM1";
        c.eps = eps;
        c.delta = 0.999 * lyap.alpha2.inverse(eps);
        const auto sb = simulate_switched(sys, scaled(c.delta), T, n, child_seed(seed, stream++));
        c.value = mean_alpha1(sb, 0, c.se);
        c.ok = c.value <= eps + 3.0 * c.se;
        c.note = "delta = 0.999 alpha2^{-1}(eps)";
        rep.cases.push_back(c);
    }

    for (double r : options.radii) {
        for (double eps : options.eps) {
            FiniteCase c;
            c.item = "SM2";
            c.eps = eps;
            c.r = r;
            if (!value || !(rep.a_prime < 1.0)) {
                c.applicable = false;
                c.ok = false;
                c.note = "needs a condition value with value e^{alpha} < 1";
                rep.cases.push_back(c);
                continue;
            }
            c.T = std::max(0.0, std::log(eps / lyap.alpha2(r)) / std::log(rep.a_prime));
            if (c.T >= static_cast<double>(T)) {
                c.applicable = false;
                c.note = "waiting time beyond the horizon";
                rep.cases.push_back(c);
                continue;
            }
            c.delta = 0.999 * r;
            const auto sb = simulate_switched(sys, scaled(c.delta), T, n, child_seed(seed, stream++));
            c.value = mean_alpha1(sb, static_cast<Time>(std::floor(c.T)) + 1, c.se);
            c.ok = c.value <= eps + 3.0 * c.se;
            c.note = "sup over t > T of the mean";
            rep.cases.push_back(c);
        }
    }

    double L = 0.0;
    for (const auto& m : sys.maps) L = std::max(L, m.lipschitz(1.0));
    for (double eps : options.eps) {
        FiniteCase c;
        c.item = "AS1";
        c.eps = eps;
        const std::uint64_t s = child_seed(seed, stream++);
        const auto from_one = simulate_switched(sys, scaled(0.999), T, n, s);
        const long double log_eps = std::log(static_cast<long double>(eps));
        double t_max = 0.0;
        bool settled = true;
        for (std::size_t j = 0; j < n && settled; ++j) {
            const auto& ln = from_one.log_norm[j];
            Time last = -1;
            for (Time t = 0; t <= T; ++t) {
                if (!(ln[static_cast<std::size_t>(t)] < log_eps)) last = t;
            }
            if (last == T) settled = false;
            t_max = std::max(t_max, static_cast<double>(last + 1));
        }
        c.T = t_max;
        if (!settled) {
            c.ok = false;
            c.note = "some path is not below eps by the horizon";
            rep.cases.push_back(c);
            continue;
        }
        c.delta = std::min(1.0, eps * std::pow(std::max(L, 1.0), -t_max));
        const auto small = simulate_switched(sys, scaled(0.999 * c.delta), T, n, s);
        long double worst = -std::numeric_limits<long double>::infinity();
        std::size_t violations = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const long double m = *std::max_element(small.log_norm[j].begin(), small.log_norm[j].end());
            worst = std::max(worst, m);
            if (!(m < log_eps)) ++violations;
        }
        c.value = static_cast<double>(std::exp(worst));
        c.ok = violations == 0;
        c.note = std::to_string(violations) + " paths reach eps; L = " + std::to_string(L);
        rep.cases.push_back(c);
    }
    return rep;
}

}  // namespace hybstab
