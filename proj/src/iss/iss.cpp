#include "hybstab/iss/iss.hpp"

#include "hybstab/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace hybstab {

DisturbanceSignal DisturbanceSignal::zero(std::size_t dim) {
    DisturbanceSignal s;
    s.kind_ = Kind::zero;
    s.dim_ = dim;
    return s;
}

DisturbanceSignal DisturbanceSignal::constant(Vec w) {
    if (w.empty()) throw ValidationError("disturbance.value", "must be nonempty");
    DisturbanceSignal s;
    s.kind_ = Kind::constant;
    s.dim_ = w.size();
    s.value_ = std::move(w);
    return s;
}

DisturbanceSignal DisturbanceSignal::sinusoid(double amplitude, double period, double phase, std::size_t dim) {
    if (!(period > 0.0)) throw ValidationError("disturbance.period", "must be > 0");
    DisturbanceSignal s;
    s.kind_ = Kind::sinusoid;
    s.dim_ = dim;
    s.amplitude_ = amplitude;
    s.period_ = period;
    s.phase_ = phase;
    return s;
}

DisturbanceSignal DisturbanceSignal::bang_bang(double level, Time period, std::size_t dim) {
    if (period < 1) throw ValidationError("disturbance.period", "must be >= 1");
    DisturbanceSignal s;
    s.kind_ = Kind::bang_bang;
    s.dim_ = dim;
    s.amplitude_ = level;
    s.period_ = static_cast<double>(period);
    return s;
}

DisturbanceSignal DisturbanceSignal::table(std::vector<Vec> values) {
    if (values.empty()) throw ValidationError("disturbance.table", "must be nonempty");
    const std::size_t d = values.front().size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != d) throw ValidationError("disturbance.table[" + std::to_string(i) + "]", "ragged row");
    }
    DisturbanceSignal s;
    s.kind_ = Kind::table;
    s.dim_ = d;
    s.table_ = std::move(values);
    return s;
}

DisturbanceSignal DisturbanceSignal::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("disturbance.csv", "cannot open " + path);
    std::vector<Vec> rows;
    std::string line;
    bool skip_first_column = false;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            first = false;
            char* end = nullptr;
            std::strtod(cells.front().c_str(), &end);
            if (end == cells.front().c_str()) {
                skip_first_column = cells.front() == "t";
                continue;
            }
        }
        Vec row;
        for (std::size_t k = skip_first_column ? 1 : 0; k < cells.size(); ++k) {
            try {
                row.push_back(std::stod(cells[k]));
            } catch (const std::exception&) {
                throw ValidationError("disturbance.csv", "bad number '" + cells[k] + "' in " + path);
            }
        }
        rows.push_back(std::move(row));
    }
    return table(std::move(rows));
}

Vec DisturbanceSignal::at(Time t) const {
    if (t < 0) throw DomainError("disturbance queried at negative time");
    switch (kind_) {
        case Kind::zero: return Vec(dim_, 0.0);
        case Kind::constant: return value_;
        case Kind::sinusoid:
            return Vec(dim_, amplitude_ * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period_ + phase_));
        case Kind::bang_bang: {
            const Time half = static_cast<Time>(period_);
            return Vec(dim_, (t / half) % 2 == 0 ? amplitude_ : -amplitude_);
        }
        case Kind::table:
            if (t >= static_cast<Time>(table_.size())) {
                throw HorizonError("disturbance table has " + std::to_string(table_.size()) + " rows, queried at t=" +
                                   std::to_string(t));
            }
            return table_[static_cast<std::size_t>(t)];
    }
    return {};
}

double DisturbanceSignal::sup_norm(Time T) const {
    double s = 0.0;
    for (Time t = 0; t <= T; ++t) s = std::max(s, norm(at(t)));
    return s;
}

bool DisturbanceSignal::identically_zero(Time T) const {
    if (kind_ == Kind::zero) return true;
    return sup_norm(T) == 0.0;
}

std::string DisturbanceSignal::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::zero: os << "zero"; break;
        case Kind::constant: os << "constant"; break;
        case Kind::sinusoid: os << "sinusoid(amplitude " << amplitude_ << ", period " << period_ << ")"; break;
        case Kind::bang_bang: os << "bang-bang(level " << amplitude_ << ", period " << period_ << ")"; break;
        case Kind::table: os << "table[" << table_.size() << "]"; break;
    }
    return os.str();
}

void DisturbedSystem::validate() const {
    system.validate();
    if (!lyap.Lambda) throw ValidationError("lyapunov.Lambda", "the disturbed system needs a Lambda matrix");
    if (!(w_max >= 0.0)) throw ValidationError("w_max", "must be >= 0");
    if (disturbance.dim() == 0) throw ValidationError("disturbance", "dimension must be >= 1");
    const Vec zx(system.dim(), 0.0);
    const Vec zw(disturbance.dim(), 0.0);
    for (std::size_t i = 0; i < system.maps.size(); ++i) {
        const double g = norm(system.maps[i](zx, zw));
        if (!(g <= 1e-10)) throw ValidationError("system.maps[" + std::to_string(i) + "]", "f(0, 0) must be 0");
    }
}

double IssEnvelope::at(Time t) const {
    if (t >= 0 && static_cast<std::size_t>(t) < values.size()) return values[static_cast<std::size_t>(t)];
    return transient0 * std::exp(-alpha_star * static_cast<double>(t)) + offset;
}

namespace {

std::vector<Vec> disturbance_values(const DisturbedSystem& sys, Time T) {
    std::set<Vec> seen;
    for (Time t = 0; t <= T; ++t) seen.insert(sys.disturbance.at(t));
    const std::size_t wd = sys.disturbance.dim();
    seen.insert(Vec(wd, sys.w_max));
    seen.insert(Vec(wd, -sys.w_max));
    seen.insert(Vec(wd, 0.0));
    return {seen.begin(), seen.end()};
}

}  // namespace

IssEnvelope iss_bound(const DisturbedSystem& sys, const Vec& x0, Time T, double alpha_star) {
    sys.validate();
    IssEnvelope env;
    env.condition = check_S2(*sys.lyap.Lambda, sys.lyap.mu, sys.system.chain);
    if (!env.condition.ok) {
        throw DomainError("condition fails: mu * max_i sum_j p_ij lambda_ji = " + std::to_string(env.condition.value) +
                          " >= 1, no envelope");
    }
    env.alpha_star = alpha_star > 0.0 ? alpha_star : env.condition.alpha_star;
    if (!(env.condition.value * std::exp(env.alpha_star) < 1.0)) {
        throw DomainError("alpha* too large for the condition value");
    }
    env.K_radius = sys.rho(sys.w_max);
    const Region K = Region::ball(env.K_radius);
    const std::size_t M = sys.system.maps.size();
    const std::size_t d = sys.system.dim();
    const auto& lyap = sys.lyap;

    DeltaOptions dopt;
    dopt.dim = d;
    for (std::size_t i = 0; i < M; ++i) dopt.modes.push_back(static_cast<std::int64_t>(i));
    auto Vjoint = [&lyap](const State& s) { return lyap.V(static_cast<std::size_t>(s.site), s.x); };
    env.delta = compute_delta(Vjoint, K, dopt);

    // beta over a grid of K (including the boundary), every mode, every disturbance value
    std::vector<Vec> ball{Vec(d, 0.0)};
    if (env.K_radius > 0.0) {
        LogRadialGrid g{env.K_radius * 1e-3, env.K_radius, 25, 16};
        for (auto& p : g.points(d)) ball.push_back(std::move(p));
    }
    std::vector<State> cand;
    for (std::size_t i = 0; i < M; ++i) {
        for (const auto& p : ball) cand.push_back(joint_state(static_cast<std::int64_t>(i), p));
    }
    BetaOptions bopt;
    bopt.candidates = cand;
    const double a = env.alpha_star;
    auto phi = [&lyap, a](Time t, const State& s) {
        return std::exp(a * static_cast<double>(t)) * lyap.V(static_cast<std::size_t>(s.site), s.x);
    };
    env.beta = Estimate{0.0, 0.0, Provenance::grid, ""};
    const auto ws = disturbance_values(sys, T);
    for (const Vec& w : ws) {
        const SwitchedSystem* s = &sys.system;
        auto row = [s, w](Time, const State& st) -> std::optional<std::vector<Transition>> {
            const auto i = static_cast<std::size_t>(st.site);
            const Vec y = s->maps.at(i)(st.x, w);
            std::vector<Transition> out;
            for (std::size_t j = 0; j < s->chain.modes(); ++j) {
                const double p = s->chain.P()(i, j);
                if (p > 0.0) out.push_back({joint_state(static_cast<std::int64_t>(j), y), p});
            }
            return out;
        };
        auto sampler = [](Time, const State& st, Rng&) { return st; };
        const FunctionKernel k(SpaceKind::joint, d, true, sampler, row);
        const BetaResult b = compute_beta(k, phi, K, bopt);
        env.beta.value = std::max(env.beta.value, b.beta.value);
    }
    env.beta.note = "max over " + std::to_string(cand.size()) + " points of K and " + std::to_string(ws.size()) +
                    " disturbance values";

    env.transient0 = lyap.alpha2(norm(x0));
    env.offset = env.beta.value / (-std::expm1(-env.alpha_star)) + env.delta.value;
    env.values.resize(static_cast<std::size_t>(std::max<Time>(T, 0)) + 1);
    for (std::size_t t = 0; t < env.values.size(); ++t) {
        env.values[t] = env.transient0 * std::exp(-env.alpha_star * static_cast<double>(t)) + env.offset;
    }
    return env;
}

IssLyapunovReport verify_iss_family(const DisturbedSystem& sys, const LogRadialGrid& grid) {
    sys.validate();
    const auto& lyap = sys.lyap;
    const std::size_t M = sys.system.maps.size();
    const std::size_t d = sys.system.dim();
    const auto pts = grid.points(d);
    IssLyapunovReport rep;
    rep.bounds.name = "bounds";
    rep.comparable.name = "comparable";
    rep.decrease.name = "decrease";

    auto record = [](LyapunovItem& it, double lhs, double rhs, const Vec& x, std::size_t i, std::size_t j) {
        ++it.checked;
        const double scale = std::max(std::abs(lhs), std::abs(rhs));
        const double s = scale == 0.0 ? 0.0 : (rhs - lhs) / scale;
        if (s < it.worst) {
            it.worst = s;
            it.at = x;
            it.mode_i = i;
            it.mode_j = j;
        }
    };
    const std::size_t wd = sys.disturbance.dim();
    std::vector<Vec> ws;
    for (double f : {-1.0, -0.5, 0.0, 0.5, 1.0}) ws.push_back(Vec(wd, f * sys.w_max));

    for (const auto& x : pts) {
        const double nx = norm(x);
        for (std::size_t i = 0; i < M; ++i) {
            const double v = lyap.V(i, x);
            record(rep.bounds, lyap.alpha1(nx), v, x, i, i);
            record(rep.bounds, v, lyap.alpha2(nx), x, i, i);
            for (std::size_t j = 0; j < M; ++j) {
                record(rep.comparable, v, lyap.mu * lyap.V(j, x), x, i, j);
                for (const auto& w : ws) {
                    if (!(nx > sys.rho(norm(w)))) continue;
                    record(rep.decrease, lyap.V(i, sys.system.maps[j](x, w)), (*lyap.Lambda)(i, j) * v, x, i, j);
                }
            }
        }
    }
    for (auto* it : {&rep.bounds, &rep.comparable, &rep.decrease}) it->ok = it->worst >= -1e-12;
    return rep;
}

IssReport iss_check(const DisturbedSystem& sys, const Vec& x0, Time T, std::size_t n, std::uint64_t seed,
                    double alpha_star) {
    IssReport rep;
    sys.validate();
    const double sup = sys.disturbance.sup_norm(T);
    if (sup > sys.w_max * (1.0 + 1e-12)) {
        rep.precondition_ok = false;
        std::ostringstream os;
        os << "disturbance reaches " << sup << " > declared w_max " << sys.w_max;
        rep.precondition = os.str();
        return rep;
    }
    rep.precondition = "disturbance within w_max";
    rep.envelope = iss_bound(sys, x0, T, alpha_star);
    rep.zero_disturbance = sys.disturbance.identically_zero(T);

    const DisturbanceFn w = [&sys](Time t) { return sys.disturbance.at(t); };
    const SwitchedBatch sb = simulate_switched(sys.system, x0, T, n, seed, rep.zero_disturbance ? nullptr : &w);
    rep.ran = true;

    rep.alpha1_mean.per_time.resize(static_cast<std::size_t>(T) + 1);
    std::vector<double> col(n);
    rep.ok = true;
    for (Time t = 0; t <= T; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            col[j] = sys.lyap.alpha1(static_cast<double>(std::exp(sb.log_norm[j][static_cast<std::size_t>(t)])));
        }
        const StatPoint p = summarize(col);
        rep.alpha1_mean.per_time[static_cast<std::size_t>(t)] = p;
        const double env = rep.envelope.at(t);
        const double m = margin_in_se(env, p.mean, p.se);
        if (m < rep.worst_margin_se) {
            rep.worst_margin_se = m;
            rep.worst_t = t;
        }
        if (!(p.mean <= env + 3.0 * p.se)) rep.ok = false;
    }
    if (rep.zero_disturbance) {
        DiagnosticsOptions opt;
        opt.check_envelope = sys.lyap.lambda0.has_value();
        rep.diagnostics = stability_diagnostics(sb, sys.lyap, sys.system, rep.envelope.alpha_star, opt);
    }
    return rep;
}

}  // namespace hybstab
