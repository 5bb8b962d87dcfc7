#include "hybstab/diffusion/diffusion.hpp"

#include "hybstab/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hybstab {

namespace {

inline double besq_step(double y, double delta, double dt, double sqrt_dt, double z) {
    return std::max(y + delta * dt + 2.0 * std::sqrt(std::max(y, 0.0)) * sqrt_dt * z, 0.0);
}

std::size_t integral_steps(double span, double dt, const std::string& field) {
    const double r = span / dt;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
        throw ValidationError(field, "horizon must be an integral multiple of dt");
    }
    return static_cast<std::size_t>(k);
}

double run_from(double y, std::size_t steps, const std::vector<double>& z, double delta, double dt) {
    const double sq = std::sqrt(dt);
    for (std::size_t k = 0; k < steps; ++k) y = besq_step(y, delta, dt, sq, z[k]);
    return y;
}

}  // namespace

void BesqSpec::validate() const {
    if (!(dt > 0.0)) throw ValidationError("besq.dt", "must be > 0");
    if (!(S >= 0.0)) throw ValidationError("besq.S", "must be >= 0");
    if (!(delta >= 0.0)) throw ValidationError("besq.delta", "must be >= 0");
    if (!(y0 >= 0.0)) throw ValidationError("besq.y0", "must be >= 0");
    if (paths == 0) throw ValidationError("besq.paths", "must be >= 1");
    integral_steps(S, dt, "besq.S");
}

std::size_t BesqSpec::steps() const { return integral_steps(S, dt, "besq.S"); }

BesqResult besq_simulate(const BesqSpec& spec, std::uint64_t seed, bool keep_paths) {
    spec.validate();
    const std::size_t steps = spec.steps();
    const double sq = std::sqrt(spec.dt);
    BesqResult out;
    out.terminal.resize(spec.paths);
    if (keep_paths) out.paths.resize(spec.paths);
    parallel_for(spec.paths, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        double y = spec.y0;
        if (keep_paths) {
            out.paths[j].reserve(steps + 1);
            out.paths[j].push_back(y);
        }
        for (std::size_t k = 0; k < steps; ++k) {
            y = besq_step(y, spec.delta, spec.dt, sq, rng.normal());
            if (keep_paths) out.paths[j].push_back(y);
        }
        out.terminal[j] = y;
    });
    out.mean = summarize(out.terminal);
    return out;
}

BesqMeanCheck besq_mean_check(const BesqSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t steps = spec.steps();
    const double dt = spec.dt;
    const double h = dt / 2.0;
    const double sq = std::sqrt(dt);
    const double sqh = std::sqrt(h);
    std::vector<double> coarse(spec.paths), fine(spec.paths), diff(spec.paths);
    parallel_for(spec.paths, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        double yc = spec.y0;
        double yf = spec.y0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            yf = besq_step(yf, spec.delta, h, sqh, z1);
            yf = besq_step(yf, spec.delta, h, sqh, z2);
            yc = besq_step(yc, spec.delta, dt, sq, (z1 + z2) / std::numbers::sqrt2);
        }
        coarse[j] = yc;
        fine[j] = yf;
        diff[j] = yc - yf;
    });
    BesqMeanCheck c;
    c.target = spec.y0 + spec.delta * spec.S;
    c.coarse = summarize(coarse);
    c.fine = summarize(fine);
    const StatPoint d = summarize(diff);
    c.bias_budget = std::abs(d.mean) + 3.0 * d.se;
    c.deviation = std::abs(c.coarse.mean - c.target);
    c.ok = c.deviation <= 3.0 * c.coarse.se + c.bias_budget;
    return c;
}

// -----------------------------------------------------------------------------
// Payoffs and phi
// -----------------------------------------------------------------------------

Payoff Payoff::constant(double c) {
    if (!(c >= 0.0)) throw ValidationError("payoff.c", "must be >= 0");
    Payoff f;
    f.kind = Kind::constant;
    f.c = c;
    return f;
}

Payoff Payoff::linear(double c) {
    if (!(c >= 0.0)) throw ValidationError("payoff.c", "must be >= 0");
    Payoff f;
    f.kind = Kind::linear;
    f.c = c;
    return f;
}

Payoff Payoff::power(double c, double p) {
    if (!(c >= 0.0)) throw ValidationError("payoff.c", "must be >= 0");
    if (!(p >= 1.0 && p <= 2.0)) throw ValidationError("payoff.p", "must lie in [1, 2]");
    Payoff f;
    f.kind = Kind::power;
    f.c = c;
    f.p = p;
    return f;
}

Payoff Payoff::custom(std::function<double(double)> fn, std::string name) {
    Payoff f;
    f.kind = Kind::custom;
    f.fn = std::move(fn);
    f.name_ = std::move(name);
    return f;
}

double Payoff::operator()(double y) const {
    switch (kind) {
        case Kind::constant: return c;
        case Kind::linear: return c * y;
        case Kind::power: return c * std::pow(y, p);
        case Kind::custom: return fn(y);
    }
    return 0.0;
}

std::string Payoff::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::constant: os << c; break;
        case Kind::linear: os << c << " y"; break;
        case Kind::power: os << c << " y^" << p; break;
        case Kind::custom: os << name_; break;
    }
    return os.str();
}

double phi_affine(double t, double y, const Payoff& F, const BesqSpec& spec) {
    switch (F.kind) {
        case Payoff::Kind::constant: return F.c;
        case Payoff::Kind::linear: return F.c * (y + spec.delta * (spec.S - t));
        default: throw ValidationError("payoff", "closed form needs an affine payoff");
    }
}

double besq_second_moment(double y, double delta, double T) {
    return y * y + (2.0 * delta + 4.0) * (y * T + delta * T * T / 2.0);
}

StatPoint phi_estimate(double t, double y, const Payoff& F, const BesqSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (!(t >= 0.0 && t <= spec.S)) throw ValidationError("t", "must lie in [0, S]");
    if (!(y >= 0.0)) throw ValidationError("y", "must be >= 0");
    const std::size_t steps = integral_steps(spec.S - t, spec.dt, "S - t");
    if (steps == 0) return StatPoint{F(y), 0.0, 1};
    std::vector<double> v(spec.paths);
    const double sq = std::sqrt(spec.dt);
    parallel_for(spec.paths, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        double x = y;
        for (std::size_t k = 0; k < steps; ++k) x = besq_step(x, spec.delta, spec.dt, sq, rng.normal());
        v[j] = F(x);
        if (!std::isfinite(v[j])) throw NumericError("payoff overflow");
    });
    return summarize(v);
}

ShapeCheck phi_shape_check(const Payoff& F, const BesqSpec& spec, const std::vector<double>& ys, double t,
                           std::uint64_t seed) {
    spec.validate();
    if (ys.size() < 2) throw ValidationError("grid", "needs at least 2 points");
    if (!std::is_sorted(ys.begin(), ys.end()) || std::adjacent_find(ys.begin(), ys.end()) != ys.end()) {
        throw ValidationError("grid", "must be strictly increasing");
    }
    if (!(t >= 0.0 && t <= spec.S)) throw ValidationError("t", "must lie in [0, S]");
    ShapeCheck rep;
    rep.ys = ys;

    const std::size_t base = integral_steps(spec.S - t, spec.dt, "S - t");
    // time step for the residual: ten Euler steps, one-sided near the ends
    const std::size_t ht = std::min<std::size_t>(10, std::max<std::size_t>(base, 1));
    const bool back_ok = base >= ht;                            // phi at t + ht*dt has base - ht steps
    const std::size_t total = spec.steps();
    const bool fwd_ok = base + ht <= total;                     // phi at t - ht*dt has base + ht steps
    const std::size_t buffer = base + (fwd_ok ? ht : 0);

    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < ys.size(); ++k) mids.push_back((ys[k] + ys[k + 1]) / 2.0);

    const std::size_t G = ys.size();
    const std::size_t n = spec.paths;
    // per grid point: value at t, midpoint values, residual time shifts
    std::vector<std::vector<double>> at_t(G, std::vector<double>(n)), at_mid(mids.size(), std::vector<double>(n));
    std::vector<std::vector<double>> later(G, std::vector<double>(n)), earlier(G, std::vector<double>(n));
    parallel_for(n, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        std::vector<double> z(buffer);
        for (auto& v : z) v = rng.normal();
        for (std::size_t g = 0; g < G; ++g) {
            at_t[g][j] = F(run_from(ys[g], base, z, spec.delta, spec.dt));
            if (back_ok) later[g][j] = F(run_from(ys[g], base - ht, z, spec.delta, spec.dt));
            if (fwd_ok) earlier[g][j] = F(run_from(ys[g], base + ht, z, spec.delta, spec.dt));
        }
        for (std::size_t m = 0; m < mids.size(); ++m) at_mid[m][j] = F(run_from(mids[m], base, z, spec.delta, spec.dt));
    });

    for (std::size_t g = 0; g < G; ++g) rep.phi.push_back(summarize(at_t[g]));

    std::vector<double> d(n);
    for (std::size_t g = 0; g + 1 < G; ++g) {
        for (std::size_t j = 0; j < n; ++j) d[j] = at_t[g + 1][j] - at_t[g][j];
        const StatPoint s = summarize(d);
        const double slack = s.mean + 3.0 * s.se;
        rep.worst_monotone = std::min(rep.worst_monotone, slack);
        if (slack < 0.0) rep.monotone = false;

        for (std::size_t j = 0; j < n; ++j) d[j] = (at_t[g][j] + at_t[g + 1][j]) / 2.0 - at_mid[g][j];
        const StatPoint c = summarize(d);
        const double cs = c.mean + 3.0 * c.se;
        rep.worst_convex = std::min(rep.worst_convex, cs);
        if (cs < -1e-12 * std::max(1.0, std::abs(rep.phi[g].mean))) rep.convex = false;
    }

    // PDE residual d/dt phi + delta phi' + 2 y phi'' on a uniform grid
    bool uniform = G >= 5;
    const double hy = G >= 2 ? ys[1] - ys[0] : 0.0;
    for (std::size_t g = 1; g + 1 < G && uniform; ++g) {
        if (std::abs((ys[g + 1] - ys[g]) - hy) > 1e-9 * std::max(1.0, hy)) uniform = false;
    }
    if (!uniform || base == 0 || (!back_ok && !fwd_ok)) {
        rep.residual_available = false;
        rep.note = G < 5 ? "grid too coarse for second differences" : !uniform ? "grid not uniform" : "no time room";
        return rep;
    }
    const double htime = static_cast<double>(ht) * spec.dt;
    for (std::size_t g = 1; g + 1 < G; ++g) {
        const double y = ys[g];
        const double p_prev = rep.phi[g - 1].mean, p = rep.phi[g].mean, p_next = rep.phi[g + 1].mean;
        const double d1 = (p_next - p_prev) / (2.0 * hy);
        const double d2 = (p_next - 2.0 * p + p_prev) / (hy * hy);
        double dtime = 0.0;
        if (back_ok && fwd_ok) {
            dtime = (summarize(later[g]).mean - summarize(earlier[g]).mean) / (2.0 * htime);
        } else if (back_ok) {
            dtime = (summarize(later[g]).mean - p) / htime;
        } else {
            dtime = (p - summarize(earlier[g]).mean) / htime;
        }
        const double r = dtime + spec.delta * d1 + 2.0 * y * d2;
        rep.pde_residual.push_back(r);
        rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r));
    }
    rep.note = "central differences, y step " + std::to_string(hy) + ", t step " + std::to_string(htime);
    return rep;
}

CouplingCheck besq_coupling_check(const BesqSpec& spec, const std::vector<double>& ys, std::uint64_t seed) {
    spec.validate();
    const std::size_t steps = spec.steps();
    const double sq = std::sqrt(spec.dt);
    std::vector<std::size_t> bad(spec.paths, 0);
    parallel_for(spec.paths, [&](std::size_t j) {
        Rng rng(child_seed(seed, j));
        std::vector<double> y(ys);
        for (std::size_t k = 0; k < steps; ++k) {
            const double z = rng.normal();
            for (auto& v : y) v = besq_step(v, spec.delta, spec.dt, sq, z);
        }
        for (std::size_t g = 0; g + 1 < ys.size(); ++g) {
            if (ys[g] < ys[g + 1] && y[g] > y[g + 1]) ++bad[j];
        }
    });
    CouplingCheck c;
    c.pairs = spec.paths * (ys.empty() ? 0 : ys.size() - 1);
    for (auto b : bad) c.violations += b;
    return c;
}

// -----------------------------------------------------------------------------
// Drifts, sector condition, sampled chain
// -----------------------------------------------------------------------------

Drift Drift::linear(double kappa) {
    Drift b;
    b.kind = Kind::linear;
    b.kappa = kappa;
    return b;
}

Drift Drift::radial(double c) {
    Drift b;
    b.kind = Kind::radial;
    b.c = c;
    return b;
}

Drift Drift::custom(std::function<Vec(double, const Vec&)> fn) {
    Drift b;
    b.kind = Kind::custom;
    b.fn = std::move(fn);
    return b;
}

Vec Drift::operator()(double t, const Vec& x) const {
    switch (kind) {
        case Kind::linear: {
            Vec out(x);
            for (auto& v : out) v *= -kappa;
            return out;
        }
        case Kind::radial: {
            const double nx = norm(x);
            Vec out(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = -x[k] + (nx > 0.0 ? c * x[k] / nx : 0.0);
            return out;
        }
        case Kind::custom: return fn(t, x);
    }
    return {};
}

std::string Drift::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::linear:
            if (kappa >= 0.0) {
                os << "-" << kappa << " x";
            } else {
                os << -kappa << " x";
            }
            break;
        case Kind::radial: os << "-x + " << c << " x/|x|"; break;
        case Kind::custom: os << "custom"; break;
    }
    return os.str();
}

std::vector<Vec> sector_grid(double k_radius, double r_outer, int rings, int directions, std::size_t dim) {
    if (!(r_outer > k_radius) || rings < 1 || directions < 1 || dim == 0) {
        throw ValidationError("sector.grid", "needs r_outer > K radius and positive counts");
    }
    std::vector<Vec> dirs;
    if (dim == 1) {
        dirs = {{1.0}, {-1.0}};
    } else {
        for (int k = 0; k < directions; ++k) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(directions);
            Vec e(dim, 0.0);
            e[0] = std::cos(a);
            e[1] = std::sin(a);
            dirs.push_back(e);
        }
        for (std::size_t k = 2; k < dim; ++k) {
            for (double s : {1.0, -1.0}) {
                Vec e(dim, 0.0);
                e[k] = s;
                dirs.push_back(e);
            }
        }
    }
    std::vector<Vec> out;
    for (int i = 1; i <= rings; ++i) {
        const double r = k_radius + (r_outer - k_radius) * static_cast<double>(i) / static_cast<double>(rings);
        for (const auto& d : dirs) {
            Vec p(d);
            for (auto& v : p) v *= r;
            out.push_back(std::move(p));
        }
    }
    return out;
}

SectorReport sector_check(const Drift& b, const Region& K, const std::vector<Vec>& grid, const std::vector<double>& times) {
    SectorReport rep;
    if (grid.empty()) throw ValidationError("sector.grid", "must be nonempty");
    const std::vector<double> ts = times.empty() ? std::vector<double>{0.0} : times;
    for (const auto& x : grid) {
        if (K.contains(real_state(x))) throw ValidationError("sector.grid", "grid point lies inside K");
        for (double t : ts) {
            const double ip = dot(x, b(t, x));
            ++rep.checked;
            if (ip > rep.worst) {
                rep.worst = ip;
                rep.at = x;
                rep.at_t = t;
            }
        }
    }
    rep.ok = rep.worst < 0.0;
    return rep;
}

void DiffusionSpec::validate() const {
    if (dim == 0) throw ValidationError("diffusion.dim", "must be >= 1");
    if (!(dt > 0.0)) throw ValidationError("diffusion.dt", "must be > 0");
    if (horizon < 1) throw ValidationError("diffusion.horizon", "must cover at least one integer step");
    integral_steps(1.0, dt, "diffusion.dt");
}

TrajectoryBatch sampled_chain_extract(const DiffusionSpec& spec, const Vec& x0, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (x0.size() != spec.dim) throw ValidationError("x0", "dimension must be " + std::to_string(spec.dim));
    if (n == 0) throw ValidationError("paths", "must be >= 1");
    const std::size_t per_unit = integral_steps(1.0, spec.dt, "diffusion.dt");
    const double sq = std::sqrt(spec.dt);

    TrajectoryBatch batch;
    batch.space = SpaceKind::real;
    batch.seed = seed;
    batch.paths.resize(n);
    parallel_for(n, [&](std::size_t j) {
        Trajectory& path = batch.paths[j];
        path.seed = child_seed(seed, j);
        Rng rng(path.seed);
        Vec x = x0;
        bool frozen = spec.K.contains(real_state(x));
        path.states.push_back(real_state(x));
        for (Time i = 0; i < spec.horizon; ++i) {
            for (std::size_t k = 0; k < per_unit && !frozen; ++k) {
                const double t = static_cast<double>(i) + static_cast<double>(k) * spec.dt;
                const Vec drift = spec.drift(t, x);
                for (std::size_t c = 0; c < x.size(); ++c) {
                    x[c] += drift[c] * spec.dt + (spec.noise ? sq * rng.normal() : 0.0);
                }
                frozen = spec.K.contains(real_state(x));
            }
            path.states.push_back(real_state(x));
        }
    });
    return batch;
}

Certificate besq_diffusion_certificate(const Payoff& F, const DiffusionSpec& spec) {
    if (!F.affine()) throw ValidationError("payoff", "the sampled-chain certificate needs an affine payoff");
    BesqSpec b;
    b.delta = static_cast<double>(spec.dim);
    b.S = static_cast<double>(spec.horizon);
    auto phi = [F, b](Time t, const State& s) {
        const double tt = std::min(static_cast<double>(t), b.S);
        const double y = dot(s.x, s.x);
        return phi_affine(tt, y, F, b);
    };
    auto V = [](const State& s) { return dot(s.x, s.x); };
    return Certificate::custom(phi, V, Theta::exponential(0.0), spec.K, Certificate::Form::custom,
                               "phi(t, |x|^2) for F = " + F.describe() + ", horizon " + std::to_string(spec.horizon));
}

}  // namespace hybstab
