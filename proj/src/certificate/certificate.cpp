#include "hybstab/certificate/certificate.hpp"

#include "hybstab/core/parallel.hpp"
#include "hybstab/core/stats.hpp"
#include "hybstab/hybrid/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybstab {

namespace {

double exact_tolerance(double scale) { return 1e-12 * std::max(1.0, std::abs(scale)); }

void require_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw NumericError(what + " is not finite");
}

}  // namespace

Certificate::Certificate(PhiFn phi, StateFn V, Theta theta, Region K, Form form, std::string description)
    : phi_(std::move(phi)), V_(std::move(V)), theta_(std::move(theta)), K_(std::move(K)), form_(form),
      description_(std::move(description)) {
    if (!phi_ || !V_) throw ValidationError("certificate", "phi and V evaluators are required");
}

Certificate Certificate::exponential(StateFn V, double alpha, Region K) {
    if (!(alpha > 0.0)) throw ValidationError("certificate.alpha", "must be > 0");
    auto phi = [V, alpha](Time t, const State& x) { return std::exp(alpha * static_cast<double>(t)) * V(x); };
    std::ostringstream os;
    os << "exp(" << alpha << " t) V(x)";
    return Certificate(phi, std::move(V), Theta::exponential(alpha), std::move(K), Form::exponential, os.str());
}

Certificate Certificate::exponential_outside_K(StateFn V, double alpha, Region K) {
    if (!(alpha > 0.0)) throw ValidationError("certificate.alpha", "must be > 0");
    auto phi = [V, alpha, K](Time t, const State& x) {
        return K.contains(x) ? 0.0 : std::exp(alpha * static_cast<double>(t)) * V(x);
    };
    std::ostringstream os;
    os << "exp(" << alpha << " t) V(x) 1{x not in K}";
    return Certificate(phi, std::move(V), Theta::exponential(alpha), std::move(K), Form::exponential_outside_K,
                       os.str());
}

Certificate Certificate::custom(PhiFn phi, StateFn V, Theta theta, Region K, Form form, std::string description) {
    return Certificate(std::move(phi), std::move(V), std::move(theta), std::move(K), form, std::move(description));
}

std::string to_string(Certificate::Form form) {
    switch (form) {
        case Certificate::Form::exponential: return "exponential";
        case Certificate::Form::exponential_outside_K: return "exponential_outside_K";
        case Certificate::Form::table: return "table";
        case Certificate::Form::custom: return "custom";
    }
    return "?";
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::exact: return "exact";
        case Provenance::monte_carlo: return "monte_carlo";
        case Provenance::grid: return "grid";
    }
    return "?";
}

bool CertificateConstants::accepted() const {
    for (const Estimate* e : {&C, &gamma, &delta, &beta}) {
        if (!std::isfinite(e->value) || e->value < 0.0) return false;
    }
    return C.value >= gamma.value;
}

CertificateConstants constants_from(const CGamma& cg, Estimate delta, Estimate beta) {
    CertificateConstants out;
    out.C = {cg.C, 0.0, Provenance::exact, cg.closed_form ? "closed form" : "table sum + tail"};
    out.gamma = {cg.gamma, 0.0, Provenance::exact, ""};
    out.delta = std::move(delta);
    out.beta = std::move(beta);
    return out;
}

Estimate compute_delta(const StateFn& V, const Region& K, const DeltaOptions& options) {
    Estimate out;
    out.value = 0.0;
    auto take = [&](const State& x) {
        const double v = V(x);
        if (!std::isfinite(v)) throw NumericError("V is not finite on K");
        out.value = std::max(out.value, v);
    };

    if (auto members = K.enumerate()) {
        if (members->empty()) throw DomainError("delta requires a nonempty K");
        for (const auto& x : *members) take(x);
        out.provenance = Provenance::exact;
        out.note = "max over " + std::to_string(members->size()) + " states";
        return out;
    }
    if (K.kind() != Region::Kind::ball) throw DomainError("delta needs a finite or ball-shaped K");

    const std::size_t d = std::max<std::size_t>(options.dim, 1);
    const double r = K.radius();
    const Vec center = K.center().empty() ? Vec(d, 0.0) : K.center();
    const std::size_t m = r > 0.0 ? std::max<std::size_t>(options.points_per_axis, 2) : 1;
    const double h = m > 1 ? 2.0 * r / static_cast<double>(m - 1) : 0.0;

    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= m;
    std::vector<std::int64_t> modes = options.modes;
    const bool joint = !modes.empty();
    if (!joint) modes.push_back(0);

    std::size_t evaluated = 0;
    Vec y(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        double dist2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t i = rest % m;
            rest /= m;
            const double off = m > 1 ? -r + h * static_cast<double>(i) : 0.0;
            y[k] = center[k] + off;
            dist2 += off * off;
        }
        if (std::sqrt(dist2) > r * (1.0 + 1e-12)) continue;
        for (auto mode : modes) {
            take(joint ? joint_state(mode, y) : real_state(y));
            ++evaluated;
        }
    }
    out.provenance = Provenance::grid;
    std::ostringstream os;
    os.precision(6);
    os << "grid max over " << evaluated << " points, spacing " << h;
    if (options.lipschitz) {
        const double slack = *options.lipschitz * h * std::sqrt(static_cast<double>(d)) / 2.0;
        out.value += slack;
        os << ", Lipschitz slack " << slack;
    }
    out.note = os.str();
    return out;
}

BetaResult compute_beta(const Kernel& kernel, const PhiFn& phi, const Region& K, const BetaOptions& options) {
    std::vector<State> starts;
    if (options.candidates) {
        starts = *options.candidates;
    } else if (auto members = K.enumerate()) {
        starts = *members;
    } else {
        throw ValidationError("beta", "K is not finite; supply candidate start points");
    }
    BetaResult out;
    if (starts.empty()) {
        out.beta.note = "K is empty";
        return out;
    }
    out.per_start.resize(starts.size());

    if (options.mode == BetaOptions::Mode::exact) {
        for (std::size_t i = 0; i < starts.size(); ++i) {
            auto row = kernel.row(0, starts[i]);
            if (!row) throw ValidationError("beta", "exact mode needs finite kernel rows");
            double s = 0.0;
            for (const auto& tr : *row) {
                if (tr.prob == 0.0 || K.contains(tr.to)) continue;
                const double v = phi(0, tr.to);
                require_finite(v, "phi(0, y) at a reachable y");
                s += tr.prob * v;
            }
            out.per_start[i] = {starts[i], StatPoint{s, 0.0, 0}};
        }
        out.beta.provenance = Provenance::exact;
    } else {
        if (options.samples == 0) throw ValidationError("beta.samples", "must be >= 1");
        parallel_for(starts.size(), [&](std::size_t i) {
            Rng rng(child_seed(options.seed, i));
            std::vector<double> v(options.samples);
            for (auto& s : v) {
                const State y = kernel.sample(0, starts[i], rng);
                s = K.contains(y) ? 0.0 : phi(0, y);
                require_finite(s, "phi(0, y) at a sampled y");
            }
            out.per_start[i] = {starts[i], summarize(v)};
        });
        out.beta.provenance = Provenance::monte_carlo;
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < starts.size(); ++i) {
        if (out.per_start[i].second.mean > out.per_start[best].second.mean) best = i;
    }
    out.beta.value = out.per_start[best].second.mean;
    out.beta.se = out.per_start[best].second.se;
    out.argmax = starts[best];
    out.beta.note = "max over " + std::to_string(starts.size()) + " start points";
    return out;
}

double theorem_bound(const CertificateConstants& c, double phi0) {
    for (double v : {c.C.value, c.gamma.value, c.delta.value, c.beta.value, phi0}) {
        if (!std::isfinite(v)) throw DomainError("bound constants must be finite");
    }
    return c.C.value * c.beta.value + c.delta.value + c.gamma.value * phi0;
}

ExactVerifyReport verify_supermartingale_exact(const Kernel& kernel, const Certificate& cert, Time T,
                                               std::vector<State> domain) {
    ExactVerifyReport rep;
    if (domain.empty()) {
        auto n = kernel.finite_size();
        if (!n) throw ValidationError("domain", "an explicit state domain is required for infinite spaces");
        for (std::size_t i = 0; i < *n; ++i) domain.push_back(site_state(static_cast<std::int64_t>(i)));
        rep.coverage = "all " + std::to_string(*n) + " states";
    } else {
        rep.coverage = std::to_string(domain.size()) + " listed states";
    }
    rep.coverage += ", t < " + std::to_string(T);

    std::vector<State> outside;
    for (auto& x : domain) {
        if (!cert.K().contains(x)) outside.push_back(std::move(x));
    }

    struct Slot {
        StateSlack worst;
        std::size_t violations = 0;
        double envelope_gap = kInf;
        bool envelope_ok = true;
    };
    std::vector<Slot> slots(outside.size());
    parallel_for(outside.size(), [&](std::size_t i) {
        const State& x = outside[i];
        Slot& s = slots[i];
        s.worst.x = x;
        for (Time t = 0; t < T; ++t) {
            auto row = kernel.row(t, x);
            if (!row) throw ValidationError("kernel", "exact verification needs finite-support rows");
            const double here = cert.phi(t, x);
            double next = 0.0;
            for (const auto& tr : *row) {
                if (tr.prob != 0.0) next += tr.prob * cert.phi(t + 1, tr.to);
            }
            const double slack = here - next;
            if (slack < s.worst.slack) {
                s.worst.slack = slack;
                s.worst.t = t;
            }
            if (slack < -exact_tolerance(here)) ++s.violations;
            const double gap = here - cert.V(x) * cert.theta().inverse(t);
            s.envelope_gap = std::min(s.envelope_gap, gap);
            if (gap < -exact_tolerance(here)) s.envelope_ok = false;
        }
    });

    for (const auto& s : slots) {
        rep.checked += static_cast<std::size_t>(std::max<Time>(T, 0));
        rep.violations += s.violations;
        rep.per_state.push_back(s.worst);
        if (s.worst.slack < rep.worst_slack) {
            rep.worst_slack = s.worst.slack;
            rep.worst_t = s.worst.t;
            rep.worst_x = s.worst.x;
        }
        rep.worst_envelope_gap = std::min(rep.worst_envelope_gap, s.envelope_gap);
        rep.envelope_ok = rep.envelope_ok && s.envelope_ok;
    }
    rep.ok = rep.violations == 0;
    return rep;
}

McVerifyReport verify_supermartingale_mc(const TrajectoryBatch& batch, const Certificate& cert, double confidence,
                                         std::size_t min_surviving) {
    McVerifyReport rep;
    rep.confidence = confidence;
    rep.z_critical = normal_quantile(confidence);
    const Time T = batch.horizon();
    if (T < 0) return rep;
    const std::size_t n = batch.size();
    const auto steps = static_cast<std::size_t>(T);

    std::vector<std::size_t> outside;
    for (std::size_t j = 0; j < n; ++j) {
        if (!cert.K().contains(batch.paths[j].states.front())) outside.push_back(j);
    }
    const std::size_t m_paths = outside.size();

    std::vector<Time> tau(m_paths);
    std::vector<std::vector<double>> stopped(m_paths);
    parallel_for(m_paths, [&](std::size_t j) {
        const auto& path = batch.paths[outside[j]];
        const ExtTime hit = first_hit_time(path, cert.K());
        tau[j] = hit.is_finite() ? hit.value : T + 1;
        auto& m = stopped[j];
        m.resize(steps + 1);
        for (std::size_t t = 0; t <= steps; ++t) {
            const Time s = std::min<Time>(static_cast<Time>(t), tau[j]);
            m[t] = cert.phi(s, path.states[static_cast<std::size_t>(s)]);
            require_finite(m[t], "stopped phi");
        }
    });

    std::vector<double> col(m_paths);
    for (std::size_t t = 0; t < steps; ++t) {
        McTimePoint p;
        p.t = static_cast<Time>(t);
        double scale = 0.0;
        for (std::size_t j = 0; j < m_paths; ++j) {
            col[j] = stopped[j][t + 1] - stopped[j][t];
            scale = std::max(scale, std::abs(stopped[j][t]));
            if (tau[j] > static_cast<Time>(t)) ++p.surviving;
        }
        p.increment = summarize(col);
        p.tested = p.surviving >= min_surviving;
        if (p.tested) {
            if (p.increment.se > 0.0) {
                p.z = p.increment.mean / p.increment.se;
                p.rejected = p.z > rep.z_critical;
            } else {
                p.rejected = p.increment.mean > exact_tolerance(scale);
            }
        } else {
            ++rep.skipped;
        }
        if (p.rejected) {
            ++rep.rejections;
            if (rep.first_rejection < 0) rep.first_rejection = p.t;
        }
        rep.points.push_back(p);
    }
    rep.ok = rep.rejections == 0;

    for (std::size_t s = 0; s <= steps && m_paths > 0; ++s) {
        const double th = cert.theta()(static_cast<Time>(s));
        for (std::size_t j = 0; j < m_paths; ++j) {
            const auto& path = batch.paths[outside[j]];
            const double alive = tau[j] > static_cast<Time>(s) ? cert.V(path.states[s]) : 0.0;
            col[j] = alive - cert.phi(0, path.states.front()) * th;
        }
        const StatPoint d = summarize(col);
        const double margin = margin_in_se(0.0, d.mean, d.se);
        if (margin < rep.first_bound_worst_margin) {
            rep.first_bound_worst_margin = margin;
            rep.first_bound_worst_s = static_cast<Time>(s);
        }
        if (d.mean > 3.0 * d.se + exact_tolerance(d.mean)) rep.first_bound_ok = false;
    }
    return rep;
}

double margin_in_se(double bound, double mean, double se) {
    const double gap = bound - mean;
    if (se > 0.0) return gap / se;
    return gap >= 0.0 ? kInf : -kInf;
}

BoundCheckReport empirical_bound_check(const TrajectoryBatch& batch, const StateFn& V, double bound) {
    BoundCheckReport rep;
    rep.bound = bound;
    rep.means = estimate_functional(batch, V);
    rep.sup_mean = -kInf;
    for (std::size_t t = 0; t < rep.means.per_time.size(); ++t) {
        const auto& p = rep.means.per_time[t];
        if (p.mean > rep.sup_mean) {
            rep.sup_mean = p.mean;
            rep.sup_t = static_cast<Time>(t);
        }
        rep.margin_se = std::min(rep.margin_se, margin_in_se(bound, p.mean, p.se));
        if (p.mean > bound + 3.0 * p.se) rep.ok = false;
    }
    if (rep.means.per_time.empty()) rep.sup_mean = 0.0;
    return rep;
}

}  // namespace hybstab
