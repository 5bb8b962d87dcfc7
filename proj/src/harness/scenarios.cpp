#include "hybstab/harness/harness.hpp"

#include "hybstab/diffusion/diffusion.hpp"
#include "hybstab/hybrid/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

namespace hybstab::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// -----------------------------------------------------------------------------
// Run context
// -----------------------------------------------------------------------------

class Ctx {
public:
    Ctx(Report& rep, fs::path out, bool write, std::set<std::string> stages)
        : rep_(rep), out_(std::move(out)), write_(write), stages_(std::move(stages)) {}

    [[nodiscard]] bool want(const std::string& s) const { return stages_.count(s) > 0; }

    void check(const std::string& name, bool ok, double value, double se, std::string detail) {
        rep_.checks.push_back({name, ok ? Status::pass : Status::fail, value, se, std::move(detail)});
    }
    void constant(const std::string& name, double value, double se = 0.0, std::string provenance = {}) {
        rep_.constants.push_back({name, value, se, std::move(provenance)});
    }
    void estimate(const std::string& name, const Estimate& e) {
        constant(name, e.value, e.se, to_string(e.provenance) + (e.note.empty() ? "" : ": " + e.note));
    }

    /// Runs f; an exception becomes an error check named `name`.
    template <class F>
    void guard(const std::string& name, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            rep_.checks.push_back({name, Status::error, kNaN, kNaN, e.what()});
        }
    }

    /// Writes a data file when artifacts are enabled.
    void artifact(const std::string& file, const std::function<void(std::ostream&)>& writer) {
        if (!write_) return;
        fs::create_directories(out_);
        std::ofstream os(out_ / file);
        if (!os) throw Error("cannot write " + (out_ / file).string());
        writer(os);
        rep_.artifacts.push_back(file);
    }

private:
    Report& rep_;
    fs::path out_;
    bool write_;
    std::set<std::string> stages_;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

void write_stat_csv(std::ostream& os, const std::string& header, const StatSummary& s,
                    const std::function<double(Time)>& extra = {}) {
    os << header << '\n';
    os.precision(17);
    for (std::size_t t = 0; t < s.per_time.size(); ++t) {
        os << t << ',' << s.per_time[t].mean << ',' << s.per_time[t].se;
        if (extra) os << ',' << extra(static_cast<Time>(t));
        os << '\n';
    }
}

/// Common top-level keys; returns the root node with them consumed.
Node root_node(const ScenarioConfig& cfg) {
    const Json* components = nullptr;
    if (auto it = cfg.raw.find("components"); it != cfg.raw.end()) {
        if (!it->is_object()) throw ValidationError("components", "expected an object of named specs");
        components = &*it;
    }
    Node root(cfg.raw, "", components);
    for (const char* k : {"schema_version", "name", "kind", "seed", "description", "output_dir", "components"}) {
        (void)root.find(k);
    }
    return root;
}

struct Expectation {
    std::map<std::string, double> values;
    double tolerance = 1e-12;
};

Expectation parse_expect(const Node& root) {
    Expectation e;
    if (auto n = root.child_opt("expect")) {
        e.tolerance = n->number_or("tolerance", 1e-12);
        for (auto it = n->json().begin(); it != n->json().end(); ++it) {
            if (it.key() == "tolerance") continue;
            e.values[it.key()] = n->number(it.key());
        }
        n->finish();
    }
    return e;
}

void check_expectations(Ctx& ctx, const Expectation& e, const std::map<std::string, double>& computed) {
    for (const auto& [name, want] : e.values) {
        auto it = computed.find(name);
        if (it == computed.end()) {
            ctx.check("expect." + name, false, kNaN, 0.0, "no computed constant named " + name);
            continue;
        }
        const double gap = std::abs(it->second - want);
        ctx.check("expect." + name, gap <= e.tolerance * std::max(1.0, std::abs(want)), gap, 0.0,
                  "computed " + fmt(it->second) + ", expected " + fmt(want));
    }
}

std::vector<State> build_domain(const Node& n, const KernelSpec& k) {
    std::vector<State> out;
    if (n.has("states")) {
        const Json& s = n.at("states");
        if (!s.is_array()) throw ValidationError(n.key_path("states"), "expected an array");
        for (std::size_t i = 0; i < s.size(); ++i) {
            out.push_back(build_state(s[i], n.key_path("states") + "[" + std::to_string(i) + "]", k));
        }
    } else if (n.has("from")) {
        const auto from = n.integer("from");
        const auto to = n.integer("to");
        if (to < from) throw ValidationError(n.key_path("to"), "must be >= from");
        for (auto x = from; x <= to; ++x) out.push_back(build_state(Json(x), n.key_path("from"), k));
    }
    return out;
}

// -----------------------------------------------------------------------------
// bound / certificate-verify
// -----------------------------------------------------------------------------

struct BoundPlan {
    KernelSpec chain;
    Region K;
    StateFn V;
    std::optional<Certificate> cert;
    State x0;
    Time horizon = 0;
    std::size_t paths = 0;
    BetaOptions beta;
    std::vector<State> domain;
    Time verify_T = 0;
    double confidence = 0.99;
    std::size_t min_surviving = 100;
    double required_margin_se = 0.0;
    Expectation expect;
    std::size_t export_paths = 50;
};

BoundPlan parse_bound(const ScenarioConfig& cfg, const Overrides& ov) {
    BoundPlan p;
    Node root = root_node(cfg);
    p.chain = build_kernel(root.child("chain"));
    p.K = build_region(root.child("K"), &p.chain);
    p.V = build_V(root.child("V"), &p.chain);
    p.cert = build_certificate(root.child("certificate"), p.V, p.K);
    p.x0 = build_state(root.at("x0"), "x0", p.chain);
    p.horizon = ov.horizon.value_or(root.integer("horizon"));
    if (p.horizon < 1) throw ValidationError("horizon", "must be >= 1");
    p.paths = ov.paths.value_or(root.count("paths"));
    if (auto b = root.child_opt("beta")) {
        const std::string mode = b->string_or("mode", "exact");
        if (mode == "exact") {
            p.beta.mode = BetaOptions::Mode::exact;
        } else if (mode == "monte_carlo") {
            p.beta.mode = BetaOptions::Mode::monte_carlo;
        } else {
            throw ValidationError(b->key_path("mode"), "must be exact or monte_carlo");
        }
        p.beta.samples = b->count_or("samples", p.beta.samples);
        b->finish();
    }
    p.beta.seed = child_seed(cfg.seed, 0xBE7A);
    p.verify_T = p.horizon;
    if (auto v = root.child_opt("verify")) {
        p.domain = build_domain(*v, p.chain);
        p.verify_T = v->integer_or("horizon", p.horizon);
        v->finish();
    }
    if (p.domain.empty() && !p.chain.finite) {
        throw ValidationError("verify", "an explicit state range is required on infinite spaces");
    }
    if (auto m = root.child_opt("mc")) {
        p.confidence = m->number_or("confidence", p.confidence);
        p.min_surviving = m->count_or("min_surviving", p.min_surviving);
        m->finish();
    }
    p.required_margin_se = root.number_or("required_margin_se", 0.0);
    p.expect = parse_expect(root);
    p.export_paths = root.count_or("export_paths", p.export_paths);
    root.finish();
    return p;
}

void run_bound(const BoundPlan& p, const ScenarioConfig& cfg, Ctx& ctx, std::uint64_t seed) {
    const Certificate& cert = *p.cert;
    std::optional<CertificateConstants> consts;
    double bound = kNaN;

    if (ctx.want("constants")) {
        ctx.guard("constants", [&] {
            const CGamma cg = compute_C_gamma(cert.theta());
            const Estimate delta = compute_delta(p.V, p.K);
            const BetaResult beta = compute_beta(*p.chain.kernel, cert.phi_fn(), p.K, p.beta);
            consts = constants_from(cg, delta, beta.beta);
            const double phi0 = cert.phi(0, p.x0);
            bound = theorem_bound(*consts, phi0);
            ctx.estimate("C", consts->C);
            ctx.estimate("gamma", consts->gamma);
            ctx.estimate("delta", consts->delta);
            ctx.estimate("beta", consts->beta);
            ctx.constant("phi0", phi0, 0.0, "exact");
            ctx.constant("bound", bound, 0.0, "C*beta + delta + gamma*phi0");
            ctx.check("constants_accepted", consts->accepted(), bound, 0.0, "C, gamma, delta, beta finite and valid");
            check_expectations(ctx, p.expect,
                               {{"C", consts->C.value},
                                {"gamma", consts->gamma.value},
                                {"delta", consts->delta.value},
                                {"beta", consts->beta.value},
                                {"phi0", phi0},
                                {"bound", bound}});
        });
    }

    if (ctx.want("exact_verify")) {
        ctx.guard("exact_verify", [&] {
            const auto r = verify_supermartingale_exact(*p.chain.kernel, cert, p.verify_T, p.domain);
            ctx.check("exact_verify", r.ok && r.envelope_ok, r.worst_slack, 0.0,
                      std::to_string(r.checked) + " (t, x) pairs, " + std::to_string(r.violations) +
                          " violations, worst envelope gap " + fmt(r.worst_envelope_gap) + "; " + r.coverage);
            ctx.artifact("exact_slack.csv", [&](std::ostream& os) {
                os << "state,t,slack\n";
                os.precision(17);
                for (const auto& s : r.per_state) os << p.chain.kernel->label(s.x) << ',' << s.t << ',' << s.slack << '\n';
            });
        });
    }

    std::optional<TrajectoryBatch> batch;
    if (ctx.want("simulate")) {
        ctx.guard("simulate", [&] {
            batch = simulate_batch(*p.chain.kernel, p.x0, p.horizon, p.paths, seed);
            ctx.artifact("trajectories.csv", [&](std::ostream& os) {
                write_trajectories_csv(os, *batch, p.chain.kernel.get(), p.export_paths);
            });
        });
    }

    if (ctx.want("mc_verify") && batch) {
        ctx.guard("mc_verify", [&] {
            const auto r = verify_supermartingale_mc(*batch, cert, p.confidence, p.min_surviving);
            ctx.check("mc_verify", r.ok, static_cast<double>(r.rejections), 0.0,
                      "one-sided z-tests at " + fmt(r.confidence) + ", " + std::to_string(r.skipped) +
                          " time points skipped, first rejection " + std::to_string(r.first_rejection));
            ctx.check("first_step_bound", r.first_bound_ok, r.first_bound_worst_margin, 0.0,
                      "worst margin (SE units) at s=" + std::to_string(r.first_bound_worst_s));
            ctx.artifact("mc_increments.csv", [&](std::ostream& os) {
                os << "t,mean,se,surviving,tested,z,rejected\n";
                os.precision(17);
                for (const auto& pt : r.points) {
                    os << pt.t << ',' << pt.increment.mean << ',' << pt.increment.se << ',' << pt.surviving << ','
                       << pt.tested << ',' << pt.z << ',' << pt.rejected << '\n';
                }
            });
        });
    }

    if (ctx.want("bound_check") && batch && consts) {
        ctx.guard("bound_check", [&] {
            const auto r = empirical_bound_check(*batch, p.V, bound);
            const bool ok = r.ok && r.margin_se >= p.required_margin_se;
            ctx.check("bound_check", ok, r.margin_se, r.means.per_time[static_cast<std::size_t>(r.sup_t)].se,
                      "sup_t mean V = " + fmt(r.sup_mean) + " at t=" + std::to_string(r.sup_t) + ", bound " +
                          fmt(bound) + ", required margin " + fmt(p.required_margin_se) + " SE");
            ctx.constant("sup_mean_V", r.sup_mean, 0.0, "monte_carlo");
            ctx.artifact("mean_V.csv", [&](std::ostream& os) {
                write_stat_csv(os, "t,mean,se,bound", r.means, [&](Time) { return bound; });
            });
        });
    }
    (void)cfg;
}

// -----------------------------------------------------------------------------
// hybrid-sim
// -----------------------------------------------------------------------------

struct HybridPlan {
    KernelSpec inside;
    KernelSpec outside;
    Region K;
    StateFn V;
    std::optional<Certificate> cert;
    State x0;
    Time horizon = 0;
    std::size_t paths = 0;
    std::vector<State> domain;
    Time verify_T = 0;
    State markov_at;
    int period = 2;
    double markov_confidence = 0.99;
    double required_margin_se = 0.0;
    Expectation expect;
    std::size_t export_paths = 50;
};

HybridPlan parse_hybrid(const ScenarioConfig& cfg, const Overrides& ov) {
    (void)cfg;
    HybridPlan p;
    Node root = root_node(cfg);
    p.inside = build_kernel(root.child("inside"));
    p.outside = build_kernel(root.child("outside"));
    if (p.inside.kernel->space() != p.outside.kernel->space()) {
        throw ValidationError("outside", "must live on the same space as inside");
    }
    if (!p.inside.kernel->homogeneous()) throw ValidationError("inside", "must be time-homogeneous");
    p.K = build_region(root.child("K"), &p.inside);
    p.V = build_V(root.child("V"), &p.inside);
    p.cert = build_certificate(root.child("certificate"), p.V, p.K);
    p.x0 = build_state(root.at("x0"), "x0", p.inside);
    p.horizon = ov.horizon.value_or(root.integer("horizon"));
    if (p.horizon < 1) throw ValidationError("horizon", "must be >= 1");
    p.paths = ov.paths.value_or(root.count("paths"));
    p.verify_T = p.horizon;
    if (auto v = root.child_opt("verify")) {
        p.domain = build_domain(*v, p.outside);
        p.verify_T = v->integer_or("horizon", p.horizon);
        v->finish();
    }
    if (p.domain.empty() && !p.outside.finite) {
        throw ValidationError("verify", "an explicit state range is required on infinite spaces");
    }
    Node m = root.child("markov_test");
    p.markov_at = build_state(m.at("at"), m.key_path("at"), p.inside);
    p.period = static_cast<int>(m.integer_or("period", 2));
    if (p.period < 2) throw ValidationError(m.key_path("period"), "must be >= 2");
    p.markov_confidence = m.number_or("confidence", 0.99);
    m.finish();
    p.required_margin_se = root.number_or("required_margin_se", 0.0);
    p.expect = parse_expect(root);
    p.export_paths = root.count_or("export_paths", p.export_paths);
    root.finish();
    return p;
}

void run_hybrid(const HybridPlan& p, Ctx& ctx, std::uint64_t seed) {
    const Certificate& cert = *p.cert;
    std::optional<CertificateConstants> consts;
    double bound = kNaN;
    if (ctx.want("constants")) {
        ctx.guard("constants", [&] {
            const CGamma cg = compute_C_gamma(cert.theta());
            const Estimate delta = compute_delta(p.V, p.K);
            const BetaResult beta = compute_beta(*p.inside.kernel, cert.phi_fn(), p.K);
            consts = constants_from(cg, delta, beta.beta);
            const double phi0 = cert.phi(0, p.x0);
            bound = theorem_bound(*consts, phi0);
            ctx.estimate("C", consts->C);
            ctx.estimate("gamma", consts->gamma);
            ctx.estimate("delta", consts->delta);
            ctx.estimate("beta", consts->beta);
            ctx.constant("phi0", phi0, 0.0, "exact");
            ctx.constant("bound", bound, 0.0, "C*beta + delta + gamma*phi0, beta under the inside chain");
            ctx.check("constants_accepted", consts->accepted(), bound, 0.0, "C, gamma, delta, beta finite and valid");
            check_expectations(ctx, p.expect,
                               {{"C", consts->C.value},
                                {"gamma", consts->gamma.value},
                                {"delta", consts->delta.value},
                                {"beta", consts->beta.value},
                                {"phi0", phi0},
                                {"bound", bound}});
        });
    }
    if (ctx.want("exact_verify")) {
        ctx.guard("exact_verify", [&] {
            const auto r = verify_supermartingale_exact(*p.outside.kernel, cert, p.verify_T, p.domain);
            ctx.check("exact_verify", r.ok && r.envelope_ok, r.worst_slack, 0.0,
                      "outside chain, " + std::to_string(r.checked) + " (t, x) pairs, " +
                          std::to_string(r.violations) + " violations");
        });
    }
    std::optional<TrajectoryBatch> batch;
    if (ctx.want("simulate")) {
        ctx.guard("simulate", [&] {
            HybridSpec spec{p.inside.kernel, p.outside.kernel, p.K};
            batch = simulate_hybrid(spec, p.x0, p.horizon, p.paths, seed);
            ctx.artifact("trajectories.csv", [&](std::ostream& os) {
                write_trajectories_csv(os, *batch, p.inside.kernel.get(), p.export_paths);
            });
        });
    }
    if (ctx.want("bound_check") && batch && consts) {
        ctx.guard("bound_check", [&] {
            const auto r = empirical_bound_check(*batch, p.V, bound);
            const bool ok = r.ok && r.margin_se >= p.required_margin_se;
            ctx.check("bound_check", ok, r.margin_se, r.means.per_time[static_cast<std::size_t>(r.sup_t)].se,
                      "sup_t mean V = " + fmt(r.sup_mean) + " at t=" + std::to_string(r.sup_t) + ", bound " +
                          fmt(bound));
            ctx.constant("sup_mean_V", r.sup_mean, 0.0, "monte_carlo");
            ctx.artifact("mean_V.csv", [&](std::ostream& os) {
                write_stat_csv(os, "t,mean,se,bound", r.means, [&](Time) { return bound; });
            });
        });
    }
    if (ctx.want("markov_test") && batch) {
        ctx.guard("markov_test", [&] {
            const auto r = markov_failure_by_clock(*batch, p.K, p.markov_at, p.period, p.markov_confidence);
            ctx.check("markov_test", r.markov_rejected, r.statistic, 0.0,
                      "chi-square " + fmt(r.statistic) + " vs critical " + fmt(r.critical) + " (dof " +
                          fmt(r.dof) + ", " + std::to_string(r.occurrences) + " visits); Markov property " +
                          (r.markov_rejected ? "rejected" : "not rejected"));
        });
    }
    if (ctx.want("excursions") && batch) {
        ctx.guard("excursions", [&] {
            std::vector<ExcursionRecord> recs;
            const std::size_t n = std::min(p.export_paths, batch->size());
            std::size_t covered = 0;
            for (std::size_t j = 0; j < n; ++j) {
                recs.push_back(excursion_decompose(batch->paths[j], p.K));
                // visits to K are exactly the union of [tau_i, sigma_i)
                const auto& path = batch->paths[j];
                bool consistent = true;
                for (std::size_t t = 0; t < path.states.size(); ++t) {
                    bool in_interval = false;
                    for (std::size_t i = 0; i < recs.back().tau.size(); ++i) {
                        const auto T = static_cast<Time>(t);
                        if (recs.back().tau[i] <= T &&
                            (!recs.back().sigma[i].is_finite() || T < recs.back().sigma[i].value)) {
                            in_interval = true;
                        }
                    }
                    if (in_interval != p.K.contains(path.states[t])) consistent = false;
                }
                if (consistent) ++covered;
            }
            ctx.check("excursions", covered == n, static_cast<double>(covered), 0.0,
                      "paths whose entry/exit intervals match membership in K");
            ctx.artifact("excursions.csv", [&](std::ostream& os) { write_excursions_csv(os, recs); });
            ctx.artifact("gh.csv", [&](std::ostream& os) { write_gh_csv(os, recs); });
        });
    }
}

// -----------------------------------------------------------------------------
// value-iterate
// -----------------------------------------------------------------------------

struct StoppingPlanItem {
    StoppingInstance inst;
    std::map<std::int64_t, Vec> expect;
    double tolerance = 0.0;
    bool compare_exponential = false;
};

std::vector<StoppingPlanItem> parse_stopping(const ScenarioConfig& cfg) {
    Node root = root_node(cfg);
    std::vector<StoppingPlanItem> out;
    std::set<std::string> names;
    for (const auto& n : root.children("instances")) {
        StoppingPlanItem item;
        item.inst.name = n.string("name");
        if (!names.insert(item.inst.name).second) throw ValidationError(n.key_path("name"), "duplicate instance name");
        const KernelSpec k = build_kernel(n.child("chain"));
        if (!k.finite) throw ValidationError(n.key_path("chain"), "value iteration needs a finite chain");
        item.inst.kernel = k.finite;
        const Region K = build_region(n.child("K"), &k);
        item.inst.reward = Reward{build_V(n.child("V"), &k), build_theta(n.child("theta")), K};
        item.inst.N = n.integer("N");
        if (item.inst.N < 0) throw ValidationError(n.key_path("N"), "must be >= 0");
        if (auto e = n.child_opt("expect")) {
            for (auto it = e->json().begin(); it != e->json().end(); ++it) {
                const State s = build_state(Json(it.key()), e->key_path(it.key()), k);
                Vec v = e->vector(it.key());
                if (v.size() != static_cast<std::size_t>(item.inst.N) + 1) {
                    throw ValidationError(e->key_path(it.key()), "needs N + 1 values");
                }
                item.expect[s.site] = std::move(v);
            }
            e->finish();
        }
        item.tolerance = n.number_or("tolerance", 0.0);
        item.compare_exponential = n.boolean_or("compare_exponential", false);
        n.finish();
        out.push_back(std::move(item));
    }
    if (out.empty()) throw ValidationError("instances", "needs at least one instance");
    root.finish();
    return out;
}

void run_stopping(const std::vector<StoppingPlanItem>& items, Ctx& ctx) {
    for (const auto& item : items) {
        const auto& inst = item.inst;
        const std::string pre = inst.name + ".";
        if (!ctx.want("value_iterate")) break;
        ctx.guard(pre + "value_iterate", [&] {
            const ValueTable table = value_iterate(*inst.kernel, inst.reward, inst.N);
            ctx.artifact("table_" + inst.name + ".csv", [&](std::ostream& os) { write_table_csv(os, table, inst.kernel.get()); });
            const auto env = check_envelope(table, inst.reward);
            ctx.check(pre + "envelope", env.ok, env.worst, 0.0, "min of phi - h");
            const auto one = check_one_step(table, *inst.kernel, inst.reward.K);
            ctx.check(pre + "one_step", one.ok, one.worst, 0.0, "min of phi - P phi off K");
            const auto zero = check_zero_on_K(table, inst.reward.K);
            ctx.check(pre + "zero_on_K", zero.ok, zero.worst, 0.0, "phi vanishes on K");
            for (const auto& [site, values] : item.expect) {
                double worst = 0.0;
                for (std::size_t n = 0; n < values.size(); ++n) {
                    worst = std::max(worst, std::abs(table.phi[n][static_cast<std::size_t>(site)] - values[n]));
                }
                ctx.check(pre + "expect." + inst.kernel->labels()[static_cast<std::size_t>(site)],
                          worst <= item.tolerance, worst, 0.0, "max abs deviation from the expected row");
            }
            if (inst.N > 0) {
                const Certificate cert = table_to_certificate(table, inst.reward);
                const auto r = verify_supermartingale_exact(*inst.kernel, cert, inst.N);
                ctx.check(pre + "certificate_verify", r.ok, r.worst_slack, 0.0,
                          "table certificate, exact check for t < N");
            }
            ctx.constant(pre + "phi(0,x0 max)", *std::max_element(table.phi.front().begin(), table.phi.front().end()),
                         0.0, "exact");
            if (ctx.want("minimality") && item.compare_exponential) {
                const Reward rw = inst.reward;
                const PhiFn psi = [rw](Time n, const State& x) {
                    return rw.K.contains(x) ? 0.0 : rw.V(x) * rw.theta.inverse(n);
                };
                const auto m = minimality_check(table, psi, *inst.kernel, inst.reward);
                ctx.check(pre + "minimality", m.candidate_valid && m.dominates, m.worst, 0.0,
                          "exponential certificate dominates the table" + (m.reason.empty() ? "" : ": " + m.reason));
            }
        });
    }
}

// -----------------------------------------------------------------------------
// switched
// -----------------------------------------------------------------------------

LogRadialGrid parse_grid(const Node& root) {
    LogRadialGrid g;
    if (auto n = root.child_opt("grid")) {
        g.r_min = n->number_or("r_min", g.r_min);
        g.r_max = n->number_or("r_max", g.r_max);
        g.radii = static_cast<int>(n->integer_or("radii", g.radii));
        g.directions = static_cast<int>(n->integer_or("directions", g.directions));
        if (!(g.r_min > 0.0 && g.r_max > g.r_min) || g.radii < 1 || g.directions < 1) {
            throw ValidationError(n->path(), "needs 0 < r_min < r_max and positive counts");
        }
        n->finish();
    }
    return g;
}

struct CounterexamplePlan {
    SwitchedSystem sys;
    LyapunovFamily lyap;
    double alpha_star = 0.0;
    Vec x0;
    Time horizon = 0;
    std::size_t paths = 0;
};

struct SwitchedPlan {
    SwitchingChain chain{Matrix::identity(1)};
    std::optional<SwitchedSystem> sys;
    std::optional<LyapunovFamily> lyap;
    Vec x0;
    Time horizon = 0;
    std::size_t paths = 0;
    std::vector<std::string> checks;
    Time law_s = 0;
    Time law_t = 0;
    std::size_t law_paths = 0;
    std::optional<double> alpha_star;
    DiagnosticsOptions diag;
    FinitizationOptions finite;
    LogRadialGrid grid;
    std::optional<CounterexamplePlan> counter;
    std::size_t export_paths = 50;
};

const std::set<std::string> kSwitchedChecks = {"switch_law", "S1", "S2", "lyapunov", "pathwise", "diagnostics",
                                               "counterexample"};

SwitchedPlan parse_switched(const ScenarioConfig& cfg, const Overrides& ov) {
    SwitchedPlan p;
    Node root = root_node(cfg);
    p.checks = root.strings("checks");
    for (std::size_t i = 0; i < p.checks.size(); ++i) {
        if (!kSwitchedChecks.count(p.checks[i])) {
            throw ValidationError("checks[" + std::to_string(i) + "]",
                                  "unknown check '" + p.checks[i] +
                                      "'; valid checks: switch_law, S1, S2, lyapunov, pathwise, diagnostics, counterexample");
        }
    }
    auto listed = [&](const std::string& c) { return std::find(p.checks.begin(), p.checks.end(), c) != p.checks.end(); };
    if (root.has("maps")) {
        p.sys = build_switched_system(root);
        p.chain = p.sys->chain;
    } else {
        p.chain = build_chain(root.child("chain"));
    }
    if (auto l = root.child_opt("lyapunov")) {
        p.lyap = build_lyapunov(*l);
        if (p.lyap->modes() != p.chain.modes()) throw ValidationError("lyapunov.weights", "needs one weight per mode");
    }
    const bool needs_sim = listed("pathwise") || listed("diagnostics");
    if (needs_sim || listed("lyapunov")) {
        if (!p.sys) throw ValidationError("maps", "required by the selected checks");
        if (!p.lyap) throw ValidationError("lyapunov", "required by the selected checks");
    }
    if ((listed("S1") || listed("pathwise")) && !(p.lyap && p.lyap->lambda0)) {
        throw ValidationError("lyapunov.lambda0", "required by the selected checks");
    }
    if (listed("S2") && !(p.lyap && p.lyap->Lambda)) throw ValidationError("lyapunov.Lambda", "required by S2");
    if (p.sys) {
        p.x0 = root.vector("x0");
        if (p.x0.size() != p.sys->dim()) throw ValidationError("x0", "dimension must match the maps");
        p.horizon = ov.horizon.value_or(root.integer("horizon"));
        if (p.horizon < 1) throw ValidationError("horizon", "must be >= 1");
        p.paths = ov.paths.value_or(root.count("paths"));
        p.finite.horizon = p.horizon;
        p.finite.paths = std::min(p.paths, p.finite.paths);
    }
    if (auto s = root.child_opt("switch_law")) {
        p.law_s = s->integer("s");
        p.law_t = s->integer("t");
        if (p.law_s < 0 || p.law_t <= p.law_s) throw ValidationError(s->key_path("t"), "needs 0 <= s < t");
        p.law_paths = ov.paths.value_or(s->count("paths"));
        s->finish();
    } else if (listed("switch_law")) {
        throw ValidationError("switch_law", "required by the selected checks");
    }
    if (auto d = root.child_opt("diagnostics")) {
        p.alpha_star = d->number_opt("alpha_star");
        p.diag.decay_target = d->number_or("decay_target", p.diag.decay_target);
        p.diag.as_threshold = d->number_or("as_threshold", p.diag.as_threshold);
        p.diag.check_envelope = d->boolean_or("check_envelope", p.diag.check_envelope);
        if (auto f = d->child_opt("finitization")) {
            if (f->has("eps")) p.finite.eps = f->vector("eps");
            if (f->has("radii")) p.finite.radii = f->vector("radii");
            for (double e : p.finite.eps) {
                if (!(e > 0.0)) throw ValidationError(f->key_path("eps"), "entries must be > 0");
            }
            for (double r : p.finite.radii) {
                if (!(r > 0.0)) throw ValidationError(f->key_path("radii"), "entries must be > 0");
            }
            if (f->has("direction")) p.finite.direction = f->vector("direction");
            p.finite.paths = f->count_or("paths", p.finite.paths);
            f->finish();
        }
        d->finish();
    }
    if (listed("diagnostics") && !p.alpha_star && !(p.lyap && p.lyap->lambda0)) {
        throw ValidationError("diagnostics.alpha_star", "required when lambda0 is not given");
    }
    p.grid = parse_grid(root);
    if (auto c = root.child_opt("counterexample")) {
        CounterexamplePlan cp{build_switched_system(*c), build_lyapunov(c->child("lyapunov")), c->number("alpha_star"),
                              {}, 0, 0};
        cp.x0 = c->has("x0") ? c->vector("x0") : p.x0;
        if (cp.x0.size() != cp.sys.dim()) throw ValidationError(c->key_path("x0"), "dimension must match the maps");
        cp.horizon = c->integer_or("horizon", p.horizon);
        cp.paths = c->count_or("paths", p.paths ? p.paths : 100);
        if (cp.horizon < 1) throw ValidationError(c->key_path("horizon"), "must be >= 1");
        c->finish();
        p.counter = std::move(cp);
    } else if (listed("counterexample")) {
        throw ValidationError("counterexample", "required by the selected checks");
    }
    p.export_paths = root.count_or("export_paths", p.export_paths);
    root.finish();
    return p;
}

void write_switched_trajectories(Ctx& ctx, const SwitchedBatch& sb, std::size_t max_paths) {
    ctx.artifact("trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, sb.batch, nullptr, max_paths); });
}

void run_switched(const SwitchedPlan& p, Ctx& ctx, std::uint64_t seed) {
    auto listed = [&](const std::string& c) { return std::find(p.checks.begin(), p.checks.end(), c) != p.checks.end(); };
    auto active = [&](const std::string& c) { return listed(c) && ctx.want(c); };

    std::optional<ConditionResult> s1, s2;
    if (p.lyap && p.lyap->lambda0 && (active("S1") || active("diagnostics") || active("pathwise"))) {
        ctx.guard("S1", [&] {
            s1 = check_S1(*p.lyap->lambda0, p.lyap->mu, p.chain);
            ctx.constant("p_hat", s1->p_hat, 0.0, "exact");
            ctx.constant("p_tilde", s1->p_tilde, 0.0, "exact");
            ctx.constant("S1_value", s1->value, 0.0, "lambda0 (p_hat + mu p_tilde)");
            ctx.constant("alpha_star", s1->alpha_star, 0.0, "-ln(value) / 2");
            if (active("S1")) ctx.check("S1", s1->ok, s1->value, 0.0, "condition value must be < 1");
        });
    }
    if (active("S2")) {
        ctx.guard("S2", [&] {
            s2 = check_S2(*p.lyap->Lambda, p.lyap->mu, p.chain);
            ctx.constant("S2_value", s2->value, 0.0, "mu max_i sum_j p_ij lambda_ji");
            ctx.constant("S2_alpha_star", s2->alpha_star, 0.0, "-ln(value) / 2");
            ctx.check("S2", s2->ok, s2->value, 0.0, "condition value must be < 1");
        });
    }
    if (active("switch_law")) {
        ctx.guard("switch_law", [&] {
            const auto modes = simulate_modes(p.chain, p.law_t, p.law_paths, child_seed(seed, 0x5717));
            const auto law = empirical_switch_law(modes, p.law_s, p.law_t);
            const Time len = p.law_t - p.law_s;
            double worst = kInf;
            std::int64_t worst_k = 0;
            bool ok = true;
            for (std::int64_t k = 0; k <= len; ++k) {
                const double b = switching_count_bound(p.chain, p.law_s, p.law_t, k);
                const auto& e = law[static_cast<std::size_t>(k)];
                const double slack = b + 3.0 * e.se - e.mean;
                if (slack < worst) {
                    worst = slack;
                    worst_k = k;
                }
                if (slack < 0.0) ok = false;
            }
            std::size_t beyond = 0;  // switches in (s, t] counted directly
            for (const auto& m : modes) {
                std::int64_t n = 0;
                for (Time t = p.law_s + 1; t <= p.law_t; ++t) n += m[static_cast<std::size_t>(t)] != m[static_cast<std::size_t>(t - 1)];
                if (n > len) ++beyond;
            }
            ctx.check("switch_law", ok, worst, 0.0,
                      "min over k of bound + 3 SE - empirical, at k=" + std::to_string(worst_k));
            ctx.check("switch_law_support", beyond == 0, static_cast<double>(beyond), 0.0,
                      "paths with more than t - s switches");
            ctx.artifact("switch_law.csv", [&](std::ostream& os) {
                os << "k,empirical,se,bound\n";
                os.precision(17);
                for (std::int64_t k = 0; k <= len + 2; ++k) {
                    const bool in = k <= len;
                    os << k << ',' << (in ? law[static_cast<std::size_t>(k)].mean : 0.0) << ','
                       << (in ? law[static_cast<std::size_t>(k)].se : 0.0) << ','
                       << switching_count_bound(p.chain, p.law_s, p.law_t, k) << '\n';
                }
            });
        });
    }
    if (active("lyapunov")) {
        ctx.guard("lyapunov", [&] {
            const auto r = verify_lyapunov_family(*p.lyap, *p.sys, p.grid);
            for (const auto& item : r.items) {
                if (!item.applicable) continue;
                ctx.check("lyapunov." + item.name, item.ok, item.worst, 0.0,
                          std::to_string(item.checked) + " grid evaluations");
            }
        });
    }
    const bool need_sim = p.sys && (active("pathwise") || active("diagnostics") || ctx.want("simulate"));
    std::optional<SwitchedBatch> sb;
    if (need_sim) {
        ctx.guard("simulate", [&] {
            sb = simulate_switched(*p.sys, p.x0, p.horizon, p.paths, seed);
            write_switched_trajectories(ctx, *sb, p.export_paths);
        });
    }
    if (active("pathwise") && sb) {
        ctx.guard("pathwise", [&] {
            const auto r = pathwise_inequality_check(*sb, *p.lyap, *p.sys, p.grid);
            ctx.check("pathwise", r.ok && r.precondition_ok, static_cast<double>(r.worst_log_ratio), 0.0,
                      std::to_string(r.violations.size()) + " violations over " + std::to_string(r.checked) +
                          " (path, t) pairs; max log(lhs/rhs); " + r.precondition);
            ctx.artifact("pathwise_violations.csv", [&](std::ostream& os) {
                os << "path_id,t,log_excess\n";
                os.precision(17);
                for (const auto& v : r.violations) os << v.path << ',' << v.t << ',' << static_cast<double>(v.log_excess) << '\n';
            });
        });
    }
    if (active("diagnostics") && sb) {
        ctx.guard("diagnostics", [&] {
            double alpha = p.alpha_star.value_or(s1 ? s1->alpha_star : 0.0);
            const auto d = stability_diagnostics(*sb, *p.lyap, *p.sys, alpha, p.diag);
            ctx.check("diagnostics.discounted", d.discounted_ok && d.discounted_monotone, d.discounted_ratio, 0.0,
                      std::string("final/initial mean of e^{alpha t} V; monotone ") +
                          (d.discounted_monotone ? "yes" : "no") + ", target " + fmt(p.diag.decay_target));
            ctx.check("diagnostics.as", d.as_ok, static_cast<double>(d.max_log_final_ratio), 0.0,
                      "max log(|X_T| / |x0|), threshold log " + fmt(p.diag.as_threshold));
            if (p.diag.check_envelope) {
                ctx.check("diagnostics.envelope", d.envelope_ok, static_cast<double>(d.envelope_violations), 0.0,
                          "paths above mu^N lambda0^T |x0|");
            }
            ctx.check("diagnostics.l1", d.l1_ok, d.l1_margin_se, 0.0,
                      "sup mean alpha1 = " + fmt(d.l1_sup_mean) + ", bound " + fmt(d.l1_bound));
            ctx.check("diagnostics.not_divergent", !d.divergent, d.divergent ? 1.0 : 0.0, 0.0, "divergence flag");
            const auto fp = fixed_point_search(*p.sys, p.grid);
            const double fp_min = *std::min_element(fp.min_ratio.begin(), fp.min_ratio.end());
            const bool fp_exact = std::all_of(fp.exact.begin(), fp.exact.end(), [](bool e) { return e; });
            ctx.check("diagnostics.fixed_points", fp.ok, fp_min, 0.0,
                      std::string("min |f_i(x) - x| / |x| over maps, ") +
                          (fp_exact ? "exact for linear maps" : "grid evidence for nonlinear maps"));
            const auto fin = finite_stability_checks(*p.sys, *p.lyap, alpha, p.finite, child_seed(seed, 0xF1A7));
            std::size_t applicable = 0, failed = 0;
            for (const auto& c : fin.cases) {
                applicable += c.applicable;
                failed += c.applicable && !c.ok;
            }
            ctx.check("diagnostics.finitization", fin.ok() && applicable > 0, static_cast<double>(failed), 0.0,
                      std::to_string(applicable) + " of " + std::to_string(fin.cases.size()) +
                          " SM1/SM2/AS1 instances applicable, " + std::to_string(failed) + " failed");
            ctx.artifact("finitization.csv", [&](std::ostream& os) {
                os << "item,eps,r,delta,T,value,se,applicable,ok\n";
                os.precision(17);
                for (const auto& c : fin.cases) {
                    os << c.item << ',' << c.eps << ',' << c.r << ',' << c.delta << ',' << c.T << ',' << c.value << ','
                       << c.se << ',' << c.applicable << ',' << c.ok << '\n';
                }
            });
            ctx.constant("diagnostics_alpha_star", alpha, 0.0, "used for discounting");
            ctx.artifact("discounted.csv", [&](std::ostream& os) { write_stat_csv(os, "t,mean,se", d.discounted); });
            ctx.artifact("alpha1_mean.csv", [&](std::ostream& os) {
                write_stat_csv(os, "t,mean,se,bound", d.alpha1_mean, [&](Time) { return d.l1_bound; });
            });
        });
    }
    if (active("counterexample")) {
        ctx.guard("counterexample", [&] {
            const auto& c = *p.counter;
            const auto csb = simulate_switched(c.sys, c.x0, c.horizon, c.paths, child_seed(seed, 0xC0DE));
            const auto d = stability_diagnostics(csb, c.lyap, c.sys, c.alpha_star, p.diag);
            ctx.check("counterexample", d.divergent && !d.ok(), d.discounted_ratio, 0.0,
                      std::string("expanding system must be flagged divergent; divergent ") +
                          (d.divergent ? "yes" : "no") + ", diagnostics " + (d.ok() ? "pass" : "fail"));
        });
    }
}

// -----------------------------------------------------------------------------
// iss
// -----------------------------------------------------------------------------

struct IssPlan {
    std::optional<DisturbedSystem> sys;
    Vec x0;
    Time horizon = 0;
    std::size_t paths = 0;
    double alpha_star = 0.0;
    bool zero_reduction = false;
    LogRadialGrid grid;
    std::size_t export_paths = 50;
};

DisturbanceSignal build_disturbance(const Node& n, std::size_t dim, const std::string& base_dir) {
    const std::string type = n.string("type");
    std::optional<DisturbanceSignal> d;
    if (type == "zero") {
        d = DisturbanceSignal::zero(dim);
    } else if (type == "constant") {
        d = DisturbanceSignal::constant(n.vector("value"));
    } else if (type == "sinusoid") {
        d = DisturbanceSignal::sinusoid(n.number("amplitude"), n.number("period"), n.number_or("phase", 0.0), dim);
    } else if (type == "bang_bang") {
        d = DisturbanceSignal::bang_bang(n.number("level"), n.integer_or("period", 1), dim);
    } else if (type == "csv") {
        fs::path file = n.string("file");
        if (file.is_relative() && !base_dir.empty()) file = fs::path(base_dir) / file;
        try {
            d = DisturbanceSignal::from_csv(file.string());
        } catch (const Error& e) {
            throw ValidationError(n.key_path("file"), e.what());
        }
    } else {
        throw ValidationError(n.key_path("type"),
                              "unknown type '" + type + "'; valid types: zero, constant, sinusoid, bang_bang, csv");
    }
    n.finish();
    if (d->dim() != dim) throw ValidationError(n.path(), "dimension must match the maps");
    return *d;
}

IssPlan parse_iss(const ScenarioConfig& cfg, const Overrides& ov) {
    IssPlan p;
    Node root = root_node(cfg);
    SwitchedSystem sys = build_switched_system(root);
    LyapunovFamily lyap = build_lyapunov(root.child("lyapunov"));
    if (!lyap.Lambda) throw ValidationError("lyapunov.Lambda", "required for ISS");
    if (lyap.modes() != sys.chain.modes()) throw ValidationError("lyapunov.weights", "needs one weight per mode");
    const std::string base = cfg.source.empty() ? std::string() : fs::path(cfg.source).parent_path().string();
    DisturbanceSignal w = build_disturbance(root.child("disturbance"), sys.dim(), base);
    const double w_max = root.number("w_max");
    if (w_max < 0.0) throw ValidationError("w_max", "must be >= 0");
    const ClassK rho = build_class_k(root.child("rho"));
    p.sys = DisturbedSystem{std::move(sys), std::move(w), w_max, std::move(lyap), rho};
    try {
        p.sys->validate();
    } catch (const ValidationError& e) {
        throw ValidationError("maps", e.what());
    }
    p.x0 = root.vector("x0");
    if (p.x0.size() != p.sys->system.dim()) throw ValidationError("x0", "dimension must match the maps");
    p.horizon = ov.horizon.value_or(root.integer("horizon"));
    if (p.horizon < 1) throw ValidationError("horizon", "must be >= 1");
    p.paths = ov.paths.value_or(root.count("paths"));
    p.alpha_star = root.number_or("alpha_star", 0.0);
    p.zero_reduction = root.boolean_or("zero_reduction", false);
    p.grid = parse_grid(root);
    p.export_paths = root.count_or("export_paths", p.export_paths);
    root.finish();
    return p;
}

bool same_summary(const StatSummary& a, const StatSummary& b) {
    if (a.per_time.size() != b.per_time.size()) return false;
    for (std::size_t t = 0; t < a.per_time.size(); ++t) {
        if (a.per_time[t].mean != b.per_time[t].mean || a.per_time[t].se != b.per_time[t].se) return false;
    }
    return true;
}

bool same_diagnostics(const DiagnosticsReport& a, const DiagnosticsReport& b) {
    return a.discounted_ok == b.discounted_ok && a.discounted_monotone == b.discounted_monotone &&
           same_summary(a.discounted, b.discounted) && a.discounted_ratio == b.discounted_ratio && a.as_ok == b.as_ok &&
           a.max_log_final_ratio == b.max_log_final_ratio && a.envelope_ok == b.envelope_ok &&
           a.envelope_violations == b.envelope_violations && a.l1_ok == b.l1_ok &&
           same_summary(a.alpha1_mean, b.alpha1_mean) && a.l1_bound == b.l1_bound && a.l1_sup_mean == b.l1_sup_mean &&
           a.divergent == b.divergent;
}

void run_iss(const IssPlan& p, Ctx& ctx, std::uint64_t seed) {
    const DisturbedSystem& sys = *p.sys;
    if (ctx.want("simulate")) {
        ctx.guard("simulate", [&] {
            const DisturbanceFn w = [&sys](Time t) { return sys.disturbance.at(t); };
            const auto sb = simulate_switched(sys.system, p.x0, p.horizon, std::min(p.paths, p.export_paths), seed, &w);
            write_switched_trajectories(ctx, sb, p.export_paths);
        });
    }
    if (ctx.want("lyapunov")) {
        ctx.guard("lyapunov", [&] {
            const auto r = verify_iss_family(sys, p.grid);
            for (const auto* item : {&r.bounds, &r.comparable, &r.decrease}) {
                ctx.check("lyapunov." + item->name, item->ok, item->worst, 0.0,
                          std::to_string(item->checked) + " grid evaluations");
            }
        });
    }
    if (ctx.want("envelope")) {
        ctx.guard("envelope", [&] {
            const auto r = iss_check(sys, p.x0, p.horizon, p.paths, seed, p.alpha_star);
            if (!r.precondition_ok) {
                ctx.check("envelope", false, kNaN, 0.0, "precondition failed: " + r.precondition);
                return;
            }
            const auto& e = r.envelope;
            ctx.constant("S2_value", e.condition.value, 0.0, "mu max_i sum_j p_ij lambda_ji");
            ctx.constant("alpha_star", e.alpha_star, 0.0, "exact");
            ctx.constant("K_radius", e.K_radius, 0.0, "rho(w_max)");
            ctx.estimate("beta", e.beta);
            ctx.estimate("delta", e.delta);
            ctx.constant("transient0", e.transient0, 0.0, "alpha2(|x0|)");
            ctx.constant("offset", e.offset, 0.0, "beta / (1 - e^{-alpha*}) + delta");
            ctx.check("envelope", r.ok, r.worst_margin_se, 0.0,
                      "min over t of (envelope - mean alpha1) / SE, at t=" + std::to_string(r.worst_t));
            ctx.artifact("iss_envelope.csv", [&](std::ostream& os) {
                write_stat_csv(os, "t,mean,se,envelope", r.alpha1_mean, [&](Time t) { return e.at(t); });
            });
        });
    }
    if (ctx.want("zero_reduction") && p.zero_reduction) {
        ctx.guard("zero_reduction", [&] {
            DisturbedSystem quiet = sys;
            quiet.disturbance = DisturbanceSignal::zero(sys.system.dim());
            const auto r = iss_check(quiet, p.x0, p.horizon, p.paths, seed, p.alpha_star);
            if (!r.diagnostics) throw Error("zero-disturbance run produced no diagnostics");
            DiagnosticsOptions opt;
            opt.check_envelope = sys.lyap.lambda0.has_value();
            const auto sb = simulate_switched(sys.system, p.x0, p.horizon, p.paths, seed);
            const auto direct = stability_diagnostics(sb, sys.lyap, sys.system, r.envelope.alpha_star, opt);
            ctx.check("zero_reduction", same_diagnostics(*r.diagnostics, direct), r.diagnostics->discounted_ratio, 0.0,
                      "w = 0 ISS diagnostics coincide with the switched-system diagnostics on the same seed");
        });
    }
}

// -----------------------------------------------------------------------------
// diffusion
// -----------------------------------------------------------------------------

Payoff build_payoff(const Node& n) {
    const std::string type = n.string("type");
    std::optional<Payoff> f;
    if (type == "constant") {
        f = Payoff::constant(n.number("c"));
    } else if (type == "linear") {
        f = Payoff::linear(n.number_or("c", 1.0));
    } else if (type == "power") {
        f = Payoff::power(n.number_or("c", 1.0), n.number("p"));
    } else {
        throw ValidationError(n.key_path("type"), "unknown type '" + type + "'; valid types: constant, linear, power");
    }
    n.finish();
    return *f;
}

Drift build_drift(const Node& n) {
    const std::string type = n.string("type");
    std::optional<Drift> b;
    if (type == "linear") {
        b = Drift::linear(n.number("kappa"));
    } else if (type == "radial") {
        b = Drift::radial(n.number("c"));
    } else {
        throw ValidationError(n.key_path("type"), "unknown type '" + type + "'; valid types: linear, radial");
    }
    n.finish();
    return *b;
}

struct SectorPlan {
    std::string name;
    Drift drift;
    Region K;
    std::vector<Vec> grid;
    std::vector<double> times;
    bool expect_pass = true;
};

struct SampledPlan {
    DiffusionSpec spec;
    Payoff payoff;
    Vec x0;
    std::size_t paths = 0;
    double confidence = 0.99;
    std::size_t min_surviving = 100;
};

struct DiffusionPlan {
    std::optional<BesqSpec> besq;
    Payoff payoff;
    std::vector<double> shape_grid;
    double shape_t = 0.0;
    bool coupling = false;
    std::vector<SectorPlan> sectors;
    std::optional<SampledPlan> sampled;
    std::size_t export_paths = 20;
};

DiffusionPlan parse_diffusion(const ScenarioConfig& cfg, const Overrides& ov) {
    DiffusionPlan p;
    Node root = root_node(cfg);
    if (auto b = root.child_opt("besq")) {
        BesqSpec s;
        s.delta = b->number_or("delta", s.delta);
        s.y0 = b->number_or("y0", s.y0);
        s.S = b->number_or("S", s.S);
        s.dt = b->number_or("dt", s.dt);
        s.paths = ov.paths.value_or(b->count_or("paths", s.paths));
        b->finish();
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(e.field(), std::string(e.what()));
        }
        p.besq = s;
        p.payoff = root.has("payoff") ? build_payoff(root.child("payoff")) : Payoff::linear(1.0);
        if (auto sh = root.child_opt("shape")) {
            p.shape_grid = sh->vector("grid");
            for (std::size_t i = 0; i + 1 < p.shape_grid.size(); ++i) {
                if (!(p.shape_grid[i] < p.shape_grid[i + 1]) || p.shape_grid[i] < 0.0) {
                    throw ValidationError(sh->key_path("grid"), "must be nonnegative and strictly increasing");
                }
            }
            if (p.shape_grid.size() < 2) throw ValidationError(sh->key_path("grid"), "needs at least 2 points");
            p.shape_t = sh->number_or("t", 0.0);
            if (!(p.shape_t >= 0.0 && p.shape_t <= s.S)) throw ValidationError(sh->key_path("t"), "must lie in [0, S]");
            sh->finish();
        }
        p.coupling = root.boolean_or("coupling", false);
    }
    if (root.has("sector")) {
        for (const auto& n : root.children("sector")) {
            SectorPlan sp;
            sp.name = n.string("name");
            sp.drift = build_drift(n.child("drift"));
            const double kr = n.number("K_radius");
            sp.K = Region::ball(kr);
            const std::size_t dim = n.count_or("dim", 2);
            sp.grid = sector_grid(kr, n.number("r_outer"), static_cast<int>(n.integer_or("rings", 8)),
                                  static_cast<int>(n.integer_or("directions", 16)), dim);
            sp.times = n.has("times") ? n.vector("times") : std::vector<double>{0.0};
            const std::string e = n.string_or("expect", "pass");
            if (e != "pass" && e != "fail") throw ValidationError(n.key_path("expect"), "must be pass or fail");
            sp.expect_pass = e == "pass";
            n.finish();
            p.sectors.push_back(std::move(sp));
        }
    }
    if (auto c = root.child_opt("sampled_chain")) {
        SampledPlan sp;
        sp.spec.drift = build_drift(c->child("drift"));
        sp.spec.K = Region::ball(c->number("K_radius"));
        sp.spec.dim = c->count("dim");
        sp.spec.dt = c->number_or("dt", sp.spec.dt);
        sp.spec.horizon = ov.horizon.value_or(c->integer("horizon"));
        sp.spec.noise = c->boolean_or("noise", true);
        sp.spec.validate();
        sp.payoff = c->has("payoff") ? build_payoff(c->child("payoff")) : Payoff::linear(1.0);
        if (!sp.payoff.affine()) throw ValidationError(c->key_path("payoff"), "must be affine");
        sp.x0 = c->vector("x0");
        if (sp.x0.size() != sp.spec.dim) throw ValidationError(c->key_path("x0"), "dimension must equal dim");
        sp.paths = ov.paths.value_or(c->count("paths"));
        sp.confidence = c->number_or("confidence", sp.confidence);
        sp.min_surviving = c->count_or("min_surviving", sp.min_surviving);
        c->finish();
        p.sampled = std::move(sp);
    }
    p.export_paths = root.count_or("export_paths", p.export_paths);
    root.finish();
    if (!p.besq && p.sectors.empty() && !p.sampled) {
        throw ValidationError("besq", "a diffusion scenario needs besq, sector or sampled_chain");
    }
    return p;
}

void run_diffusion(const DiffusionPlan& p, Ctx& ctx, std::uint64_t seed) {
    if (p.besq) {
        const BesqSpec& s = *p.besq;
        if (ctx.want("besq_mean")) {
            ctx.guard("besq_mean", [&] {
                const auto r = besq_mean_check(s, seed);
                ctx.constant("besq_target", r.target, 0.0, "y0 + delta S");
                ctx.constant("besq_mean_dt", r.coarse.mean, r.coarse.se, "monte_carlo");
                ctx.constant("besq_mean_dt_half", r.fine.mean, r.fine.se, "monte_carlo");
                ctx.constant("besq_bias_budget", r.bias_budget, 0.0, "|mean(dt) - mean(dt/2)| + 3 SE of the pair");
                ctx.check("besq_mean", r.ok, r.deviation, r.coarse.se,
                          "|mean - target| <= 3 SE + " + fmt(r.bias_budget));
            });
        }
        if (ctx.want("besq_terminal")) {
            ctx.guard("besq_terminal", [&] {
                std::vector<double> ys = p.shape_grid;
                ys.push_back(s.y0);
                double worst = 0.0;
                for (double y : ys) {
                    const auto e = phi_estimate(s.S, y, p.payoff, s, seed);
                    worst = std::max({worst, std::abs(e.mean - p.payoff(y)), e.se});
                }
                ctx.check("besq_terminal", worst == 0.0, worst, 0.0, "phi(S, y) = F(y) exactly");
            });
        }
        if (ctx.want("besq_shape") && !p.shape_grid.empty()) {
            ctx.guard("besq_shape", [&] {
                const auto r = phi_shape_check(p.payoff, s, p.shape_grid, p.shape_t, child_seed(seed, 0x5A9E));
                ctx.check("besq_monotone", r.monotone, r.worst_monotone, 0.0, "min of paired increment + 3 SE");
                ctx.check("besq_convex", r.convex, r.worst_convex, 0.0, "min of midpoint gap + 3 SE");
                if (r.residual_available) {
                    ctx.constant("besq_max_abs_pde_residual", r.max_abs_residual, 0.0, r.note);
                }
                ctx.artifact("besq_phi.csv", [&](std::ostream& os) {
                    os << "y,phi,se,pde_residual\n";
                    os.precision(17);
                    for (std::size_t i = 0; i < r.ys.size(); ++i) {
                        os << r.ys[i] << ',' << r.phi[i].mean << ',' << r.phi[i].se << ',';
                        if (r.residual_available && i > 0 && i + 1 < r.ys.size()) os << r.pde_residual[i - 1];
                        os << '\n';
                    }
                });
            });
        }
        if (ctx.want("besq_coupling") && p.coupling && !p.shape_grid.empty()) {
            ctx.guard("besq_coupling", [&] {
                const auto r = besq_coupling_check(s, p.shape_grid, child_seed(seed, 0xC0C0));
                // the Euler scheme can reorder paths near 0, so this is reported rather than checked
                ctx.constant("besq_coupling_violation_rate",
                             r.pairs ? static_cast<double>(r.violations) / static_cast<double>(r.pairs) : 0.0, 0.0,
                             std::to_string(r.violations) + " of " + std::to_string(r.pairs) + " coupled pairs reordered");
            });
        }
        if (ctx.want("simulate")) {
            ctx.guard("simulate", [&] {
                const auto r = besq_simulate(s, seed);
                BesqSpec few = s;
                few.paths = std::min(s.paths, p.export_paths);
                const auto paths = besq_simulate(few, seed, true);
                ctx.artifact("besq_terminal.csv", [&](std::ostream& os) {
                    os << "path_id,y_S\n";
                    os.precision(17);
                    for (std::size_t j = 0; j < r.terminal.size(); ++j) os << j << ',' << r.terminal[j] << '\n';
                });
                ctx.artifact("besq_paths.csv", [&](std::ostream& os) {
                    os << "path_id,step,t,y\n";
                    os.precision(17);
                    for (std::size_t j = 0; j < paths.paths.size(); ++j) {
                        for (std::size_t k = 0; k < paths.paths[j].size(); ++k) {
                            os << j << ',' << k << ',' << static_cast<double>(k) * s.dt << ',' << paths.paths[j][k] << '\n';
                        }
                    }
                });
            });
        }
    }
    if (ctx.want("sector")) {
        for (const auto& sp : p.sectors) {
            ctx.guard("sector." + sp.name, [&] {
                const auto r = sector_check(sp.drift, sp.K, sp.grid, sp.times);
                ctx.check("sector." + sp.name, r.ok == sp.expect_pass, r.worst, 0.0,
                          "b = " + sp.drift.describe() + ": max <x, b> over " + std::to_string(r.checked) +
                              " samples; condition " + (r.ok ? "holds" : "fails") + ", expected " +
                              (sp.expect_pass ? "to hold" : "to fail"));
            });
        }
    }
    if (ctx.want("sampled_chain") && p.sampled) {
        ctx.guard("sampled_chain", [&] {
            const auto& sp = *p.sampled;
            const auto batch = sampled_chain_extract(sp.spec, sp.x0, sp.paths, child_seed(seed, 0xD1FF));
            const Certificate cert = besq_diffusion_certificate(sp.payoff, sp.spec);
            const auto r = verify_supermartingale_mc(batch, cert, sp.confidence, sp.min_surviving);
            ctx.check("sampled_chain", r.ok, static_cast<double>(r.rejections), 0.0,
                      "MC supermartingale test of phi(t, |Z_t|^2) at " + fmt(sp.confidence) + " on t <= " +
                          std::to_string(sp.spec.horizon) + " only, " + std::to_string(r.skipped) +
                          " time points skipped");
            ctx.artifact("sampled_chain.csv",
                         [&](std::ostream& os) { write_trajectories_csv(os, batch, nullptr, p.export_paths); });
        });
    }
}

// -----------------------------------------------------------------------------
// Dispatch
// -----------------------------------------------------------------------------

using Plan = std::variant<BoundPlan, HybridPlan, std::vector<StoppingPlanItem>, SwitchedPlan, IssPlan, DiffusionPlan>;

Plan parse_plan(const ScenarioConfig& cfg, const Overrides& ov) {
    if (cfg.kind == "bound" || cfg.kind == "certificate-verify") return parse_bound(cfg, ov);
    if (cfg.kind == "hybrid-sim") return parse_hybrid(cfg, ov);
    if (cfg.kind == "value-iterate") return parse_stopping(cfg);
    if (cfg.kind == "switched") return parse_switched(cfg, ov);
    if (cfg.kind == "iss") return parse_iss(cfg, ov);
    if (cfg.kind == "diffusion") return parse_diffusion(cfg, ov);
    throw ValidationError("kind", "unsupported kind " + cfg.kind);
}

const std::map<std::string, std::vector<std::string>>& dependencies() {
    static const std::map<std::string, std::vector<std::string>> deps = {
        {"mc_verify", {"simulate"}},
        {"bound_check", {"simulate", "constants"}},
        {"markov_test", {"simulate"}},
        {"excursions", {"simulate"}},
        {"minimality", {"value_iterate"}},
    };
    return deps;
}

}  // namespace

std::vector<std::string> stages_of(const std::string& kind) {
    if (kind == "bound") return {"constants", "exact_verify", "simulate", "mc_verify", "bound_check"};
    if (kind == "certificate-verify") return {"exact_verify", "simulate", "mc_verify"};
    if (kind == "hybrid-sim") return {"constants", "exact_verify", "simulate", "bound_check", "markov_test", "excursions"};
    if (kind == "value-iterate") return {"value_iterate", "minimality"};
    if (kind == "switched") {
        return {"S1", "S2", "switch_law", "lyapunov", "simulate", "pathwise", "diagnostics", "counterexample"};
    }
    if (kind == "iss") return {"simulate", "lyapunov", "envelope", "zero_reduction"};
    if (kind == "diffusion") {
        return {"besq_mean", "besq_terminal", "besq_shape", "besq_coupling", "simulate", "sector", "sampled_chain"};
    }
    throw ValidationError("kind", "unknown scenario kind '" + kind + "'");
}

Diagnostics validate(const ScenarioConfig& config) {
    try {
        (void)parse_plan(config, {});
        return {};
    } catch (const Error& e) {
        return Diagnostics{false, {e.what()}};
    }
}

std::vector<StoppingInstance> stopping_instances(const ScenarioConfig& config) {
    if (config.kind != "value-iterate") throw ValidationError("kind", "not a value-iterate scenario");
    std::vector<StoppingInstance> out;
    for (auto& item : parse_stopping(config)) out.push_back(std::move(item.inst));
    return out;
}

Report run_scenario(const ScenarioConfig& config, const Overrides& overrides) {
    const auto start = std::chrono::steady_clock::now();
    ScenarioConfig cfg = config;
    if (overrides.seed) {
        cfg.seed = *overrides.seed;
        cfg.raw["seed"] = *overrides.seed;
    }
    const Plan plan = parse_plan(cfg, overrides);

    const auto all = stages_of(cfg.kind);
    std::set<std::string> stages;
    if (overrides.stages.empty()) {
        stages.insert(all.begin(), all.end());
    } else {
        for (const auto& s : overrides.stages) {
            if (std::find(all.begin(), all.end(), s) == all.end()) {
                std::string list;
                for (const auto& a : all) list += (list.empty() ? "" : ", ") + a;
                throw ValidationError("stages", "kind " + cfg.kind + " has no stage '" + s + "'; stages: " + list);
            }
            stages.insert(s);
        }
        for (bool grew = true; grew;) {
            grew = false;
            for (const auto& s : std::vector<std::string>(stages.begin(), stages.end())) {
                auto it = dependencies().find(s);
                if (it == dependencies().end()) continue;
                for (const auto& d : it->second) grew |= stages.insert(d).second;
            }
        }
    }

    Report rep;
    rep.scenario = cfg.name;
    rep.kind = cfg.kind;
    rep.seed = cfg.seed;
    Json echo = cfg.raw;
    if (overrides.paths) echo["__override_paths"] = *overrides.paths;
    if (overrides.horizon) echo["__override_horizon"] = *overrides.horizon;
    if (!overrides.stages.empty()) echo["__stages"] = overrides.stages;
    rep.echo = echo.dump(2);

    fs::path out;
    if (overrides.out) {
        out = *overrides.out;
    } else if (auto it = cfg.raw.find("output_dir"); it != cfg.raw.end() && it->is_string()) {
        out = it->get<std::string>();
    } else {
        out = fs::path("out") / cfg.name;
    }
    rep.output_dir = out.string();
    Ctx ctx(rep, out, overrides.write_artifacts, stages);

    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, BoundPlan>) {
                run_bound(p, cfg, ctx, cfg.seed);
            } else if constexpr (std::is_same_v<P, HybridPlan>) {
                run_hybrid(p, ctx, cfg.seed);
            } else if constexpr (std::is_same_v<P, std::vector<StoppingPlanItem>>) {
                run_stopping(p, ctx);
            } else if constexpr (std::is_same_v<P, SwitchedPlan>) {
                run_switched(p, ctx, cfg.seed);
            } else if constexpr (std::is_same_v<P, IssPlan>) {
                run_iss(p, ctx, cfg.seed);
            } else {
                run_diffusion(p, ctx, cfg.seed);
            }
        },
        plan);

    if (overrides.write_artifacts) {
        fs::create_directories(out);
        rep.artifacts.push_back("report.csv");
        rep.artifacts.push_back("report.txt");
        {
            std::ofstream os(out / "report.csv");
            rep.write_csv(os);
        }
        rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream os(out / "report.txt");
        os << rep.text();
    } else {
        rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return rep;
}

}  // namespace hybstab::harness
