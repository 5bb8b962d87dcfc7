#include "hybstab/harness/harness.hpp"

#include <cmath>
#include <map>

namespace hybstab::harness {

namespace {

[[noreturn]] void bad_type(const Node& n, const std::string& type, const std::string& valid) {
    throw ValidationError(n.key_path("type"), "unknown type '" + type + "'; valid types: " + valid);
}

std::vector<std::string> default_labels(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

}  // namespace

KernelSpec build_kernel(const Node& n) {
    const std::string type = n.string("type");
    KernelSpec spec;
    if (type == "finite") {
        std::vector<Matrix> family;
        FiniteKernel::Extent extent = FiniteKernel::Extent::single;
        if (n.has("matrix")) {
            family.push_back(n.matrix("matrix"));
            validate_stochastic(family.back(), n.key_path("matrix"));
        } else {
            const Json& ms = n.at("matrices");
            const std::string mp = n.key_path("matrices");
            if (!ms.is_array() || ms.empty()) throw ValidationError(mp, "expected a nonempty array of matrices");
            for (std::size_t t = 0; t < ms.size(); ++t) {
                const std::string p = mp + "[" + std::to_string(t) + "]";
                family.push_back(as_matrix(ms[t], p));
                validate_stochastic(family.back(), p);
                if (family.back().rows != family.front().rows) throw ValidationError(p, "size differs from matrices[0]");
            }
            const std::string e = n.string_or("extent", "cyclic");
            if (e == "cyclic") {
                extent = FiniteKernel::Extent::cyclic;
            } else if (e == "explicit") {
                extent = FiniteKernel::Extent::explicit_;
            } else {
                throw ValidationError(n.key_path("extent"), "must be cyclic or explicit");
            }
        }
        std::vector<std::string> labels =
            n.has("labels") ? n.strings("labels") : default_labels(family.front().rows);
        if (labels.size() != family.front().rows) {
            throw ValidationError(n.key_path("labels"), "needs one label per state (" +
                                                            std::to_string(family.front().rows) + ")");
        }
        std::shared_ptr<const FiniteKernel> fk;
        try {
            fk = extent == FiniteKernel::Extent::single
                     ? std::make_shared<const FiniteKernel>(labels, family.front())
                     : std::make_shared<const FiniteKernel>(labels, family, extent);
        } catch (const ValidationError& e) {
            throw ValidationError(n.key_path(e.field()), e.what());
        }
        spec.kernel = fk;
        spec.finite = fk;
    } else if (type == "biased_walk") {
        const Json& p = n.at("p_up");
        Vec schedule = p.is_array() ? as_vector(p, n.key_path("p_up")) : Vec{as_number(p, n.key_path("p_up"))};
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (!(schedule[i] >= 0.0 && schedule[i] <= 1.0)) {
                throw ValidationError(n.key_path("p_up") + "[" + std::to_string(i) + "]", "must lie in [0, 1]");
            }
        }
        spec.kernel = std::make_shared<const BiasedWalkKernel>(schedule);
    } else if (type == "linear_gaussian") {
        const Matrix A = n.matrix("A");
        if (A.rows != A.cols) throw ValidationError(n.key_path("A"), "must be square");
        const double s = n.number("noise");
        if (s < 0.0) throw ValidationError(n.key_path("noise"), "must be >= 0");
        spec.kernel = std::make_shared<const LinearGaussianKernel>(A, s);
    } else {
        bad_type(n, type, "finite, biased_walk, linear_gaussian");
    }
    n.finish();
    return spec;
}

State build_state(const Json& j, const std::string& path, const KernelSpec& k) {
    State s;
    switch (k.kernel->space()) {
        case SpaceKind::finite:
            if (j.is_string()) {
                try {
                    s = site_state(k.finite->index_of(j.get<std::string>()));
                } catch (const DomainError&) {
                    throw ValidationError(path, "unknown state label '" + j.get<std::string>() + "'");
                }
            } else {
                s = site_state(as_integer(j, path));
            }
            break;
        case SpaceKind::lattice: s = site_state(as_integer(j, path)); break;
        case SpaceKind::real: s = real_state(as_vector(j, path)); break;
        case SpaceKind::joint: throw ValidationError(path, "joint states are not configured directly");
    }
    try {
        k.kernel->check_state(s);
    } catch (const DomainError& e) {
        throw ValidationError(path, e.what());
    }
    return s;
}

Region build_region(const Node& n, const KernelSpec* k) {
    const std::string type = n.string("type");
    Region r;
    if (type == "set") {
        const Json& m = n.at("members");
        if (!m.is_array()) throw ValidationError(n.key_path("members"), "expected an array");
        std::set<std::int64_t> sites;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const std::string p = n.key_path("members") + "[" + std::to_string(i) + "]";
            if (k) {
                sites.insert(build_state(m[i], p, *k).site);
            } else {
                sites.insert(as_integer(m[i], p));
            }
        }
        r = Region::finite_set(std::move(sites));
    } else if (type == "ball") {
        const double radius = n.number("radius");
        if (radius < 0.0) throw ValidationError(n.key_path("radius"), "must be >= 0");
        r = Region::ball(radius, n.has("center") ? n.vector("center") : Vec{});
    } else if (type == "everything") {
        r = Region::everything();
    } else if (type == "nothing") {
        r = Region::nothing();
    } else if (type == "table") {
        const Json& t = n.at("inside");
        if (!t.is_array()) throw ValidationError(n.key_path("inside"), "expected an array of booleans");
        std::vector<bool> inside;
        for (std::size_t i = 0; i < t.size(); ++i) {
            inside.push_back(as_bool(t[i], n.key_path("inside") + "[" + std::to_string(i) + "]"));
        }
        if (k && k->finite && inside.size() != k->finite->labels().size()) {
            throw ValidationError(n.key_path("inside"), "needs one entry per state");
        }
        r = Region::predicate_table(std::move(inside));
    } else {
        bad_type(n, type, "set, ball, everything, nothing, table");
    }
    n.finish();
    return r;
}

StateFn build_V(const Node& n, const KernelSpec* k) {
    const std::string type = n.string("type");
    StateFn V;
    if (type == "geometric") {
        const double base = n.number("base");
        const double scale = n.number_or("scale", 1.0);
        if (!(base > 0.0)) throw ValidationError(n.key_path("base"), "must be > 0");
        V = [base, scale](const State& x) { return std::pow(base, scale * static_cast<double>(x.site)); };
    } else if (type == "table") {
        const Json& v = n.at("values");
        const std::string p = n.key_path("values");
        std::vector<double> values;
        if (v.is_object()) {
            if (!k || !k->finite) throw ValidationError(p, "label-keyed values need a finite kernel");
            values.assign(k->finite->labels().size(), 0.0);
            std::vector<bool> seen(values.size(), false);
            for (auto it = v.begin(); it != v.end(); ++it) {
                const auto idx = static_cast<std::size_t>(build_state(Json(it.key()), p + "." + it.key(), *k).site);
                values[idx] = as_number(it.value(), p + "." + it.key());
                seen[idx] = true;
            }
            for (std::size_t i = 0; i < seen.size(); ++i) {
                if (!seen[i]) throw ValidationError(p, "missing value for state '" + k->finite->labels()[i] + "'");
            }
        } else {
            values = as_vector(v, p);
            if (k && k->finite && values.size() != k->finite->labels().size()) {
                throw ValidationError(p, "needs one value per state");
            }
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < 0.0) throw ValidationError(p + "[" + std::to_string(i) + "]", "must be >= 0");
        }
        V = [values](const State& x) {
            if (x.site < 0 || x.site >= static_cast<std::int64_t>(values.size())) {
                throw DomainError("V table has no entry for state " + std::to_string(x.site));
            }
            return values[static_cast<std::size_t>(x.site)];
        };
    } else if (type == "constant") {
        const double c = n.number("value");
        if (c < 0.0) throw ValidationError(n.key_path("value"), "must be >= 0");
        V = [c](const State&) { return c; };
    } else if (type == "norm") {
        const double p = n.number_or("power", 1.0);
        const double w = n.number_or("weight", 1.0);
        if (!(p > 0.0)) throw ValidationError(n.key_path("power"), "must be > 0");
        if (w < 0.0) throw ValidationError(n.key_path("weight"), "must be >= 0");
        V = [p, w](const State& x) { return w * std::pow(norm(x.x), p); };
    } else {
        bad_type(n, type, "geometric, table, constant, norm");
    }
    n.finish();
    return V;
}

Theta build_theta(const Node& n) {
    const std::string type = n.string("type");
    Theta th = Theta::exponential(0.0);
    try {
        if (type == "exponential") {
            th = Theta::exponential(n.number("alpha"));
        } else if (type == "geometric") {
            th = Theta::geometric(n.number("base"));
        } else if (type == "power") {
            th = Theta::power(n.number("p"));
        } else if (type == "table") {
            th = Theta::table(n.vector("values"), n.number_or("tail_bound", 0.0));
        } else {
            bad_type(n, type, "exponential, geometric, power, table");
        }
    } catch (const ValidationError& e) {
        if (e.field().rfind(n.path(), 0) == 0) throw;
        throw ValidationError(n.path(), e.what());
    }
    n.finish();
    return th;
}

ClassK build_class_k(const Node& n) {
    const std::string type = n.string("type");
    std::optional<ClassK> a;
    if (type == "linear") {
        a = ClassK::linear(n.number("c"));
    } else if (type == "power") {
        a = ClassK::power(n.number("c"), n.number("p"));
    } else if (type == "saturating") {
        a = ClassK::saturating(n.number("c"));
    } else {
        bad_type(n, type, "linear, power, saturating");
    }
    n.finish();
    return *a;
}

Certificate build_certificate(const Node& n, const StateFn& V, const Region& K) {
    const std::string form = n.string_or("form", "exponential");
    const Theta theta = build_theta(n.child("theta"));
    n.finish();
    bool outside;
    if (form == "exponential") {
        outside = false;
    } else if (form == "exponential_outside_K") {
        outside = true;
    } else {
        throw ValidationError(n.key_path("form"), "must be exponential or exponential_outside_K");
    }
    if (theta.form() == Theta::Form::exponential) {
        return outside ? Certificate::exponential_outside_K(V, theta.alpha(), K)
                       : Certificate::exponential(V, theta.alpha(), K);
    }
    auto phi = [V, theta, K, outside](Time t, const State& x) {
        if (outside && K.contains(x)) return 0.0;
        return V(x) * theta.inverse(t);
    };
    return Certificate::custom(phi, V, theta, K,
                               outside ? Certificate::Form::exponential_outside_K : Certificate::Form::exponential,
                               "V(x) / theta(t), theta = " + theta.describe());
}

SwitchingChain build_chain(const Node& n) {
    const Matrix P = n.matrix("P");
    validate_stochastic(P, n.key_path("P"));
    std::optional<Vec> initial;
    if (n.has("initial")) initial = n.vector("initial");
    n.finish();
    try {
        return initial ? SwitchingChain(P, *initial) : SwitchingChain(P);
    } catch (const ValidationError& e) {
        throw ValidationError(n.key_path(e.field()), e.what());
    }
}

ModeMap build_map(const Node& n) {
    const std::string family = n.string("family");
    std::optional<ModeMap> m;
    if (family == "linear") {
        Matrix A;
        if (n.has("A")) {
            A = n.matrix("A");
        } else {
            const double angle = n.number("rotation");
            Vec diag = n.has("diag") ? n.vector("diag") : Vec(2, n.number_or("scale", 1.0));
            if (diag.size() != 2) throw ValidationError(n.key_path("diag"), "rotation maps are 2 x 2");
            A = Matrix(2, 2);
            const double c = std::cos(angle), s = std::sin(angle);
            A(0, 0) = diag[0] * c;
            A(0, 1) = -diag[0] * s;
            A(1, 0) = diag[1] * s;
            A(1, 1) = diag[1] * c;
        }
        if (A.rows != A.cols) throw ValidationError(n.key_path("A"), "must be square");
        std::optional<Matrix> B;
        if (n.has("B")) {
            B = n.matrix("B");
            if (B->rows != A.rows) throw ValidationError(n.key_path("B"), "row count must match A");
        }
        m = ModeMap::linear(A, B);
    } else if (family == "affine") {
        m = ModeMap::affine(n.matrix("A"), n.vector("b"), n.vector("equilibrium"));
    } else if (family == "tanh") {
        m = ModeMap::tanh(n.number("a"), n.count("dim"));
    } else {
        throw ValidationError(n.key_path("family"), "unknown family '" + family + "'; valid families: linear, affine, tanh");
    }
    n.finish();
    return *m;
}

SwitchedSystem build_switched_system(const Node& parent) {
    std::vector<ModeMap> maps;
    for (const auto& m : parent.children("maps")) maps.push_back(build_map(m));
    SwitchedSystem sys{std::move(maps), build_chain(parent.child("chain"))};
    try {
        sys.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(parent.key_path("maps"), e.what());
    }
    return sys;
}

LyapunovFamily build_lyapunov(const Node& n) {
    const Vec w = n.vector("weights");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0)) throw ValidationError(n.key_path("weights") + "[" + std::to_string(i) + "]", "must be > 0");
    }
    const double mu = n.number("mu");
    if (mu < 1.0) throw ValidationError(n.key_path("mu"), "must be >= 1");
    LyapunovFamily lyap = LyapunovFamily::weighted_norms(w, mu, build_class_k(n.child("alpha1")),
                                                         build_class_k(n.child("alpha2")));
    lyap.r = n.number_or("r", 0.0);
    if (lyap.r < 0.0) throw ValidationError(n.key_path("r"), "must be >= 0");
    lyap.lambda0 = n.number_opt("lambda0");
    if (n.has("Lambda")) {
        lyap.Lambda = n.matrix("Lambda");
        if (lyap.Lambda->rows != w.size() || lyap.Lambda->cols != w.size()) {
            throw ValidationError(n.key_path("Lambda"), "must be modes x modes");
        }
    }
    n.finish();
    return lyap;
}

}  // namespace hybstab::harness
