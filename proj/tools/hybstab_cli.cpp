#include "hybstab/core/parallel.hpp"
#include "hybstab/harness/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace hybstab;
using namespace hybstab::harness;

namespace {

struct Common {
    std::vector<std::string> configs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<Time> horizon;
    std::optional<std::string> out;
    unsigned workers = 0;
    bool quiet = false;
};

struct Command {
    std::string name;
    std::string help;
    std::set<std::string> kinds;     ///< accepted kinds; empty = any
    std::vector<std::string> stages; ///< empty = every stage of the kind
};

void add_common(CLI::App* sub, Common& c, bool multiple) {
    auto* opt = sub->add_option("config", c.configs, "scenario file(s)")->required()->check(CLI::ExistingFile);
    if (!multiple) opt->expected(1);
    sub->add_option("--seed", c.seed, "override the scenario seed");
    sub->add_option("--paths", c.paths, "override the number of simulated paths");
    sub->add_option("--horizon", c.horizon, "override the simulation horizon");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--workers", c.workers, "worker threads for path-parallel loops (0 = all cores)");
    sub->add_flag("-q,--quiet", c.quiet, "print only the summary line");
}

void print_report(const Report& rep, bool quiet) {
    if (!quiet) {
        for (const auto& c : rep.checks) {
            std::cout << "  [" << to_string(c.status) << "] " << c.name << ": " << c.value;
            if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
            std::cout << '\n';
        }
    }
    std::size_t passed = 0;
    for (const auto& c : rep.checks) passed += c.status == Status::pass;
    std::cout << (rep.ok() ? "PASS " : "FAIL ") << rep.scenario << " (" << passed << "/" << rep.checks.size()
              << " checks) -> " << rep.output_dir << '\n';
}

int run_command(const Command& cmd, const Common& c) {
    set_worker_count(c.workers);
    bool ok = true;
    for (const auto& path : c.configs) {
        ScenarioConfig cfg = load_config(path);
        if (!cmd.kinds.empty() && !cmd.kinds.count(cfg.kind)) {
            std::string list;
            for (const auto& k : cmd.kinds) list += (list.empty() ? "" : ", ") + k;
            throw ValidationError("kind", cmd.name + " needs a scenario of kind " + list + ", got " + cfg.kind);
        }
        Overrides ov;
        ov.seed = c.seed;
        ov.paths = c.paths;
        ov.horizon = c.horizon;
        if (c.out) ov.out = c.configs.size() > 1 ? (fs::path(*c.out) / cfg.name).string() : *c.out;
        if (!cmd.stages.empty()) {
            const auto all = stages_of(cfg.kind);
            for (const auto& s : cmd.stages) {
                if (std::find(all.begin(), all.end(), s) != all.end()) ov.stages.push_back(s);
            }
            if (ov.stages.empty()) throw ValidationError("kind", cmd.name + " has nothing to do for kind " + cfg.kind);
        }
        const Report rep = run_scenario(cfg, ov);
        print_report(rep, c.quiet);
        ok = ok && rep.ok();
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Supermartingale certificates, hybrid processes and switched-system stability checks"};
    app.require_subcommand(1);

    const std::vector<Command> commands = {
        {"run", "run scenario files end to end", {}, {}},
        {"simulate", "simulate the scenario's process and export trajectories", {}, {"simulate"}},
        {"verify", "verify the supermartingale certificate (exact and Monte Carlo)",
         {"bound", "certificate-verify", "hybrid-sim"}, {"exact_verify", "mc_verify"}},
        {"bound", "compute the certificate constants and check the bound empirically",
         {"bound", "certificate-verify", "hybrid-sim"}, {"constants", "bound_check"}},
        {"value-iterate", "backward induction for the optimal stopping certificate", {"value-iterate"}, {}},
        {"check-s1", "check the scalar switching condition", {"switched"}, {"S1"}},
        {"check-s2", "check the matrix switching condition", {"switched"}, {"S2"}},
        {"simulate-switched", "simulate a switched system and export trajectories", {"switched", "iss"}, {"simulate"}},
        {"diagnose", "stability diagnostics for a switched system", {"switched"}, {"S1", "diagnostics", "counterexample"}},
        {"iss-check", "input-to-state stability envelope check", {"iss"}, {}},
        {"besq", "squared Bessel identities and sample export", {"diffusion"},
         {"besq_mean", "besq_terminal", "besq_shape", "besq_coupling", "simulate"}},
        {"diffusion", "sector condition and sampled-chain certificate", {"diffusion"}, {"sector", "sampled_chain"}},
    };

    std::vector<Common> opts(commands.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_common(sub, opts[i], commands[i].name == "run");
        subs.push_back(sub);
    }

    std::vector<std::string> validate_files;
    auto* validate_cmd = app.add_subcommand("validate", "dry-run validation of scenario files");
    validate_cmd->add_option("config", validate_files, "scenario file(s)")->required();

    std::string list_dir = default_scenario_dir();
    auto* list_cmd = app.add_subcommand("list", "list shipped scenarios");
    list_cmd->add_option("--dir", list_dir, "scenario directory");

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < commands.size(); ++i) {
            if (subs[i]->parsed()) return run_command(commands[i], opts[i]);
        }
        if (validate_cmd->parsed()) {
            bool ok = true;
            for (const auto& f : validate_files) {
                const auto d = validate_file(f);
                std::cout << (d.ok ? "ok      " : "invalid ") << f << '\n';
                for (const auto& e : d.errors) std::cout << "  " << e << '\n';
                ok = ok && d.ok;
            }
            return ok ? 0 : 2;
        }
        if (list_cmd->parsed()) {
            const auto items = list_scenarios(list_dir);
            for (const auto& s : items) {
                std::cout << s.name << "  [" << s.kind << "]  " << s.path << '\n';
                if (!s.description.empty()) std::cout << "    " << s.description << '\n';
            }
            return items.empty() ? 2 : 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
