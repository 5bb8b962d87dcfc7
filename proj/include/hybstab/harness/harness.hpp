#pragma once

// =============================================================================
// Scenario configs, reports and the end-to-end runner
// =============================================================================
// A scenario is one JSON document:
//   { "schema_version": 1, "name": ..., "kind": ..., "seed": ..., ... }
// Kind-specific sections are validated strictly; unknown keys are errors. The
// optional "components" table holds named specs that other fields reference
// by string.
// =============================================================================

#include "hybstab/certificate/certificate.hpp"
#include "hybstab/chain/kernel.hpp"
#include "hybstab/harness/config.hpp"
#include "hybstab/iss/iss.hpp"
#include "hybstab/stopping/stopping.hpp"
#include "hybstab/switched/switched.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hybstab::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "hybstab 0.1.0";

/// certificate-verify, bound, hybrid-sim, value-iterate, switched, iss, diffusion
const std::vector<std::string>& scenario_kinds();

// -----------------------------------------------------------------------------
// Reports
// -----------------------------------------------------------------------------

enum class Status { pass, fail, error };
std::string to_string(Status s);

struct CheckResult {
    std::string name;
    Status status = Status::pass;
    double value = 0.0;  ///< slack or margin, in the check's own units
    double se = 0.0;
    std::string detail;
};

struct ConstantEntry {
    std::string name;
    double value = 0.0;
    double se = 0.0;
    std::string provenance;
};

struct Report {
    std::string scenario;
    std::string kind;
    std::uint64_t seed = 0;
    std::string echo;  ///< effective config
    std::vector<ConstantEntry> constants;
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;
    std::string output_dir;
    double runtime_seconds = 0.0;
    std::string version = kVersion;

    /// At least one check ran and every check passed.
    [[nodiscard]] bool ok() const;
    [[nodiscard]] const CheckResult* check(const std::string& name) const;
    [[nodiscard]] std::optional<double> constant(const std::string& name) const;

    /// Deterministic text body: everything except the runtime footer.
    [[nodiscard]] std::string body() const;
    [[nodiscard]] std::string text() const;
    /// check,status,value,se,detail rows followed by constant rows.
    void write_csv(std::ostream& os) const;
};

// -----------------------------------------------------------------------------
// Configs
// -----------------------------------------------------------------------------

struct ScenarioConfig {
    Json raw;
    std::string source;  ///< file path, empty for in-memory configs
    std::string name;
    std::string kind;
    std::string description;
    std::uint64_t seed = 0;
};

/// Top-level checks only (schema version, name, kind, seed).
ScenarioConfig parse_config(Json j, std::string source = {});
ScenarioConfig load_config(const std::string& path);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<Time> horizon;
    std::optional<std::string> out;
    /// Restrict the pipeline to these stages; empty runs the kind's default stages.
    std::vector<std::string> stages;
    bool write_artifacts = true;
};

struct Diagnostics {
    bool ok = true;
    std::vector<std::string> errors;
};

/// Dry run: builds every component and checks every field without simulating.
Diagnostics validate(const ScenarioConfig& config);
Diagnostics validate_file(const std::string& path);

/// Runs the pipeline of the config's kind. Validation failures throw
/// ValidationError; failures inside a stage become error checks.
Report run_scenario(const ScenarioConfig& config, const Overrides& overrides = {});

/// Stage names of a kind, in execution order.
std::vector<std::string> stages_of(const std::string& kind);

struct ScenarioInfo {
    std::string name;
    std::string kind;
    std::string path;
    std::string description;
};

std::string default_scenario_dir();
/// Shipped scenario files (*.json) in `dir`, sorted by file name.
std::vector<ScenarioInfo> list_scenarios(const std::string& dir = default_scenario_dir());

// -----------------------------------------------------------------------------
// Component builders (shared by the runner, the CLI and the tests)
// -----------------------------------------------------------------------------

struct KernelSpec {
    KernelPtr kernel;
    std::shared_ptr<const FiniteKernel> finite;  ///< set for finite kernels
};

KernelSpec build_kernel(const Node& n);
State build_state(const Json& j, const std::string& path, const KernelSpec& k);
Region build_region(const Node& n, const KernelSpec* k = nullptr);
StateFn build_V(const Node& n, const KernelSpec* k = nullptr);
Theta build_theta(const Node& n);
ClassK build_class_k(const Node& n);
/// "form": exponential | exponential_outside_K, "theta": {...}; phi = V / theta(t).
Certificate build_certificate(const Node& n, const StateFn& V, const Region& K);
SwitchingChain build_chain(const Node& n);
ModeMap build_map(const Node& n);
SwitchedSystem build_switched_system(const Node& maps_parent);
LyapunovFamily build_lyapunov(const Node& n);

struct StoppingInstance {
    std::string name;
    std::shared_ptr<const FiniteKernel> kernel;
    Reward reward;
    Time N = 0;
};

/// Instances of a value-iterate scenario.
std::vector<StoppingInstance> stopping_instances(const ScenarioConfig& config);

}  // namespace hybstab::harness
