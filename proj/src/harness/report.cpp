#include "hybstab/harness/harness.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hybstab::harness {

namespace {

std::string num(double v, int precision) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const std::vector<std::string>& scenario_kinds() {
    static const std::vector<std::string> kinds = {"certificate-verify", "bound",  "hybrid-sim", "value-iterate",
                                                   "switched",           "iss",    "diffusion"};
    return kinds;
}

std::string to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::error: return "error";
    }
    return "?";
}

bool Report::ok() const {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == Status::pass; });
}

const CheckResult* Report::check(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::optional<double> Report::constant(const std::string& name) const {
    for (const auto& c : constants) {
        if (c.name == name) return c.value;
    }
    return std::nullopt;
}

std::string Report::body() const {
    std::ostringstream os;
    os << "report: " << scenario << "\n";
    os << "version: " << version << "\n";
    os << "kind: " << kind << "\n";
    os << "seed: " << seed << "\n\n";
    os << "config:\n";
    std::istringstream lines(echo);
    for (std::string line; std::getline(lines, line);) os << "  " << line << "\n";
    os << "\nconstants:\n";
    for (const auto& c : constants) {
        os << "  " << c.name << " = " << num(c.value, 17);
        if (c.se > 0.0) os << " +/- " << num(c.se, 6);
        if (!c.provenance.empty()) os << " (" << c.provenance << ")";
        os << "\n";
    }
    os << "\nchecks:\n";
    std::size_t passed = 0;
    for (const auto& c : checks) {
        if (c.status == Status::pass) ++passed;
        std::string tag = to_string(c.status);
        std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char ch) { return std::toupper(ch); });
        os << "  [" << tag << "] " << c.name << ": value=" << num(c.value, 10) << " se=" << num(c.se, 6);
        if (!c.detail.empty()) os << " | " << c.detail;
        os << "\n";
    }
    os << "\nsummary: " << (ok() ? "PASS" : "FAIL") << " (" << passed << "/" << checks.size() << " checks passed)\n";
    if (!artifacts.empty()) {
        os << "\nartifacts:\n";
        for (const auto& a : artifacts) os << "  " << a << "\n";
    }
    return os.str();
}

std::string Report::text() const {
    return body() + "\n-- run info (not part of the reproducible body)\nruntime_seconds: " + num(runtime_seconds, 6) +
           "\n";
}

void Report::write_csv(std::ostream& os) const {
    os << "check,status,value,se,detail\n";
    for (const auto& c : checks) {
        os << csv_field(c.name) << ',' << to_string(c.status) << ',' << num(c.value, 17) << ',' << num(c.se, 17)
           << ',' << csv_field(c.detail) << '\n';
    }
    for (const auto& c : constants) {
        os << csv_field("constant:" + c.name) << ",info," << num(c.value, 17) << ',' << num(c.se, 17) << ','
           << csv_field(c.provenance) << '\n';
    }
}

ScenarioConfig parse_config(Json j, std::string source) {
    if (!j.is_object()) throw ValidationError("", "config must be a JSON object");
    ScenarioConfig c;
    c.source = std::move(source);
    const auto version = j.find("schema_version");
    if (version == j.end()) throw ValidationError("schema_version", "required field is missing");
    if (!version->is_number_integer() || version->get<std::int64_t>() != kSchemaVersion) {
        throw ValidationError("schema_version", "unsupported schema version; expected " + std::to_string(kSchemaVersion));
    }
    Node root(j, "");
    c.name = root.string("name");
    c.kind = root.string("kind");
    const auto& kinds = scenario_kinds();
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) {
        std::string list;
        for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
        throw ValidationError("kind", "unknown scenario kind '" + c.kind + "'; valid kinds: " + list);
    }
    c.seed = root.seed("seed");
    c.description = root.string_or("description", "");
    c.raw = std::move(j);
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("", "cannot open config file " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ValidationError("", path + ": invalid JSON: " + e.what());
    }
    return parse_config(std::move(j), path);
}

Diagnostics validate_file(const std::string& path) {
    try {
        return validate(load_config(path));
    } catch (const Error& e) {
        return Diagnostics{false, {e.what()}};
    }
}

std::string default_scenario_dir() { return std::string(HYBSTAB_SOURCE_DIR) + "/scenarios"; }

std::vector<ScenarioInfo> list_scenarios(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<ScenarioInfo> out;
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        ScenarioInfo info;
        info.path = f.string();
        try {
            const auto c = load_config(info.path);
            info.name = c.name;
            info.kind = c.kind;
            info.description = c.description;
        } catch (const Error& e) {
            info.name = f.stem().string();
            info.kind = "invalid";
            info.description = e.what();
        }
        out.push_back(std::move(info));
    }
    return out;
}

}  // namespace hybstab::harness
