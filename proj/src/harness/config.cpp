#include "hybstab/harness/config.hpp"

namespace hybstab::harness {

double as_number(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError(path, "must be finite");
    return v;
}

std::int64_t as_integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ValidationError(path, "expected an integer");
    if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        throw ValidationError(path, "integer out of range");
    }
    return j.get<std::int64_t>();
}

std::string as_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ValidationError(path, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ValidationError(path, "expected true or false");
    return j.get<bool>();
}

Vec as_vector(const Json& j, const std::string& path) {
    if (!j.is_array()) throw ValidationError(path, "expected an array of numbers");
    Vec out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Matrix as_matrix(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ValidationError(path, "expected a nonempty array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string rp = path + ".row[" + std::to_string(i) + "]";
        rows.push_back(as_vector(j[i], rp));
        if (rows.back().size() != rows.front().size()) throw ValidationError(rp, "row length differs from row 0");
    }
    if (rows.front().empty()) throw ValidationError(path, "rows must be nonempty");
    return Matrix::from_rows(rows);
}

Node::Node(const Json& j, std::string path, const Json* components)
    : j_(&j), path_(std::move(path)), components_(components) {
    if (!j.is_object()) throw ValidationError(path_, "expected an object");
}

std::string Node::key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Node::has(const std::string& key) const { return j_->contains(key); }

const Json* Node::find(const std::string& key) const {
    auto it = j_->find(key);
    if (it == j_->end()) return nullptr;
    used_.insert(key);
    return &*it;
}

const Json& Node::at(const std::string& key) const {
    const Json* v = find(key);
    if (!v) throw ValidationError(key_path(key), "required field is missing");
    return *v;
}

double Node::number(const std::string& key) const { return as_number(at(key), key_path(key)); }

double Node::number_or(const std::string& key, double fallback) const {
    const Json* v = find(key);
    return v ? as_number(*v, key_path(key)) : fallback;
}

std::optional<double> Node::number_opt(const std::string& key) const {
    const Json* v = find(key);
    if (!v) return std::nullopt;
    return as_number(*v, key_path(key));
}

std::int64_t Node::integer(const std::string& key) const { return as_integer(at(key), key_path(key)); }

std::int64_t Node::integer_or(const std::string& key, std::int64_t fallback) const {
    const Json* v = find(key);
    return v ? as_integer(*v, key_path(key)) : fallback;
}

std::uint64_t Node::seed(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ValidationError(key_path(key), "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

std::size_t Node::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 1) throw ValidationError(key_path(key), "must be >= 1");
    return static_cast<std::size_t>(v);
}

std::size_t Node::count_or(const std::string& key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
}

bool Node::boolean_or(const std::string& key, bool fallback) const {
    const Json* v = find(key);
    return v ? as_bool(*v, key_path(key)) : fallback;
}

std::string Node::string(const std::string& key) const { return as_string(at(key), key_path(key)); }

std::string Node::string_or(const std::string& key, const std::string& fallback) const {
    const Json* v = find(key);
    return v ? as_string(*v, key_path(key)) : fallback;
}

Vec Node::vector(const std::string& key) const { return as_vector(at(key), key_path(key)); }

Matrix Node::matrix(const std::string& key) const { return as_matrix(at(key), key_path(key)); }

std::vector<std::string> Node::strings(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_array()) throw ValidationError(key_path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as_string(v[i], key_path(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
}

Node Node::resolve(const Json& value, const std::string& path) const {
    if (value.is_string()) {
        const std::string name = value.get<std::string>();
        if (!components_ || !components_->contains(name)) {
            throw ValidationError(path, "reference to undefined component '" + name + "'");
        }
        return Node((*components_)[name], path, components_);
    }
    return Node(value, path, components_);
}

Node Node::child(const std::string& key) const { return resolve(at(key), key_path(key)); }

std::optional<Node> Node::child_opt(const std::string& key) const {
    const Json* v = find(key);
    if (!v) return std::nullopt;
    return resolve(*v, key_path(key));
}

std::vector<Node> Node::children(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_array()) throw ValidationError(key_path(key), "expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(resolve(v[i], key_path(key) + "[" + std::to_string(i) + "]"));
    return out;
}

void Node::finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
        if (!used_.count(it.key())) throw ValidationError(key_path(it.key()), "unknown key");
    }
}

}  // namespace hybstab::harness
