#pragma once

// Strict JSON reader: every access is recorded so unread keys can be reported
// as typos. Errors are ValidationErrors carrying the dotted field path.

#include "hybstab/core/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hybstab::harness {

using Json = nlohmann::json;

double as_number(const Json& j, const std::string& path);
std::int64_t as_integer(const Json& j, const std::string& path);
std::string as_string(const Json& j, const std::string& path);
bool as_bool(const Json& j, const std::string& path);
Vec as_vector(const Json& j, const std::string& path);
Matrix as_matrix(const Json& j, const std::string& path);

class Node {
public:
    /// `components` is the table used to resolve string references to component specs.
    Node(const Json& j, std::string path, const Json* components = nullptr);

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const Json& json() const { return *j_; }
    [[nodiscard]] std::string key_path(const std::string& key) const;
    [[nodiscard]] bool has(const std::string& key) const;

    /// Required raw value; marks the key as read.
    const Json& at(const std::string& key) const;
    const Json* find(const std::string& key) const;

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    std::optional<double> number_opt(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
    std::uint64_t seed(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    std::size_t count_or(const std::string& key, std::size_t fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::string string(const std::string& key) const;
    std::string string_or(const std::string& key, const std::string& fallback) const;
    Vec vector(const std::string& key) const;
    Matrix matrix(const std::string& key) const;
    std::vector<std::string> strings(const std::string& key) const;

    /// Object child; a string value names an entry of the components table.
    Node child(const std::string& key) const;
    std::optional<Node> child_opt(const std::string& key) const;
    /// Array of objects (or component references).
    std::vector<Node> children(const std::string& key) const;

    /// Throws for keys that were never read.
    void finish() const;

private:
    Node resolve(const Json& value, const std::string& path) const;

    const Json* j_;
    std::string path_;
    const Json* components_;
    mutable std::set<std::string> used_;
};

}  // namespace hybstab::harness
