#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybstab {

using Time = std::int64_t;
using Vec = std::vector<double>;

// =============================================================================
// State spaces
// =============================================================================

/// Concrete state spaces supported by the toolkit.
///  - finite:  labelled states, `site` is the label index
///  - lattice: integer sites, `site` is the coordinate
///  - real:    points in R^d, `x` holds the coordinates
///  - joint:   (mode, x) pairs of switched systems, `site` is the mode
enum class SpaceKind { finite, lattice, real, joint };

std::string to_string(SpaceKind kind);

struct State {
    std::int64_t site = 0;
    Vec x;

    friend bool operator==(const State&, const State&) = default;
    friend auto operator<=>(const State&, const State&) = default;
};

inline State site_state(std::int64_t site) { return State{site, {}}; }
inline State real_state(Vec x) { return State{0, std::move(x)}; }
inline State joint_state(std::int64_t mode, Vec x) { return State{mode, std::move(x)}; }

double norm(const Vec& v);
double dot(const Vec& a, const Vec& b);

// =============================================================================
// Extended time (sentinels for g_t / h_t and hitting times)
// =============================================================================

struct ExtTime {
    enum class Kind { neg_inf, finite, pos_inf };

    Kind kind = Kind::finite;
    Time value = 0;

    static constexpr ExtTime neg_inf() { return {Kind::neg_inf, 0}; }
    static constexpr ExtTime pos_inf() { return {Kind::pos_inf, 0}; }
    static constexpr ExtTime at(Time t) { return {Kind::finite, t}; }

    [[nodiscard]] constexpr bool is_finite() const { return kind == Kind::finite; }
    [[nodiscard]] std::string str() const;

    friend bool operator==(const ExtTime&, const ExtTime&) = default;
    friend constexpr bool operator<(const ExtTime& a, const ExtTime& b) {
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.kind == Kind::finite && a.value < b.value;
    }
    friend constexpr bool operator<=(const ExtTime& a, const ExtTime& b) { return !(b < a); }
};

// =============================================================================
// Dense row-major matrix (small systems only)
// =============================================================================

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
    static Matrix identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    [[nodiscard]] Vec apply(const Vec& v) const;
    [[nodiscard]] std::vector<double> row(std::size_t i) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

// =============================================================================
// Errors
// =============================================================================

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration or construction-time contract was violated.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// A state was queried outside the space a kernel or region is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A time-indexed law was queried past its declared horizon.
class HorizonError : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite value where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace hybstab
