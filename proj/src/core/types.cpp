#include "hybstab/core/types.hpp"

#include <cmath>

namespace hybstab {

std::string to_string(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::finite: return "finite";
        case SpaceKind::lattice: return "lattice";
        case SpaceKind::real: return "real";
        case SpaceKind::joint: return "joint";
    }
    return "unknown";
}

double norm(const Vec& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::string ExtTime::str() const {
    switch (kind) {
        case Kind::neg_inf: return "-inf";
        case Kind::pos_inf: return "+inf";
        case Kind::finite: break;
    }
    return std::to_string(value);
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.empty() ? 0 : rows.front().size();
    m.data.reserve(m.rows * m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) {
            throw ValidationError("row " + std::to_string(i), "ragged matrix: expected " +
                                                                  std::to_string(m.cols) + " columns");
        }
        m.data.insert(m.data.end(), rows[i].begin(), rows[i].end());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vec Matrix::apply(const Vec& v) const {
    if (v.size() != cols) throw DomainError("matrix-vector dimension mismatch");
    Vec out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += data[i * cols + j] * v[j];
        out[i] = s;
    }
    return out;
}

std::vector<double> Matrix::row(std::size_t i) const {
    return {data.begin() + static_cast<std::ptrdiff_t>(i * cols),
            data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols)};
}

}  // namespace hybstab
