#pragma once

#include <cstddef>
#include <span>

namespace hybstab {

struct StatPoint {
    double mean = 0.0;
    double se = 0.0;  ///< sample standard deviation / sqrt(count)
    std::size_t count = 0;
};

/// Mean and standard error of a sample. A constant sample has exactly its value
/// as mean and SE 0, as does a sample of fewer than two values.
StatPoint summarize(std::span<const double> values);

/// Two-sided standard normal quantile helper: z such that P(Z <= z) = p.
double normal_quantile(double p);

/// Upper critical value of the chi-square law: P(X > c) = 1 - confidence.
double chi_square_critical(double dof, double confidence);

}  // namespace hybstab
