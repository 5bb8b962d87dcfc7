#pragma once

#include <string>

namespace hybstab {

/// Comparison function alpha: [0, inf) -> [0, inf), strictly increasing with
/// alpha(0) = 0. `saturating` is class-K but not class-K-infinity.
class ClassK {
public:
    enum class Form { linear, power, saturating };

    static ClassK linear(double c);
    static ClassK power(double c, double p);
    /// c * r / (1 + r)
    static ClassK saturating(double c);

    double operator()(double r) const;
    /// Inverse on the range of the function; +inf beyond the supremum of a saturating form.
    [[nodiscard]] double inverse(double v) const;
    [[nodiscard]] bool unbounded() const { return form_ != Form::saturating; }

    [[nodiscard]] Form form() const { return form_; }
    [[nodiscard]] double scale() const { return c_; }
    [[nodiscard]] double exponent() const { return p_; }
    [[nodiscard]] std::string describe() const;

    /// Sampled check of continuity-free properties: alpha(0) = 0 and strict
    /// increase on a geometric grid up to r_max.
    [[nodiscard]] bool sampled_monotone(double r_max, int points = 200) const;

private:
    ClassK(Form form, double c, double p);

    Form form_;
    double c_;
    double p_;
};

}  // namespace hybstab
