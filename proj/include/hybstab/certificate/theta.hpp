#pragma once

#include "hybstab/core/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hybstab {

/// Positive weight sequence theta(t) whose sum C must be finite.
class Theta {
public:
    enum class Form { exponential, geometric, power, table };

    /// e^{-alpha t}; summable iff alpha > 0.
    static Theta exponential(double alpha);
    /// base^{-t}, the exponential family with alpha = ln(base). The inverse
    /// base^t is exact for exactly representable powers.
    static Theta geometric(double base);
    /// (t+1)^{-p}; summable iff p > 1.
    static Theta power(double p);
    /// Explicit values for t < values.size(), with a declared bound on the sum of
    /// the remaining terms. Queries past the table are errors.
    static Theta table(std::vector<double> values, double tail_bound);

    double operator()(Time t) const;
    /// 1 / theta(t), computed directly for the exponential families.
    [[nodiscard]] double inverse(Time t) const;

    [[nodiscard]] Form form() const { return form_; }
    [[nodiscard]] double alpha() const;
    [[nodiscard]] double exponent() const { return param_; }
    [[nodiscard]] double base() const { return form_ == Form::geometric ? param_ : std::exp(param_); }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double tail_bound() const { return tail_; }
    [[nodiscard]] std::string describe() const;

private:
    Theta() = default;

    Form form_ = Form::exponential;
    double param_ = 0.0;
    std::vector<double> values_;
    double tail_ = 0.0;
};

struct CGamma {
    double C = 0.0;
    double gamma = 0.0;
    bool closed_form = true;
    double tail = 0.0;  ///< certified bound on the summed-away part (table form)
};

/// C = sum theta(t) and gamma = sup theta(t). Closed forms for the named
/// families. For tables the terms from `truncation` on are folded into the
/// tail, which must not exceed tail_tol. Throws ValidationError with
/// "not summable" for divergent sequences.
CGamma compute_C_gamma(const Theta& theta, Time truncation = 1 << 20, double tail_tol = 1e-9);

}  // namespace hybstab
