#include "hybstab/core/class_k.hpp"

#include "hybstab/core/types.hpp"

#include <cmath>
#include <sstream>

namespace hybstab {

ClassK::ClassK(Form form, double c, double p) : form_(form), c_(c), p_(p) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("scale", "class-K scale must be positive");
    if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("exponent", "class-K exponent must be positive");
}

ClassK ClassK::linear(double c) { return ClassK(Form::linear, c, 1.0); }
ClassK ClassK::power(double c, double p) { return ClassK(Form::power, c, p); }
ClassK ClassK::saturating(double c) { return ClassK(Form::saturating, c, 1.0); }

double ClassK::operator()(double r) const {
    switch (form_) {
        case Form::linear: return c_ * r;
        case Form::power: return c_ * std::pow(r, p_);
        case Form::saturating: return c_ * r / (1.0 + r);
    }
    return 0.0;
}

double ClassK::inverse(double v) const {
    switch (form_) {
        case Form::linear: return v / c_;
        case Form::power: return std::pow(v / c_, 1.0 / p_);
        case Form::saturating: return v >= c_ ? kInf : v / (c_ - v);
    }
    return 0.0;
}

std::string ClassK::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (form_) {
        case Form::linear: os << c_ << "*r"; break;
        case Form::power: os << c_ << "*r^" << p_; break;
        case Form::saturating: os << c_ << "*r/(1+r)"; break;
    }
    return os.str();
}

bool ClassK::sampled_monotone(double r_max, int points) const {
    if ((*this)(0.0) != 0.0) return false;
    double prev = 0.0;
    for (int k = 0; k < points; ++k) {
        const double r = r_max * std::pow(10.0, -6.0 * (points - 1 - k) / (points - 1));
        const double v = (*this)(r);
        if (!(v > prev)) return false;
        prev = v;
    }
    return true;
}

}  // namespace hybstab
