#include "hybstab/certificate/theta.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybstab {

Theta Theta::exponential(double alpha) {
    if (!std::isfinite(alpha)) throw ValidationError("theta.alpha", "must be finite");
    Theta t;
    t.form_ = Form::exponential;
    t.param_ = alpha;
    return t;
}

Theta Theta::geometric(double base) {
    if (!std::isfinite(base) || !(base > 0.0)) throw ValidationError("theta.base", "must be positive and finite");
    Theta t;
    t.form_ = Form::geometric;
    t.param_ = base;
    return t;
}

double Theta::alpha() const { return form_ == Form::geometric ? std::log(param_) : param_; }

Theta Theta::power(double p) {
    if (!std::isfinite(p)) throw ValidationError("theta.p", "must be finite");
    Theta t;
    t.form_ = Form::power;
    t.param_ = p;
    return t;
}

Theta Theta::table(std::vector<double> values, double tail_bound) {
    if (values.empty()) throw ValidationError("theta.table", "must have at least one entry");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
            throw ValidationError("theta.table[" + std::to_string(i) + "]", "must be positive and finite");
        }
    }
    if (!(tail_bound >= 0.0)) throw ValidationError("theta.tail_bound", "must be >= 0");
    Theta t;
    t.form_ = Form::table;
    t.values_ = std::move(values);
    t.tail_ = tail_bound;
    return t;
}

double Theta::operator()(Time t) const {
    if (t < 0) throw DomainError("theta queried at negative time " + std::to_string(t));
    switch (form_) {
        case Form::exponential: return std::exp(-param_ * static_cast<double>(t));
        case Form::geometric: return std::pow(param_, -static_cast<double>(t));
        case Form::power: return std::pow(static_cast<double>(t) + 1.0, -param_);
        case Form::table:
            if (t >= static_cast<Time>(values_.size())) {
                throw HorizonError("theta table has " + std::to_string(values_.size()) +
                                   " entries, queried at t=" + std::to_string(t));
            }
            return values_[static_cast<std::size_t>(t)];
    }
    return 0.0;
}

double Theta::inverse(Time t) const {
    if (t < 0) throw DomainError("theta queried at negative time " + std::to_string(t));
    switch (form_) {
        case Form::exponential: return std::exp(param_ * static_cast<double>(t));
        case Form::geometric: return std::pow(param_, static_cast<double>(t));
        default: return 1.0 / (*this)(t);
    }
}

std::string Theta::describe() const {
    std::ostringstream os;
    os.precision(12);
    switch (form_) {
        case Form::exponential: os << "exp(-" << param_ << " t)"; break;
        case Form::geometric: os << param_ << "^-t"; break;
        case Form::power: os << "(t+1)^-" << param_; break;
        case Form::table: os << "table[" << values_.size() << "] + tail " << tail_; break;
    }
    return os.str();
}

CGamma compute_C_gamma(const Theta& theta, Time truncation, double tail_tol) {
    CGamma out;
    switch (theta.form()) {
        case Theta::Form::exponential: {
            const double a = theta.alpha();
            if (!(a > 0.0)) {
                throw ValidationError("theta", "not summable: exp(-alpha t) needs alpha > 0, got " + std::to_string(a));
            }
            out.C = 1.0 / (-std::expm1(-a));
            out.gamma = 1.0;
            return out;
        }
        case Theta::Form::geometric: {
            const double b = theta.base();
            if (!(b > 1.0)) {
                throw ValidationError("theta", "not summable: base^-t needs base > 1, got " + std::to_string(b));
            }
            out.C = b / (b - 1.0);
            out.gamma = 1.0;
            return out;
        }
        case Theta::Form::power: {
            const double p = theta.exponent();
            if (!(p > 1.0)) {
                throw ValidationError("theta", "not summable: (t+1)^-p needs p > 1, got " + std::to_string(p));
            }
            out.C = std::riemann_zeta(p);
            out.gamma = 1.0;
            return out;
        }
        case Theta::Form::table: {
            const auto& v = theta.values();
            const std::size_t keep = std::min<std::size_t>(v.size(), static_cast<std::size_t>(std::max<Time>(truncation, 1)));
            double head = 0.0;
            double folded = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) (i < keep ? head : folded) += v[i];
            out.closed_form = false;
            out.tail = folded + theta.tail_bound();
            if (!std::isfinite(out.tail)) throw ValidationError("theta", "not summable: infinite tail bound");
            if (out.tail > tail_tol) {
                throw ValidationError("theta", "tail bound " + std::to_string(out.tail) + " exceeds tolerance " +
                                                   std::to_string(tail_tol));
            }
            out.C = head + out.tail;
            out.gamma = std::max(*std::max_element(v.begin(), v.end()), theta.tail_bound());
            return out;
        }
    }
    return out;
}

}  // namespace hybstab
