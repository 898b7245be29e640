#pragma once

#include <cmath>

namespace lpt {

// First-order dual number. Running the reverse-mode tape on Dual values gives
// forward-over-reverse second derivatives: seed the dual part of one block
// with a direction v and the dual part of its gradient is the exact H*v.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {} // NOLINT(google-explicit-constructor)
    Dual(double value, double deriv) : v(value), d(deriv) {}

    Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.v;
    return {a.v * inv, (a.d - a.v * inv * b.d) * inv};
}
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

// Scalar accessors shared by double and Dual so tape code stays generic.
inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline bool finite_scalar(double x) { return std::isfinite(x); }
inline bool finite_scalar(const Dual& x) { return std::isfinite(x.v) && std::isfinite(x.d); }

inline double ad_tanh(double x) { return std::tanh(x); }
inline Dual ad_tanh(const Dual& x) {
    const double t = std::tanh(x.v);
    return {t, x.d * (1.0 - t * t)};
}

inline double ad_exp(double x) { return std::exp(x); }
inline Dual ad_exp(const Dual& x) {
    const double e = std::exp(x.v);
    return {e, x.d * e};
}

inline double ad_log(double x) { return std::log(x); }
inline Dual ad_log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }

inline double ad_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
inline Dual ad_sigmoid(const Dual& x) {
    const double s = ad_sigmoid(x.v);
    return {s, x.d * s * (1.0 - s)};
}

} // namespace lpt
