#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpt/errors.hpp"
#include "lpt/rng.hpp"

namespace lpt {

// Flat parameter block (any of W, A, E, C, X). Length is fixed at
// construction; every constructor and mutator rejects non-finite entries so
// hypergradient bugs surface at the first NaN instead of propagating.
class ParamVector {
public:
    ParamVector() = default;

    explicit ParamVector(std::vector<double> values) : v_(std::move(values)) {
        check_finite("construction");
    }

    static ParamVector zeros(std::size_t n) { return ParamVector(std::vector<double>(n, 0.0)); }

    static ParamVector randn(std::size_t n, Rng& rng, double stddev) {
        std::vector<double> v(n);
        for (auto& x : v) x = stddev * rng.normal();
        return ParamVector(std::move(v));
    }

    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double operator[](std::size_t i) const { return v_[i]; }
    std::span<const double> data() const { return v_; }
    const std::vector<double>& raw() const { return v_; }

    void set(std::size_t i, double x) {
        v_[i] = x;
        if (!std::isfinite(x)) throw NonFiniteValue("ParamVector::set: non-finite entry");
    }

    // this += a * x
    void add_scaled(double a, const ParamVector& x) {
        if (x.size() != size()) throw BadArgument("ParamVector::add_scaled: length mismatch");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
        check_finite("add_scaled");
    }

    void scale(double a) {
        for (auto& x : v_) x *= a;
        check_finite("scale");
    }

    double dot(const ParamVector& o) const {
        if (o.size() != size()) throw BadArgument("ParamVector::dot: length mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
        return s;
    }

    double norm2() const { return std::sqrt(dot(*this)); }

    // Round every entry through binary32, used by the 32-bit precision mode.
    void round_f32() {
        for (auto& x : v_) x = static_cast<double>(static_cast<float>(x));
    }

    // FNV-1a over the bit patterns; used by determinism and isolation checks.
    std::uint64_t hash64() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (double x : v_) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(x));
            __builtin_memcpy(&bits, &x, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffULL;
                h *= 1099511628211ULL;
            }
        }
        return h;
    }

    bool operator==(const ParamVector& o) const { return v_ == o.v_; }

private:
    void check_finite(const char* where) const {
        for (std::size_t i = 0; i < v_.size(); ++i) {
            if (!std::isfinite(v_[i])) {
                throw NonFiniteValue(std::string("ParamVector: non-finite entry at index ") +
                                     std::to_string(i) + " after " + where);
            }
        }
    }

    std::vector<double> v_;
};

} // namespace lpt
