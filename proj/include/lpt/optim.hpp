#pragma once

#include <cmath>
#include <cstdint>

#include "lpt/errors.hpp"
#include "lpt/param_vector.hpp"

namespace lpt {

struct CosineSchedule {
    double lr0 = 0.025;
    double lr_min = 0.0;
    long total_steps = 1;

    double at(long t) const {
        if (total_steps <= 0) return lr0;
        const double frac = static_cast<double>(std::min(t, total_steps)) / total_steps;
        return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
    }
};

// SGD with momentum and coupled weight decay, cosine-decayed learning rate.
class SgdMomentum {
public:
    SgdMomentum() = default;
    SgdMomentum(std::size_t n, double momentum, double weight_decay, CosineSchedule sched)
        : momentum_(momentum), weight_decay_(weight_decay), sched_(sched),
          buf_(ParamVector::zeros(n)) {}

    void step(ParamVector& theta, const ParamVector& grad) {
        const double lr = sched_.at(t_);
        ++t_;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i] + weight_decay_ * theta[i];
            const double b = momentum_ * buf_[i] + g;
            buf_.set(i, b);
            theta.set(i, theta[i] - lr * b);
        }
    }

    double current_lr() const { return sched_.at(t_); }
    long steps_taken() const { return t_; }

    void round_f32() { buf_.round_f32(); }
    std::uint64_t hash64() const { return buf_.hash64() ^ (0x9e3779b97f4a7c15ULL * (t_ + 1)); }

private:
    double momentum_ = 0.9;
    double weight_decay_ = 0.0;
    CosineSchedule sched_;
    ParamVector buf_;
    long t_ = 0;
};

// Adam with coupled (L2-style) weight decay. `ascend` flips the raw gradient
// for objectives that are maximized; decay still pulls parameters toward 0.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double lr, double beta1, double beta2, double weight_decay,
         double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), wd_(weight_decay), eps_(eps),
          m_(ParamVector::zeros(n)), v_(ParamVector::zeros(n)) {}

    void step(ParamVector& theta, const ParamVector& grad, bool ascend = false) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = (ascend ? -grad[i] : grad[i]) + wd_ * theta[i];
            const double m = b1_ * m_[i] + (1.0 - b1_) * g;
            const double v = b2_ * v_[i] + (1.0 - b2_) * g * g;
            m_.set(i, m);
            v_.set(i, v);
            theta.set(i, theta[i] - lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
        }
    }

    void round_f32() {
        m_.round_f32();
        v_.round_f32();
    }
    std::uint64_t hash64() const {
        return m_.hash64() ^ (v_.hash64() * 1099511628211ULL) ^
               (0x9e3779b97f4a7c15ULL * (t_ + 1));
    }

private:
    double lr_ = 3e-4;
    double b1_ = 0.9;
    double b2_ = 0.999;
    double wd_ = 0.0;
    double eps_ = 1e-8;
    ParamVector m_, v_;
    long t_ = 0;
};

} // namespace lpt
