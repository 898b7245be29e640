#pragma once

#include <utility>

#include "lpt/diff_fn.hpp"
#include "lpt/errors.hpp"
#include "lpt/param_vector.hpp"

namespace lpt {

// One-step unrolling configuration. xi_* are the inner-step learning rates;
// fd_epsilon_scale is the numerator of the finite-difference step
// alpha = scale / ||direction||. first_order drops every second-order term.
struct UnrollConfig {
    double xi_ln = 0.025;
    double xi_e = 0.025;
    double xi_x = 0.025;
    double fd_epsilon_scale = 0.01;
    bool first_order = false;
};

// Probe-evaluation counter; lets tests assert that first-order mode never
// touches a second-order term.
struct HypergradStats {
    int fd_probe_evals = 0;
};

// alpha = scale / ||v||_2. Directions with ~zero norm have no usable scale;
// callers catch ZeroDirection and drop the corresponding FD term.
inline double fd_coefficient(const ParamVector& v, double scale = 0.01) {
    const double n = v.norm2();
    if (n <= 1e-12) throw ZeroDirection("fd_coefficient: direction norm is ~0");
    return scale / n;
}

// W' = W - xi_ln * grad_W train(A, W): plain descent, no momentum, no decay.
inline ParamVector learner_unroll(const DifferentiableFn& train_fn, const ParamVector& arch,
                                  const ParamVector& w, const Batch& tr_batch, double xi_ln,
                                  Precision prec = Precision::f64) {
    if (xi_ln == 0.0) return w;
    auto r = value_and_grad(train_fn, {{"A", &arch}, {"W", &w}}, tr_batch, {"W"}, prec);
    ParamVector out = w;
    out.add_scaled(-xi_ln, r.grads.at("W"));
    if (prec == Precision::f32) out.round_f32();
    return out;
}

// Approximate grad_A of test(A, W*(A)) through the one-step unroll:
//   grad_A test(A, W') - xi_ln * [grad_A train(A, W+) - grad_A train(A, W-)] / (2 alpha)
// with W+- = W +- alpha * grad_W' test(A, W') and alpha from fd_coefficient.
// `train_fn` and `test_fn` both expose blocks {A, W}; `test_fn` is the
// normalized selection-weighted test loss in the engine and any smooth
// objective in oracle checks. In first-order mode only the first term is
// evaluated.
inline ParamVector arch_hypergradient(const DifferentiableFn& train_fn,
                                      const DifferentiableFn& test_fn, const ParamVector& arch,
                                      const ParamVector& w, const Batch& bank_batch,
                                      const Batch& tr_batch, const UnrollConfig& cfg,
                                      Precision prec = Precision::f64,
                                      HypergradStats* stats = nullptr) {
    const ParamVector w1 = learner_unroll(train_fn, arch, w, tr_batch, cfg.xi_ln, prec);
    if (cfg.first_order || cfg.xi_ln == 0.0) {
        auto r = value_and_grad(test_fn, {{"A", &arch}, {"W", &w1}}, bank_batch, {"A"}, prec);
        return std::move(r.grads.at("A"));
    }

    auto r = value_and_grad(test_fn, {{"A", &arch}, {"W", &w1}}, bank_batch, {"A", "W"}, prec);
    ParamVector grad = std::move(r.grads.at("A"));
    const ParamVector& v = r.grads.at("W");
    double alpha = 0.0;
    try {
        alpha = fd_coefficient(v, cfg.fd_epsilon_scale);
    } catch (const ZeroDirection&) {
        return grad; // FD term is exactly zero
    }
    ParamVector w_plus = w, w_minus = w;
    w_plus.add_scaled(alpha, v);
    w_minus.add_scaled(-alpha, v);
    auto gp = value_and_grad(train_fn, {{"A", &arch}, {"W", &w_plus}}, tr_batch, {"A"}, prec);
    auto gm = value_and_grad(train_fn, {{"A", &arch}, {"W", &w_minus}}, tr_batch, {"A"}, prec);
    if (stats) stats->fd_probe_evals += 2;
    ParamVector second = std::move(gp.grads.at("A"));
    second.add_scaled(-1.0, gm.grads.at("A"));
    grad.add_scaled(-cfg.xi_ln / (2.0 * alpha), second);
    if (prec == Precision::f32) grad.round_f32();
    return grad;
}

// One-step descent of E and X on the stage II loss (blocks {E, X, C}); the
// creator block is held constant.
inline std::pair<ParamVector, ParamVector> tester_unroll(const DifferentiableFn& stage2_fn,
                                                         const ParamVector& e,
                                                         const ParamVector& x,
                                                         const ParamVector& c,
                                                         const Batch& bank_batch,
                                                         const UnrollConfig& cfg,
                                                         Precision prec = Precision::f64) {
    if (cfg.xi_e == 0.0 && cfg.xi_x == 0.0) return {e, x};
    auto r = value_and_grad(stage2_fn, {{"E", &e}, {"X", &x}, {"C", &c}}, bank_batch, {"E", "X"},
                            prec);
    ParamVector e1 = e, x1 = x;
    e1.add_scaled(-cfg.xi_e, r.grads.at("E"));
    x1.add_scaled(-cfg.xi_x, r.grads.at("X"));
    if (prec == Precision::f32) {
        e1.round_f32();
        x1.round_f32();
    }
    return {std::move(e1), std::move(x1)};
}

namespace detail {

// Central-difference probe of the mixed second derivative:
//   grad2_{C,block} bank(E,X,C) * u
//   ~= [grad_C bank(..block+alpha*u..) - grad_C bank(..block-alpha*u..)] / (2 alpha)
// Returns zeros when the direction is degenerate.
inline ParamVector mixed_fd_probe(const DifferentiableFn& bank_fn, const ParamVector& e,
                                  const ParamVector& x, const ParamVector& c,
                                  const std::string& which, const ParamVector& u, double scale,
                                  const Batch& bank_batch, Precision prec,
                                  HypergradStats* stats) {
    double alpha = 0.0;
    try {
        alpha = fd_coefficient(u, scale);
    } catch (const ZeroDirection&) {
        return ParamVector::zeros(c.size());
    }
    ParamVector plus = which == "E" ? e : x;
    ParamVector minus = plus;
    plus.add_scaled(alpha, u);
    minus.add_scaled(-alpha, u);
    const ParamVector& e_plus = which == "E" ? plus : e;
    const ParamVector& e_minus = which == "E" ? minus : e;
    const ParamVector& x_plus = which == "E" ? x : plus;
    const ParamVector& x_minus = which == "E" ? x : minus;
    auto gp = value_and_grad(bank_fn, {{"E", &e_plus}, {"X", &x_plus}, {"C", &c}}, bank_batch,
                             {"C"}, prec);
    auto gm = value_and_grad(bank_fn, {{"E", &e_minus}, {"X", &x_minus}, {"C", &c}}, bank_batch,
                             {"C"}, prec);
    if (stats) stats->fd_probe_evals += 2;
    ParamVector diff = std::move(gp.grads.at("C"));
    diff.add_scaled(-1.0, gm.grads.at("C"));
    diff.scale(1.0 / (2.0 * alpha));
    return diff;
}

} // namespace detail

// grad_C of the validation loss at the unrolled tester, via the two
// finite-difference cross-derivative terms:
//   -gamma xi_E [grad_C bank(E+,X,C) - grad_C bank(E-,X,C)] / (2 alpha_E)
//   -gamma xi_X [grad_C bank(E,X+,C) - grad_C bank(E,X-,C)] / (2 alpha_X)
// with E+- = E +- alpha_E grad_E' val(E',X') and X+- likewise. `bank_fn` is
// the un-scaled selection-weighted bank loss, blocks {E, X, C}; `val_fn` has
// blocks {E, X}.
inline ParamVector creator_grad_val(const DifferentiableFn& bank_fn,
                                    const DifferentiableFn& val_fn, const ParamVector& e,
                                    const ParamVector& x, const ParamVector& c,
                                    const ParamVector& e1, const ParamVector& x1,
                                    const Batch& bank_batch, const Batch& val_batch,
                                    double gamma, const UnrollConfig& cfg,
                                    Precision prec = Precision::f64,
                                    HypergradStats* stats = nullptr) {
    ParamVector grad = ParamVector::zeros(c.size());
    if (gamma == 0.0 || (cfg.xi_e == 0.0 && cfg.xi_x == 0.0)) return grad;
    auto rv = value_and_grad(val_fn, {{"E", &e1}, {"X", &x1}}, val_batch, {"E", "X"}, prec);
    if (cfg.xi_e != 0.0) {
        ParamVector term = detail::mixed_fd_probe(bank_fn, e, x, c, "E", rv.grads.at("E"),
                                                  cfg.fd_epsilon_scale, bank_batch, prec, stats);
        grad.add_scaled(-gamma * cfg.xi_e, term);
    }
    if (cfg.xi_x != 0.0) {
        ParamVector term = detail::mixed_fd_probe(bank_fn, e, x, c, "X", rv.grads.at("X"),
                                                  cfg.fd_epsilon_scale, bank_batch, prec, stats);
        grad.add_scaled(-gamma * cfg.xi_x, term);
    }
    if (prec == Precision::f32) grad.round_f32();
    return grad;
}

// grad_C of the normalized difficulty N(C)/D(C), where N = sum_d f(d,C,E')
// ell_d and D = sum_d f(d,C,E'). Both numerator and denominator carry the
// direct grad_C f path (E' fixed) plus the indirect (dE'/dC) path, the
// latter approximated by the same mixed finite-difference probe with
// directions grad_E' N and grad_E' D. `num_fn`/`den_fn` expose blocks
// {C, E} and are evaluated at (C, E'); `bank_fn` as in creator_grad_val.
inline ParamVector creator_grad_difficulty(const DifferentiableFn& num_fn,
                                           const DifferentiableFn& den_fn,
                                           const DifferentiableFn& bank_fn, const ParamVector& e,
                                           const ParamVector& x, const ParamVector& c,
                                           const ParamVector& e1, const Batch& bank_batch,
                                           double gamma, const UnrollConfig& cfg,
                                           Precision prec = Precision::f64,
                                           HypergradStats* stats = nullptr) {
    auto rd = value_and_grad(den_fn, {{"C", &c}, {"E", &e1}}, bank_batch, {"C", "E"}, prec);
    const double den = rd.loss;
    if (den <= kCardEpsilon)
        throw DegenerateTest("creator difficulty: soft test cardinality is ~0");
    auto rn = value_and_grad(num_fn, {{"C", &c}, {"E", &e1}}, bank_batch, {"C", "E"}, prec);
    const double num = rn.loss;

    ParamVector grad_num = std::move(rn.grads.at("C"));
    ParamVector grad_den = std::move(rd.grads.at("C"));
    if (gamma != 0.0 && cfg.xi_e != 0.0) {
        grad_num.add_scaled(-gamma * cfg.xi_e,
                            detail::mixed_fd_probe(bank_fn, e, x, c, "E", rn.grads.at("E"),
                                                   cfg.fd_epsilon_scale, bank_batch, prec, stats));
        grad_den.add_scaled(-gamma * cfg.xi_e,
                            detail::mixed_fd_probe(bank_fn, e, x, c, "E", rd.grads.at("E"),
                                                   cfg.fd_epsilon_scale, bank_batch, prec, stats));
    }

    // quotient rule: (N/D)' = N'/D - N D'/D^2
    ParamVector grad = std::move(grad_num);
    grad.scale(1.0 / den);
    grad.add_scaled(-num / (den * den), grad_den);
    if (prec == Precision::f32) grad.round_f32();
    return grad;
}

struct CreatorGrad {
    ParamVector ascent; // gradient of difficulty/|sigma| - lambda * val, for ascent
    bool difficulty_degenerate = false;
};

// Gradient the creator ascends: difficulty term minus lambda times the
// validation term. A degenerate difficulty path (soft cardinality ~0) is
// skipped rather than fatal; the validation path still applies.
inline CreatorGrad creator_total_grad(const DifferentiableFn& num_fn,
                                      const DifferentiableFn& den_fn,
                                      const DifferentiableFn& bank_fn,
                                      const DifferentiableFn& val_fn, const ParamVector& e,
                                      const ParamVector& x, const ParamVector& c,
                                      const ParamVector& e1, const ParamVector& x1,
                                      const Batch& bank_batch, const Batch& val_batch,
                                      double gamma, double lambda, const UnrollConfig& cfg,
                                      Precision prec = Precision::f64,
                                      HypergradStats* stats = nullptr) {
    CreatorGrad out;
    try {
        out.ascent = creator_grad_difficulty(num_fn, den_fn, bank_fn, e, x, c, e1, bank_batch,
                                             gamma, cfg, prec, stats);
    } catch (const DegenerateTest&) {
        out.ascent = ParamVector::zeros(c.size());
        out.difficulty_degenerate = true;
    }
    if (lambda != 0.0) {
        const ParamVector gv = creator_grad_val(bank_fn, val_fn, e, x, c, e1, x1, bank_batch,
                                                val_batch, gamma, cfg, prec, stats);
        out.ascent.add_scaled(-lambda, gv);
    }
    if (prec == Precision::f32) out.ascent.round_f32();
    return out;
}

} // namespace lpt
