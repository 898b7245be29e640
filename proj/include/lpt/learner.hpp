#pragma once

#include <numeric>
#include <vector>

#include "lpt/diff_fn.hpp"
#include "lpt/optim.hpp"
#include "lpt/search_space.hpp"

namespace lpt {

struct LearnerState {
    ParamVector arch;    // A
    ParamVector weights; // W
    SgdMomentum opt_w;
};

// Mean cross-entropy on a learner-train batch. Blocks: {A, W}.
inline DifferentiableFn make_train_loss_fn(const LearnerNet& net) {
    return DifferentiableFn({"A", "W"}, [&net](auto& t, const std::vector<int>& b, const Batch& batch) {
        return t.cross_entropy_mean(net.logits(t, b[0], b[1], batch), batch.labels);
    });
}

// Sum over the bank batch of f(d) * ce(d) with fixed selection weights.
// Blocks: {A, W}; the batch must line up with `weights`.
inline DifferentiableFn make_weighted_test_loss_fn(const LearnerNet& net,
                                                   std::vector<double> weights) {
    return DifferentiableFn(
        {"A", "W"}, [&net, weights = std::move(weights)](auto& t, const std::vector<int>& b,
                                                         const Batch& batch) {
            if (static_cast<int>(weights.size()) != batch.size())
                throw BadArgument("weighted test loss: weight count != batch size");
            Mat<double> w(batch.size(), 1);
            w.a = weights;
            const int ce = t.cross_entropy_rows(net.logits(t, b[0], b[1], batch), batch.labels);
            return t.dot(t.constant_cast(w), ce);
        });
}

// Weighted test loss divided by the soft cardinality sum(f). Throws
// DegenerateTest at construction when sum(f) <= kCardEpsilon.
inline DifferentiableFn make_normalized_test_loss_fn(const LearnerNet& net,
                                                     std::vector<double> weights) {
    const double card = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (card <= kCardEpsilon)
        throw DegenerateTest("normalized test loss: selection weights sum to ~0");
    return DifferentiableFn(
        {"A", "W"}, [&net, weights = std::move(weights), card](auto& t, const std::vector<int>& b,
                                                               const Batch& batch) {
            if (static_cast<int>(weights.size()) != batch.size())
                throw BadArgument("normalized test loss: weight count != batch size");
            Mat<double> w(batch.size(), 1);
            w.a = weights;
            const int ce = t.cross_entropy_rows(net.logits(t, b[0], b[1], batch), batch.labels);
            return t.scale(t.dot(t.constant_cast(w), ce), 1.0 / card);
        });
}

inline double train_loss(const LearnerNet& net, const ParamVector& arch, const ParamVector& w,
                         const Batch& batch, Precision prec = Precision::f64) {
    return evaluate(make_train_loss_fn(net), {{"A", &arch}, {"W", &w}}, batch, prec);
}

inline double weighted_test_loss(const LearnerNet& net, const ParamVector& arch,
                                 const ParamVector& w, const std::vector<double>& weights,
                                 const Batch& bank, Precision prec = Precision::f64) {
    return evaluate(make_weighted_test_loss_fn(net, weights), {{"A", &arch}, {"W", &w}}, bank,
                    prec);
}

inline double normalized_test_loss(const LearnerNet& net, const ParamVector& arch,
                                   const ParamVector& w, const std::vector<double>& weights,
                                   const Batch& bank, Precision prec = Precision::f64) {
    return evaluate(make_normalized_test_loss_fn(net, weights), {{"A", &arch}, {"W", &w}}, bank,
                    prec);
}

// Per-example cross-entropy over a bank batch; constants for the creator's
// difficulty objective.
inline std::vector<double> per_example_losses(const LearnerNet& net, const ParamVector& arch,
                                              const ParamVector& w, const Batch& batch,
                                              Precision prec = Precision::f64) {
    Tape<double> t(prec);
    const int a_id = t.constant(detail::column_from<double>(arch));
    const int w_id = t.constant(detail::column_from<double>(w));
    const int ce = t.cross_entropy_rows(net.logits(t, a_id, w_id, batch), batch.labels);
    return t.val(ce).a;
}

// Algorithm step 4: one SGD-momentum step of W on the training batch, with
// the cosine-decayed learning rate. A is untouched.
inline double weights_step(LearnerState& state, const LearnerNet& net, const Batch& batch,
                           Precision prec = Precision::f64) {
    auto r = value_and_grad(make_train_loss_fn(net), {{"A", &state.arch}, {"W", &state.weights}},
                            batch, {"W"}, prec);
    state.opt_w.step(state.weights, r.grads.at("W"));
    if (prec == Precision::f32) {
        state.weights.round_f32();
        state.opt_w.round_f32();
    }
    return r.loss;
}

} // namespace lpt
