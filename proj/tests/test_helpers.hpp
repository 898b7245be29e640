#pragma once

#include <vector>

#include "lpt/diff_fn.hpp"
#include "lpt/oracle.hpp"
#include "lpt/rng.hpp"
#include "lpt/search_space.hpp"

namespace lpt::testing {

// Half-norm-squared objective over one block, for exact-value checks.
inline DifferentiableFn make_halfnorm_fn() {
    return DifferentiableFn({"T"}, [](auto& t, const std::vector<int>& b, const Batch&) {
        return t.scale(t.dot(b[0], b[0]), 0.5);
    });
}

inline DifferentiableFn make_constant_fn(double c) {
    return DifferentiableFn({"T"}, [c](auto& t, const std::vector<int>&, const Batch&) {
        Mat<double> m(1, 1);
        m.a[0] = c;
        return t.constant_cast(m);
    });
}

// Two-layer tanh MLP mean cross-entropy over a fixed batch. Blocks: {W}.
struct ToyMlp {
    int in = 2, hidden = 4, classes = 2;
    ParamLayout layout;

    ToyMlp(int in_, int hidden_, int classes_) : in(in_), hidden(hidden_), classes(classes_) {
        layout.add("w1", in, hidden);
        layout.add("b1", 1, hidden);
        layout.add("w2", hidden, classes);
        layout.add("b2", 1, classes);
    }

    ParamVector init(Rng& rng) const { return layout.init(rng); }

    DifferentiableFn loss_fn() const {
        const ParamLayout l = layout;
        return DifferentiableFn({"W"}, [l](auto& t, const std::vector<int>& b, const Batch& batch) {
            const int x = t.constant_cast(batch.x);
            const int h = t.tanh_(t.add_rowvec(t.matmul(x, l.view(t, b[0], "w1")),
                                               l.view(t, b[0], "b1")));
            const int logits = t.add_rowvec(t.matmul(h, l.view(t, b[0], "w2")),
                                            l.view(t, b[0], "b2"));
            return t.cross_entropy_mean(logits, batch.labels);
        });
    }
};

inline Batch random_batch(int n, int dim, int classes, Rng& rng) {
    Batch b;
    b.num_classes = classes;
    b.x = Mat<double>(n, dim);
    for (auto& v : b.x.a) v = rng.normal();
    for (int i = 0; i < n; ++i) {
        b.labels.push_back(static_cast<int>(rng.below(classes)));
        b.ids.push_back(i);
        b.corrupted.push_back(0);
    }
    return b;
}

} // namespace lpt::testing
