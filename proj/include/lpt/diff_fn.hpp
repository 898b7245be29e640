#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lpt/mat.hpp"
#include "lpt/param_vector.hpp"
#include "lpt/tape.hpp"

namespace lpt {

// Below this soft test cardinality sum(f) the normalized test loss is
// undefined; the step that needed it is skipped.
inline constexpr double kCardEpsilon = 1e-6;

// One mini-batch of examples, materialized as constants for graph building.
struct Batch {
    Mat<double> x;                  // B x dim
    std::vector<int> labels;        // B
    std::vector<int> ids;           // dataset ids, B
    std::vector<uint8_t> corrupted; // provenance flags, B
    int num_classes = 0;

    int size() const { return x.rows; }
};

using NamedBlocks = std::vector<std::pair<std::string, const ParamVector*>>;

// A scalar objective over named flat parameter blocks. The builder is stored
// twice, instantiated for double (gradients) and Dual (exact Hessian-vector
// products); evaluation is deterministic given identical blocks, batch, and
// tape precision.
class DifferentiableFn {
public:
    template <class Builder>
    DifferentiableFn(std::vector<std::string> block_names, Builder builder)
        : names_(std::move(block_names)), f64_(builder), fdual_(builder) {}

    struct first_order_only_t {};
    static constexpr first_order_only_t first_order_only{};

    // For objectives that cannot run on dual numbers; hvp_exact will refuse.
    template <class Builder>
    DifferentiableFn(first_order_only_t, std::vector<std::string> block_names, Builder builder)
        : names_(std::move(block_names)), f64_(builder) {}

    const std::vector<std::string>& block_names() const { return names_; }

    bool twice_differentiable() const { return static_cast<bool>(fdual_); }

    int build(Tape<double>& tape, const std::vector<int>& block_ids, const Batch& batch) const {
        return f64_(tape, block_ids, batch);
    }
    int build(Tape<Dual>& tape, const std::vector<int>& block_ids, const Batch& batch) const {
        if (!fdual_) throw NotDifferentiableTwice("objective has no second-order path");
        return fdual_(tape, block_ids, batch);
    }

private:
    std::vector<std::string> names_;
    std::function<int(Tape<double>&, const std::vector<int>&, const Batch&)> f64_;
    std::function<int(Tape<Dual>&, const std::vector<int>&, const Batch&)> fdual_;
};

struct EvalResult {
    double loss = 0.0;
    std::map<std::string, ParamVector> grads;
};

namespace detail {

inline const ParamVector& find_block(const NamedBlocks& blocks, const std::string& name) {
    for (const auto& [n, p] : blocks)
        if (n == name) return *p;
    throw BadArgument("unknown block name '" + name + "'");
}

template <class S>
Mat<S> column_from(const ParamVector& p) {
    Mat<S> m(static_cast<int>(p.size()), 1);
    for (std::size_t i = 0; i < p.size(); ++i) m.a[i] = S(p[i]);
    return m;
}

} // namespace detail

// Reverse-mode value and gradients for the named blocks in `wrt`. Blocks not
// named receive no gradient entry. Throws NonFiniteLoss if the loss is not
// finite, BadArgument for unknown names.
inline EvalResult value_and_grad(const DifferentiableFn& f, const NamedBlocks& blocks,
                                 const Batch& batch, const std::vector<std::string>& wrt,
                                 Precision prec = Precision::f64) {
    const auto& names = f.block_names();
    for (const auto& w : wrt)
        if (std::find(names.begin(), names.end(), w) == names.end())
            throw BadArgument("wrt references unknown block '" + w + "'");

    Tape<double> tape(prec);
    std::vector<int> ids;
    ids.reserve(names.size());
    for (const auto& n : names) {
        const ParamVector& p = detail::find_block(blocks, n);
        auto m = detail::column_from<double>(p);
        const bool tracked = std::find(wrt.begin(), wrt.end(), n) != wrt.end();
        ids.push_back(tracked ? tape.leaf(std::move(m)) : tape.constant(std::move(m)));
    }
    const int root = f.build(tape, ids, batch);

    EvalResult out;
    out.loss = tape.scalar(root);
    if (!std::isfinite(out.loss)) throw NonFiniteLoss("loss is not finite");
    if (!wrt.empty()) {
        tape.backward(root);
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (std::find(wrt.begin(), wrt.end(), names[i]) == wrt.end()) continue;
            Mat<double> g = tape.grad_of(ids[i]);
            out.grads.emplace(names[i], ParamVector(std::move(g.a)));
        }
    }
    return out;
}

inline double evaluate(const DifferentiableFn& f, const NamedBlocks& blocks, const Batch& batch,
                       Precision prec = Precision::f64) {
    return value_and_grad(f, blocks, batch, {}, prec).loss;
}

// Exact (d^2 f / d block^2) * v by forward-over-reverse: the wrt block runs on
// dual numbers seeded with direction v; the dual part of its gradient is H*v.
// Used only by oracle-grade checks, never inside the search loop.
inline ParamVector hvp_exact(const DifferentiableFn& f, const NamedBlocks& blocks,
                             const std::string& wrt, const ParamVector& v, const Batch& batch) {
    const ParamVector& block = detail::find_block(blocks, wrt);
    if (v.size() != block.size()) throw BadArgument("hvp_exact: direction length mismatch");

    const auto& names = f.block_names();
    if (std::find(names.begin(), names.end(), wrt) == names.end())
        throw BadArgument("hvp_exact: unknown block '" + wrt + "'");

    Tape<Dual> tape(Precision::f64);
    std::vector<int> ids;
    int wrt_id = -1;
    for (const auto& n : names) {
        const ParamVector& p = detail::find_block(blocks, n);
        Mat<Dual> m(static_cast<int>(p.size()), 1);
        if (n == wrt) {
            for (std::size_t i = 0; i < p.size(); ++i) m.a[i] = Dual(p[i], v[i]);
            wrt_id = tape.leaf(std::move(m));
            ids.push_back(wrt_id);
        } else {
            for (std::size_t i = 0; i < p.size(); ++i) m.a[i] = Dual(p[i], 0.0);
            ids.push_back(tape.constant(std::move(m)));
        }
    }
    const int root = f.build(tape, ids, batch);
    if (!std::isfinite(value_of(tape.scalar_raw(root))))
        throw NonFiniteLoss("hvp_exact: loss is not finite");
    tape.backward(root);

    Mat<Dual> g = tape.grad_of(wrt_id);
    std::vector<double> hv(g.a.size());
    for (std::size_t i = 0; i < g.a.size(); ++i) hv[i] = g.a[i].d;
    return ParamVector(std::move(hv));
}

} // namespace lpt
