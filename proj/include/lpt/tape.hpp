#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lpt/dual.hpp"
#include "lpt/errors.hpp"
#include "lpt/mat.hpp"

namespace lpt {

enum class Precision { f64, f32 };

// Geometry of a flattened image activation: entry (ch, y, x) of one example
// lives at ch*h*w + y*w + x within the row.
struct ImageGeom {
    int h = 0;
    int w = 0;
    int c = 0;
    int plane() const { return h * w; }
    int flat() const { return h * w * c; }
};

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order; backward() walks them in reverse. Instantiated with S=double for
// ordinary gradients and S=Dual for forward-over-reverse Hessian products.
//
// In f32 mode every node value (and finalized gradient) is rounded through
// binary32, emulating a single-precision run while keeping one code path.
// All reductions are sequential by index, so results are bit-reproducible.
template <class S>
class Tape {
public:
    explicit Tape(Precision prec = Precision::f64) : round32_(prec == Precision::f32) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- node creation -----------------------------------------------------

    int constant(Mat<S> m) { return push(std::move(m), false, nullptr, "constant"); }

    int constant_cast(const Mat<double>& m) {
        Mat<S> out(m.rows, m.cols);
        for (int i = 0; i < m.size(); ++i) out.a[i] = S(m.a[i]);
        return push(std::move(out), false, nullptr, "constant");
    }

    int leaf(Mat<S> m) { return push(std::move(m), true, nullptr, "leaf"); }

    // Contiguous slice of a flat (n x 1) node, reshaped to rows x cols.
    int view(int src, int offset, int rows, int cols) {
        const Mat<S>& s = val(src);
        if (offset < 0 || offset + rows * cols > s.size())
            throw BadArgument("tape view: slice out of range");
        Mat<S> out(rows, cols);
        for (int i = 0; i < rows * cols; ++i) out.a[i] = s.a[offset + i];
        return push(std::move(out), nodes_[src].needs_grad,
                    [src, offset](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        if (!t.wants_grad(src)) return;
                        Mat<S>& gs = t.ensure_grad(src);
                        for (int i = 0; i < g.size(); ++i) gs.a[offset + i] += g.a[i];
                    },
                    "view");
    }

    // Row gather from a flat (n x 1) node: out[k] = src[idx[k]].
    int gather(int src, std::vector<int> idx) {
        const Mat<S>& s = val(src);
        Mat<S> out(static_cast<int>(idx.size()), 1);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] < 0 || idx[k] >= s.size()) throw BadArgument("tape gather: index out of range");
            out.a[k] = s.a[idx[k]];
        }
        return push(std::move(out), nodes_[src].needs_grad,
                    [src, idx = std::move(idx)](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        if (!t.wants_grad(src)) return;
                        Mat<S>& gs = t.ensure_grad(src);
                        for (std::size_t k = 0; k < idx.size(); ++k) gs.a[idx[k]] += g.a[k];
                    },
                    "gather");
    }

    int add(int a, int b) {
        const Mat<S>&x = val(a), &y = val(b);
        require_same_shape(x, y, "add");
        Mat<S> out = x;
        for (int i = 0; i < out.size(); ++i) out.a[i] += y.a[i];
        return push(std::move(out), wants_grad(a) || wants_grad(b),
                    [a, b](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        t.accumulate(a, g, [](const S& gi, int) { return gi; });
                        t.accumulate(b, g, [](const S& gi, int) { return gi; });
                    },
                    "add");
    }

    int sub(int a, int b) {
        const Mat<S>&x = val(a), &y = val(b);
        require_same_shape(x, y, "sub");
        Mat<S> out = x;
        for (int i = 0; i < out.size(); ++i) out.a[i] -= y.a[i];
        return push(std::move(out), wants_grad(a) || wants_grad(b),
                    [a, b](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        t.accumulate(a, g, [](const S& gi, int) { return gi; });
                        t.accumulate(b, g, [](const S& gi, int) { return -gi; });
                    },
                    "sub");
    }

    int hadamard(int a, int b) {
        const Mat<S>&x = val(a), &y = val(b);
        require_same_shape(x, y, "hadamard");
        Mat<S> out = x;
        for (int i = 0; i < out.size(); ++i) out.a[i] *= y.a[i];
        return push(std::move(out), wants_grad(a) || wants_grad(b),
                    [a, b](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const Mat<S>&xv = t.val(a), &yv = t.val(b);
                        t.accumulate(a, g, [&yv](const S& gi, int i) { return gi * yv.a[i]; });
                        t.accumulate(b, g, [&xv](const S& gi, int i) { return gi * xv.a[i]; });
                    },
                    "hadamard");
    }

    int scale(int a, double c) {
        Mat<S> out = val(a);
        for (auto& v : out.a) v = v * S(c);
        return push(std::move(out), wants_grad(a),
                    [a, c](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        t.accumulate(a, g, [c](const S& gi, int) { return gi * S(c); });
                    },
                    "scale");
    }

    // out = s * m, where s is a 1x1 node.
    int mul_scalar_node(int m, int s) {
        require_scalar(s, "mul_scalar_node");
        const S sv = val(s).a[0];
        Mat<S> out = val(m);
        for (auto& v : out.a) v = v * sv;
        return push(std::move(out), wants_grad(m) || wants_grad(s),
                    [m, s](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const S sv = t.val(s).a[0];
                        const Mat<S>& mv = t.val(m);
                        t.accumulate(m, g, [sv](const S& gi, int) { return gi * sv; });
                        if (t.wants_grad(s)) {
                            S acc{};
                            for (int i = 0; i < g.size(); ++i) acc += g.a[i] * mv.a[i];
                            t.ensure_grad(s).a[0] += acc;
                        }
                    },
                    "mul_scalar_node");
    }

    // Broadcast-add a (1 x c) row vector to every row of an (r x c) matrix.
    int add_rowvec(int m, int v) {
        const Mat<S>&x = val(m), &b = val(v);
        if (b.rows != 1 || b.cols != x.cols) throw BadArgument("tape add_rowvec: shape mismatch");
        Mat<S> out = x;
        for (int i = 0; i < x.rows; ++i)
            for (int j = 0; j < x.cols; ++j) out.at(i, j) += b.a[j];
        return push(std::move(out), wants_grad(m) || wants_grad(v),
                    [m, v](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        t.accumulate(m, g, [](const S& gi, int) { return gi; });
                        if (t.wants_grad(v)) {
                            Mat<S>& gv = t.ensure_grad(v);
                            for (int i = 0; i < g.rows; ++i)
                                for (int j = 0; j < g.cols; ++j) gv.a[j] += g.at(i, j);
                        }
                    },
                    "add_rowvec");
    }

    int matmul(int a, int b) {
        const Mat<S>&x = val(a), &y = val(b);
        if (x.cols != y.rows) throw BadArgument("tape matmul: inner dimension mismatch");
        Mat<S> out(x.rows, y.cols);
        for (int i = 0; i < x.rows; ++i)
            for (int k = 0; k < x.cols; ++k) {
                const S xv = x.at(i, k);
                for (int j = 0; j < y.cols; ++j) out.at(i, j) += xv * y.at(k, j);
            }
        return push(std::move(out), wants_grad(a) || wants_grad(b),
                    [a, b](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const Mat<S>&xv = t.val(a), &yv = t.val(b);
                        if (t.wants_grad(a)) {
                            Mat<S>& ga = t.ensure_grad(a);
                            for (int i = 0; i < xv.rows; ++i)
                                for (int j = 0; j < yv.cols; ++j) {
                                    const S gij = g.at(i, j);
                                    for (int k = 0; k < xv.cols; ++k) ga.at(i, k) += gij * yv.at(k, j);
                                }
                        }
                        if (t.wants_grad(b)) {
                            Mat<S>& gb = t.ensure_grad(b);
                            for (int i = 0; i < xv.rows; ++i)
                                for (int k = 0; k < xv.cols; ++k) {
                                    const S xik = xv.at(i, k);
                                    for (int j = 0; j < yv.cols; ++j) gb.at(k, j) += xik * g.at(i, j);
                                }
                        }
                    },
                    "matmul");
    }

    int tanh_(int a) {
        Mat<S> out = val(a);
        for (auto& v : out.a) v = ad_tanh(v);
        return push(std::move(out), wants_grad(a),
                    [a](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const Mat<S>& y = t.val(id);
                        t.accumulate(a, g, [&y](const S& gi, int i) {
                            return gi * (S(1.0) - y.a[i] * y.a[i]);
                        });
                    },
                    "tanh");
    }

    int sigmoid_(int a) {
        Mat<S> out = val(a);
        for (auto& v : out.a) v = ad_sigmoid(v);
        return push(std::move(out), wants_grad(a),
                    [a](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const Mat<S>& y = t.val(id);
                        t.accumulate(a, g, [&y](const S& gi, int i) {
                            return gi * y.a[i] * (S(1.0) - y.a[i]);
                        });
                    },
                    "sigmoid");
    }

    // Row-wise softmax (shift-invariant, max subtracted per row).
    int softmax_rows(int a) {
        const Mat<S>& x = val(a);
        Mat<S> out(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
            S m = x.at(i, 0);
            for (int j = 1; j < x.cols; ++j)
                if (m < x.at(i, j)) m = x.at(i, j);
            S denom{};
            for (int j = 0; j < x.cols; ++j) {
                out.at(i, j) = ad_exp(x.at(i, j) - m);
                denom += out.at(i, j);
            }
            for (int j = 0; j < x.cols; ++j) out.at(i, j) = out.at(i, j) / denom;
        }
        return push(std::move(out), wants_grad(a),
                    [a](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        const Mat<S>& y = t.val(id);
                        if (!t.wants_grad(a)) return;
                        Mat<S>& ga = t.ensure_grad(a);
                        for (int i = 0; i < y.rows; ++i) {
                            S dot{};
                            for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
                            for (int j = 0; j < y.cols; ++j)
                                ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                        }
                    },
                    "softmax_rows");
    }

    int sum_all(int a) {
        const Mat<S>& x = val(a);
        S s{};
        for (const auto& v : x.a) s += v;
        Mat<S> out(1, 1);
        out.a[0] = s;
        return push(std::move(out), wants_grad(a),
                    [a](Tape& t, int id) {
                        const S g = t.grad_ref(id).a[0];
                        t.accumulate(a, t.val(a), [g](const S&, int) { return g; });
                    },
                    "sum_all");
    }

    int mean_all(int a) {
        const int n = val(a).size();
        return scale(sum_all(a), 1.0 / n);
    }

    int dot(int a, int b) {
        const Mat<S>&x = val(a), &y = val(b);
        require_same_shape(x, y, "dot");
        S s{};
        for (int i = 0; i < x.size(); ++i) s += x.a[i] * y.a[i];
        Mat<S> out(1, 1);
        out.a[0] = s;
        return push(std::move(out), wants_grad(a) || wants_grad(b),
                    [a, b](Tape& t, int id) {
                        const S g = t.grad_ref(id).a[0];
                        const Mat<S>&xv = t.val(a), &yv = t.val(b);
                        t.accumulate(a, xv, [g, &yv](const S&, int i) { return g * yv.a[i]; });
                        t.accumulate(b, yv, [g, &xv](const S&, int i) { return g * xv.a[i]; });
                    },
                    "dot");
    }

    // num / den for 1x1 nodes.
    int div_scalars(int num, int den) {
        require_scalar(num, "div_scalars");
        require_scalar(den, "div_scalars");
        Mat<S> out(1, 1);
        out.a[0] = val(num).a[0] / val(den).a[0];
        return push(std::move(out), wants_grad(num) || wants_grad(den),
                    [num, den](Tape& t, int id) {
                        const S g = t.grad_ref(id).a[0];
                        const S n = t.val(num).a[0];
                        const S d = t.val(den).a[0];
                        if (t.wants_grad(num)) t.ensure_grad(num).a[0] += g / d;
                        if (t.wants_grad(den)) t.ensure_grad(den).a[0] += -g * n / (d * d);
                    },
                    "div_scalars");
    }

    // Mean cross-entropy of row logits against integer labels.
    int cross_entropy_mean(int logits, const std::vector<int>& labels) {
        return scale(ce_impl(logits, labels, /*per_row=*/false), 1.0 / static_cast<int>(labels.size()));
    }

    // Per-row cross-entropy, shape (B x 1).
    int cross_entropy_rows(int logits, const std::vector<int>& labels) {
        return ce_impl(logits, labels, /*per_row=*/true);
    }

    // 3x3 same-shape convolution with zero padding. x: (B x c_in*h*w),
    // w: (c_out x c_in*9), b: (1 x c_out). Output geometry keeps h, w.
    int conv3x3(int x, int w, int b, ImageGeom g_in, int c_out) {
        const Mat<S>& xv = val(x);
        const Mat<S>& wv = val(w);
        const Mat<S>& bv = val(b);
        if (xv.cols != g_in.flat()) throw BadArgument("conv3x3: input geometry mismatch");
        if (wv.rows != c_out || wv.cols != g_in.c * 9) throw BadArgument("conv3x3: weight shape mismatch");
        if (bv.rows != 1 || bv.cols != c_out) throw BadArgument("conv3x3: bias shape mismatch");
        const ImageGeom g_out{g_in.h, g_in.w, c_out};
        Mat<S> out(xv.rows, g_out.flat());
        conv_forward(xv, wv, bv, g_in, c_out, out);
        return push(std::move(out), wants_grad(x) || wants_grad(w) || wants_grad(b),
                    [x, w, b, g_in, c_out](Tape& t, int id) {
                        t.conv_backward(x, w, b, g_in, c_out, t.grad_ref(id));
                    },
                    "conv3x3");
    }

    // 3x3 average pool, stride 1, zero padding, fixed 1/9 weighting.
    int avgpool3x3(int x, ImageGeom g) {
        const Mat<S>& xv = val(x);
        if (xv.cols != g.flat()) throw BadArgument("avgpool3x3: geometry mismatch");
        Mat<S> out(xv.rows, xv.cols);
        const S w = S(1.0 / 9.0);
        for (int r = 0; r < xv.rows; ++r)
            for (int ch = 0; ch < g.c; ++ch)
                for (int y = 0; y < g.h; ++y)
                    for (int xx = 0; xx < g.w; ++xx) {
                        S acc{};
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int yy = y + dy, xc = xx + dx;
                                if (yy < 0 || yy >= g.h || xc < 0 || xc >= g.w) continue;
                                acc += xv.at(r, ch * g.plane() + yy * g.w + xc);
                            }
                        out.at(r, ch * g.plane() + y * g.w + xx) = acc * w;
                    }
        return push(std::move(out), wants_grad(x),
                    [x, g](Tape& t, int id) {
                        const Mat<S>& go = t.grad_ref(id);
                        if (!t.wants_grad(x)) return;
                        Mat<S>& gx = t.ensure_grad(x);
                        const S w = S(1.0 / 9.0);
                        for (int r = 0; r < go.rows; ++r)
                            for (int ch = 0; ch < g.c; ++ch)
                                for (int y = 0; y < g.h; ++y)
                                    for (int xx = 0; xx < g.w; ++xx) {
                                        const S gi = go.at(r, ch * g.plane() + y * g.w + xx) * w;
                                        for (int dy = -1; dy <= 1; ++dy)
                                            for (int dx = -1; dx <= 1; ++dx) {
                                                const int yy = y + dy, xc = xx + dx;
                                                if (yy < 0 || yy >= g.h || xc < 0 || xc >= g.w) continue;
                                                gx.at(r, ch * g.plane() + yy * g.w + xc) += gi;
                                            }
                                    }
                    },
                    "avgpool3x3");
    }

    // Global average pool to (B x c).
    int global_avg_pool(int x, ImageGeom g) {
        const Mat<S>& xv = val(x);
        if (xv.cols != g.flat()) throw BadArgument("global_avg_pool: geometry mismatch");
        Mat<S> out(xv.rows, g.c);
        const S w = S(1.0 / g.plane());
        for (int r = 0; r < xv.rows; ++r)
            for (int ch = 0; ch < g.c; ++ch) {
                S acc{};
                for (int p = 0; p < g.plane(); ++p) acc += xv.at(r, ch * g.plane() + p);
                out.at(r, ch) = acc * w;
            }
        return push(std::move(out), wants_grad(x),
                    [x, g](Tape& t, int id) {
                        const Mat<S>& go = t.grad_ref(id);
                        if (!t.wants_grad(x)) return;
                        Mat<S>& gx = t.ensure_grad(x);
                        const S w = S(1.0 / g.plane());
                        for (int r = 0; r < go.rows; ++r)
                            for (int ch = 0; ch < g.c; ++ch) {
                                const S gi = go.at(r, ch) * w;
                                for (int p = 0; p < g.plane(); ++p) gx.at(r, ch * g.plane() + p) += gi;
                            }
                    },
                    "global_avg_pool");
    }

    // ---- access / backward ---------------------------------------------------

    const Mat<S>& val(int id) const { return nodes_[id].val; }

    double scalar(int id) const {
        require_scalar(id, "scalar");
        return value_of(nodes_[id].val.a[0]);
    }

    S scalar_raw(int id) const { return nodes_[id].val.a[0]; }

    // Gradient of the last backward() root w.r.t. node id; zeros if the node
    // never participated.
    Mat<S> grad_of(int id) const {
        if (nodes_[id].grad.empty()) return zeros_like(nodes_[id].val);
        return nodes_[id].grad;
    }

    void backward(int root) {
        require_scalar(root, "backward");
        ensure_grad(root).a[0] = S(1.0);
        for (int i = root; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.grad.empty() || !n.back) continue;
            maybe_round(n.grad);
            n.back(*this, i);
        }
        for (Node& n : nodes_)
            if (!n.grad.empty()) maybe_round(n.grad);
    }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Mat<S> val;
        Mat<S> grad;
        bool needs_grad = false;
        std::function<void(Tape&, int)> back;
    };

    bool wants_grad(int id) const { return nodes_[id].needs_grad; }

    Mat<S>& ensure_grad(int id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad = zeros_like(n.val);
        return n.grad;
    }

    const Mat<S>& grad_ref(int id) const { return nodes_[id].grad; }

    // gx[i] += f(g[i], i) for every entry, skipped when id tracks no gradient.
    template <class F>
    void accumulate(int id, const Mat<S>& g, F&& f) {
        if (!wants_grad(id)) return;
        Mat<S>& gx = ensure_grad(id);
        for (int i = 0; i < g.size(); ++i) gx.a[i] += f(g.a[i], i);
    }

    int push(Mat<S> value, bool needs_grad, std::function<void(Tape&, int)> back, const char* op) {
        for (const auto& v : value.a) {
            if (!finite_scalar(v))
                throw NonFiniteLoss(std::string("non-finite value produced by op '") + op + "'");
        }
        maybe_round(value);
        nodes_.push_back(Node{std::move(value), {}, needs_grad, std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    void maybe_round(Mat<S>& m) {
        if constexpr (std::is_same_v<S, double>) {
            if (round32_)
                for (auto& v : m.a) v = static_cast<double>(static_cast<float>(v));
        }
    }

    int ce_impl(int logits, const std::vector<int>& labels, bool per_row) {
        const Mat<S>& z = val(logits);
        if (z.rows != static_cast<int>(labels.size()))
            throw BadArgument("cross_entropy: label count mismatch");
        Mat<S> out(per_row ? z.rows : 1, 1);
        S total{};
        for (int i = 0; i < z.rows; ++i) {
            S m = z.at(i, 0);
            for (int j = 1; j < z.cols; ++j)
                if (m < z.at(i, j)) m = z.at(i, j);
            S denom{};
            for (int j = 0; j < z.cols; ++j) denom += ad_exp(z.at(i, j) - m);
            const S row = m + ad_log(denom) - z.at(i, labels[i]);
            if (per_row)
                out.a[i] = row;
            else
                total += row;
        }
        if (!per_row) out.a[0] = total;
        return push(std::move(out), wants_grad(logits),
                    [logits, labels, per_row](Tape& t, int id) {
                        const Mat<S>& g = t.grad_ref(id);
                        if (!t.wants_grad(logits)) return;
                        const Mat<S>& z = t.val(logits);
                        Mat<S>& gz = t.ensure_grad(logits);
                        for (int i = 0; i < z.rows; ++i) {
                            const S gi = per_row ? g.a[i] : g.a[0];
                            S m = z.at(i, 0);
                            for (int j = 1; j < z.cols; ++j)
                                if (m < z.at(i, j)) m = z.at(i, j);
                            S denom{};
                            for (int j = 0; j < z.cols; ++j) denom += ad_exp(z.at(i, j) - m);
                            for (int j = 0; j < z.cols; ++j) {
                                S p = ad_exp(z.at(i, j) - m) / denom;
                                if (j == labels[i]) p = p - S(1.0);
                                gz.at(i, j) += gi * p;
                            }
                        }
                    },
                    "cross_entropy");
    }

    static void conv_forward(const Mat<S>& xv, const Mat<S>& wv, const Mat<S>& bv,
                             ImageGeom g, int c_out, Mat<S>& out) {
        const int plane = g.plane();
        for (int r = 0; r < xv.rows; ++r)
            for (int o = 0; o < c_out; ++o)
                for (int y = 0; y < g.h; ++y)
                    for (int x = 0; x < g.w; ++x) {
                        S acc = bv.a[o];
                        for (int ci = 0; ci < g.c; ++ci)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const int yy = y + dy, xx = x + dx;
                                    if (yy < 0 || yy >= g.h || xx < 0 || xx >= g.w) continue;
                                    acc += wv.at(o, ci * 9 + (dy + 1) * 3 + (dx + 1)) *
                                           xv.at(r, ci * plane + yy * g.w + xx);
                                }
                        out.at(r, o * plane + y * g.w + x) = acc;
                    }
    }

    void conv_backward(int x, int w, int b, ImageGeom g, int c_out, const Mat<S>& go) {
        const Mat<S>& xv = val(x);
        const Mat<S>& wv = val(w);
        const int plane = g.plane();
        const bool gx_on = wants_grad(x), gw_on = wants_grad(w), gb_on = wants_grad(b);
        Mat<S>* gx = gx_on ? &ensure_grad(x) : nullptr;
        Mat<S>* gw = gw_on ? &ensure_grad(w) : nullptr;
        Mat<S>* gb = gb_on ? &ensure_grad(b) : nullptr;
        for (int r = 0; r < xv.rows; ++r)
            for (int o = 0; o < c_out; ++o)
                for (int y = 0; y < g.h; ++y)
                    for (int xx = 0; xx < g.w; ++xx) {
                        const S gi = go.at(r, o * plane + y * g.w + xx);
                        if (gb_on) gb->a[o] += gi;
                        for (int ci = 0; ci < g.c; ++ci)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const int yy = y + dy, xc = xx + dx;
                                    if (yy < 0 || yy >= g.h || xc < 0 || xc >= g.w) continue;
                                    const int wi = ci * 9 + (dy + 1) * 3 + (dx + 1);
                                    const int xi = ci * plane + yy * g.w + xc;
                                    if (gw_on) gw->at(o, wi) += gi * xv.at(r, xi);
                                    if (gx_on) gx->at(r, xi) += gi * wv.at(o, wi);
                                }
                    }
    }

    void require_scalar(int id, const char* op) const {
        if (nodes_[id].val.size() != 1)
            throw BadArgument(std::string(op) + ": node is not scalar");
    }

    static void require_same_shape(const Mat<S>& a, const Mat<S>& b, const char* op) {
        if (a.rows != b.rows || a.cols != b.cols)
            throw BadArgument(std::string(op) + ": shape mismatch");
    }

    std::vector<Node> nodes_;
    bool round32_ = false;
};

} // namespace lpt
