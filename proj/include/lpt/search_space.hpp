#pragma once

#include <map>
#include <string>
#include <vector>

#include "lpt/diff_fn.hpp"
#include "lpt/errors.hpp"
#include "lpt/param_vector.hpp"
#include "lpt/rng.hpp"
#include "lpt/tape.hpp"

namespace lpt {

// Desk-scale candidate operations. The wider convolutional menu of the usual
// search space is recognized by name but rejected at network construction.
enum class OpKind { zero, identity, linear, tanh_mlp, conv3x3, avgpool3x3 };

enum class InputKind { vector_in, image_in };

OpKind op_kind_from_name(const std::string& name, InputKind input);

// Cell description. Nodes 0 and 1 are the two input nodes (both fed by the
// stem for the first cell, then by the two preceding cell outputs); nodes
// 2..num_nodes-1 are intermediate. Every intermediate node has one candidate
// edge from each earlier node, and the cell output is the mean over
// intermediate node activations.
struct CellSpec {
    int num_nodes = 7;
    int num_cells = 1;
    std::vector<std::string> ops = {"zero", "identity", "linear", "tanh_mlp"};
    int width = 8;
    int k_in = 2;
    InputKind input = InputKind::vector_in;
    ImageGeom image; // input geometry when input == image_in

    int num_intermediate() const { return num_nodes - 2; }
    int num_ops() const { return static_cast<int>(ops.size()); }

    void validate() const;
};

struct EdgeRef {
    int from = 0;
    int to = 0; // intermediate node index (absolute, >= 2)
};

// Fixed enumeration of candidate edges: for each intermediate node in order,
// edges from every earlier node in order.
std::vector<EdgeRef> cell_edges(const CellSpec& spec);

struct GenotypeEdge {
    int from = 0;
    std::string op;
    bool operator==(const GenotypeEdge&) const = default;
};
struct GenotypeNode {
    int node = 0;
    std::vector<GenotypeEdge> edges;
    bool operator==(const GenotypeNode&) const = default;
};
struct Genotype {
    std::vector<GenotypeNode> nodes;
    bool operator==(const Genotype&) const = default;
};

std::string genotype_to_json(const Genotype& g);
Genotype genotype_from_json(const std::string& text);

// Named slices of one flat parameter block.
class ParamLayout {
public:
    int add(const std::string& name, int rows, int cols) {
        if (index_.count(name)) throw BadArgument("ParamLayout: duplicate entry " + name);
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(Entry{name, total_, rows, cols});
        total_ += rows * cols;
        return static_cast<int>(entries_.size()) - 1;
    }

    struct Entry {
        std::string name;
        int offset, rows, cols;
    };

    const Entry& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw BadArgument("ParamLayout: unknown entry " + name);
        return entries_[it->second];
    }

    template <class S>
    int view(Tape<S>& t, int block, const std::string& name) const {
        const Entry& e = get(name);
        return t.view(block, e.offset, e.rows, e.cols);
    }

    int total() const { return total_; }
    const std::vector<Entry>& entries() const { return entries_; }

    // Fan-in-scaled Gaussian init for weight matrices, zeros for biases
    // (entries whose name ends in ".b*").
    ParamVector init(Rng& rng) const;

private:
    std::vector<Entry> entries_;
    std::map<std::string, int> index_;
    int total_ = 0;
};

// The differentiable supernet: softmax-mixed candidate ops on every edge,
// stacked cells, linear classifier head. A holds one row of op logits per
// edge (shared across cells); W holds stem, per-(cell,edge,op) weights, and
// the classifier.
class LearnerNet {
public:
    LearnerNet(CellSpec spec, int in_dim, int num_classes);

    const CellSpec& spec() const { return spec_; }
    int arch_size() const { return num_edges_ * spec_.num_ops(); }
    int weight_size() const { return layout_.total(); }
    int num_edges() const { return num_edges_; }
    int in_dim() const { return in_dim_; }
    int num_classes() const { return num_classes_; }

    ParamVector init_arch() const { return ParamVector::zeros(arch_size()); }
    ParamVector init_weights(Rng& rng) const { return layout_.init(rng); }

    // Softmax-weighted mix of candidate ops on one edge.
    template <class S>
    int mixed_op(Tape<S>& t, int a_block, int w_block, int cell, int edge, int x) const {
        const int a_edge = t.view(a_block, edge * spec_.num_ops(), 1, spec_.num_ops());
        const int weights = t.softmax_rows(a_edge);
        int acc = -1;
        for (int k = 0; k < spec_.num_ops(); ++k) {
            if (op_kinds_[k] == OpKind::zero) continue; // exact zero contribution
            const int wk = t.view(weights, k, 1, 1);
            const int y = apply_op(t, w_block, cell, edge, k, x);
            const int term = t.mul_scalar_node(y, wk);
            acc = acc < 0 ? term : t.add(acc, term);
        }
        if (acc < 0) acc = t.constant(zeros_like(t.val(x))); // all-zero op list cannot happen
        return acc;
    }

    // Full stacked-cell forward pass to class logits.
    template <class S>
    int logits(Tape<S>& t, int a_block, int w_block, const Batch& batch) const {
        if (batch.x.cols != in_dim_) throw BadArgument("network forward: input dim mismatch");
        const int x = t.constant_cast(batch.x);
        int h = stem(t, w_block, x);
        int prev_prev = h, prev = h;
        for (int c = 0; c < spec_.num_cells; ++c) {
            std::vector<int> states = {prev_prev, prev};
            int e = 0;
            int sum_intermediate = -1;
            for (int j = 2; j < spec_.num_nodes; ++j) {
                int acc = -1;
                for (int i = 0; i < j; ++i, ++e) {
                    const int m = mixed_op(t, a_block, w_block, c, e, states[i]);
                    acc = acc < 0 ? m : t.add(acc, m);
                }
                states.push_back(acc);
                sum_intermediate = sum_intermediate < 0 ? acc : t.add(sum_intermediate, acc);
            }
            const int cell_out = t.scale(sum_intermediate, 1.0 / spec_.num_intermediate());
            prev_prev = prev;
            prev = cell_out;
        }
        int features = prev;
        if (spec_.input == InputKind::image_in)
            features = t.global_avg_pool(features, feat_geom_);
        const int wc = layout_.view(t, w_block, "cls.w");
        const int bc = layout_.view(t, w_block, "cls.b");
        return t.add_rowvec(t.matmul(features, wc), bc);
    }

    // Argmax discretization: per edge the strongest non-zero op, per node the
    // k_in incoming edges with the largest top-op weight. Ties break toward
    // the lower edge index.
    Genotype discretize(const ParamVector& arch) const;

    const std::vector<EdgeRef>& edges() const { return edges_; }
    const ParamLayout& weight_layout() const { return layout_; }

private:
    template <class S>
    int stem(Tape<S>& t, int w_block, int x) const {
        if (spec_.input == InputKind::vector_in) {
            const int w = layout_.view(t, w_block, "stem.w");
            const int b = layout_.view(t, w_block, "stem.b");
            return t.add_rowvec(t.matmul(x, w), b);
        }
        const int w = layout_.view(t, w_block, "stem.w");
        const int b = layout_.view(t, w_block, "stem.b");
        return t.conv3x3(x, w, b, spec_.image, spec_.width);
    }

    template <class S>
    int apply_op(Tape<S>& t, int w_block, int cell, int edge, int op, int x) const {
        const std::string p = op_param_prefix(cell, edge, op);
        switch (op_kinds_[op]) {
        case OpKind::identity:
            return x;
        case OpKind::linear:
            return t.add_rowvec(t.matmul(x, layout_.view(t, w_block, p + ".w")),
                                layout_.view(t, w_block, p + ".b"));
        case OpKind::tanh_mlp: {
            const int h = t.tanh_(t.add_rowvec(t.matmul(x, layout_.view(t, w_block, p + ".w1")),
                                               layout_.view(t, w_block, p + ".b1")));
            return t.add_rowvec(t.matmul(h, layout_.view(t, w_block, p + ".w2")),
                                layout_.view(t, w_block, p + ".b2"));
        }
        case OpKind::conv3x3:
            return t.conv3x3(x, layout_.view(t, w_block, p + ".w"),
                             layout_.view(t, w_block, p + ".b"), feat_geom_, spec_.width);
        case OpKind::avgpool3x3:
            return t.avgpool3x3(x, feat_geom_);
        case OpKind::zero:
            break;
        }
        throw BadArgument("apply_op: zero op has no parameters");
    }

    static std::string op_param_prefix(int cell, int edge, int op) {
        return "c" + std::to_string(cell) + ".e" + std::to_string(edge) + ".o" + std::to_string(op);
    }

    CellSpec spec_;
    int in_dim_ = 0;
    int num_classes_ = 0;
    int num_edges_ = 0;
    std::vector<EdgeRef> edges_;
    std::vector<OpKind> op_kinds_;
    ImageGeom feat_geom_; // geometry of cell activations in image mode
    ParamLayout layout_;
};

// Fixed-architecture network built from a genotype; used by architecture
// evaluation and by exhaustive enumeration. Mirrors the supernet's node
// arithmetic with the non-retained edges removed.
class DiscreteNet {
public:
    DiscreteNet(CellSpec spec, Genotype genotype, int in_dim, int num_classes);

    int weight_size() const { return layout_.total(); }
    ParamVector init_weights(Rng& rng) const { return layout_.init(rng); }
    const Genotype& genotype() const { return geno_; }

    template <class S>
    int logits(Tape<S>& t, int w_block, const Batch& batch) const {
        if (batch.x.cols != in_dim_) throw BadArgument("discrete forward: input dim mismatch");
        const int x = t.constant_cast(batch.x);
        int h = stem(t, w_block, x);
        int prev_prev = h, prev = h;
        for (int c = 0; c < spec_.num_cells; ++c) {
            std::vector<int> states = {prev_prev, prev};
            int sum_intermediate = -1;
            for (std::size_t ni = 0; ni < geno_.nodes.size(); ++ni) {
                const GenotypeNode& gn = geno_.nodes[ni];
                int acc = -1;
                for (std::size_t ei = 0; ei < gn.edges.size(); ++ei) {
                    if (op_kind_from_name(gn.edges[ei].op, spec_.input) == OpKind::zero) continue;
                    const int y = apply_op(t, w_block, c, static_cast<int>(ni),
                                           static_cast<int>(ei), states[gn.edges[ei].from]);
                    acc = acc < 0 ? y : t.add(acc, y);
                }
                if (acc < 0) acc = t.constant(zeros_like(t.val(states[0])));
                states.push_back(acc);
                sum_intermediate = sum_intermediate < 0 ? acc : t.add(sum_intermediate, acc);
            }
            const int cell_out = t.scale(sum_intermediate, 1.0 / spec_.num_intermediate());
            prev_prev = prev;
            prev = cell_out;
        }
        int features = prev;
        if (spec_.input == InputKind::image_in)
            features = t.global_avg_pool(features, feat_geom_);
        const int wc = layout_.view(t, w_block, "cls.w");
        const int bc = layout_.view(t, w_block, "cls.b");
        return t.add_rowvec(t.matmul(features, wc), bc);
    }

private:
    template <class S>
    int stem(Tape<S>& t, int w_block, int x) const {
        if (spec_.input == InputKind::vector_in) {
            return t.add_rowvec(t.matmul(x, layout_.view(t, w_block, "stem.w")),
                                layout_.view(t, w_block, "stem.b"));
        }
        return t.conv3x3(x, layout_.view(t, w_block, "stem.w"),
                         layout_.view(t, w_block, "stem.b"), spec_.image, spec_.width);
    }

    template <class S>
    int apply_op(Tape<S>& t, int w_block, int cell, int node_i, int edge_i, int x) const {
        const OpKind kind = op_kind_from_name(geno_.nodes[node_i].edges[edge_i].op, spec_.input);
        const std::string p = "c" + std::to_string(cell) + ".n" + std::to_string(node_i) + ".e" +
                              std::to_string(edge_i);
        switch (kind) {
        case OpKind::identity:
            return x;
        case OpKind::linear:
            return t.add_rowvec(t.matmul(x, layout_.view(t, w_block, p + ".w")),
                                layout_.view(t, w_block, p + ".b"));
        case OpKind::tanh_mlp: {
            const int h = t.tanh_(t.add_rowvec(t.matmul(x, layout_.view(t, w_block, p + ".w1")),
                                               layout_.view(t, w_block, p + ".b1")));
            return t.add_rowvec(t.matmul(h, layout_.view(t, w_block, p + ".w2")),
                                layout_.view(t, w_block, p + ".b2"));
        }
        case OpKind::conv3x3:
            return t.conv3x3(x, layout_.view(t, w_block, p + ".w"),
                             layout_.view(t, w_block, p + ".b"), feat_geom_, spec_.width);
        case OpKind::avgpool3x3:
            return t.avgpool3x3(x, feat_geom_);
        case OpKind::zero:
            break;
        }
        throw BadArgument("apply_op: zero edges are skipped by the caller");
    }

    CellSpec spec_;
    Genotype geno_;
    int in_dim_ = 0;
    int num_classes_ = 0;
    ImageGeom feat_geom_;
    ParamLayout layout_;
};

} // namespace lpt
