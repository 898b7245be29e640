#include "lpt/search_space.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace lpt {

OpKind op_kind_from_name(const std::string& name, InputKind input) {
    if (name == "zero") return OpKind::zero;
    if (name == "identity") return OpKind::identity;
    if (input == InputKind::vector_in) {
        if (name == "linear") return OpKind::linear;
        if (name == "tanh_mlp") return OpKind::tanh_mlp;
    } else {
        if (name == "conv3x3") return OpKind::conv3x3;
        if (name == "avgpool3x3") return OpKind::avgpool3x3;
    }
    throw UnsupportedOp("candidate op '" + name + "' is not supported for this input kind");
}

void CellSpec::validate() const {
    if (num_nodes < 3) throw BadArgument("CellSpec: num_nodes must be >= 3");
    if (num_cells < 1) throw BadArgument("CellSpec: num_cells must be >= 1");
    if (width < 1) throw BadArgument("CellSpec: width must be >= 1");
    if (k_in < 1) throw BadArgument("CellSpec: k_in must be >= 1");
    if (ops.empty()) throw BadArgument("CellSpec: op list is empty");
    const bool has_zero = std::find(ops.begin(), ops.end(), "zero") != ops.end();
    const bool has_identity = std::find(ops.begin(), ops.end(), "identity") != ops.end();
    if (!has_zero || !has_identity)
        throw BadArgument("CellSpec: op list must include 'zero' and 'identity'");
    if (input == InputKind::image_in && (image.h < 3 || image.w < 3 || image.c < 1))
        throw BadArgument("CellSpec: image geometry too small");
}

std::vector<EdgeRef> cell_edges(const CellSpec& spec) {
    std::vector<EdgeRef> edges;
    for (int j = 2; j < spec.num_nodes; ++j)
        for (int i = 0; i < j; ++i) edges.push_back(EdgeRef{i, j});
    return edges;
}

ParamVector ParamLayout::init(Rng& rng) const {
    std::vector<double> v(static_cast<std::size_t>(total_), 0.0);
    for (const Entry& e : entries_) {
        const bool is_bias = e.name.find(".b") != std::string::npos && e.rows == 1;
        if (is_bias) continue; // biases start at zero
        const double std = 1.0 / std::sqrt(static_cast<double>(std::max(1, e.rows)));
        for (int i = 0; i < e.rows * e.cols; ++i) v[e.offset + i] = std * rng.normal();
    }
    return ParamVector(std::move(v));
}

namespace {

void register_op_params(ParamLayout& layout, const std::string& prefix, OpKind kind, int width) {
    switch (kind) {
    case OpKind::linear:
        layout.add(prefix + ".w", width, width);
        layout.add(prefix + ".b", 1, width);
        break;
    case OpKind::tanh_mlp:
        layout.add(prefix + ".w1", width, width);
        layout.add(prefix + ".b1", 1, width);
        layout.add(prefix + ".w2", width, width);
        layout.add(prefix + ".b2", 1, width);
        break;
    case OpKind::conv3x3:
        layout.add(prefix + ".w", width, width * 9);
        layout.add(prefix + ".b", 1, width);
        break;
    case OpKind::zero:
    case OpKind::identity:
    case OpKind::avgpool3x3:
        break;
    }
}

} // namespace

LearnerNet::LearnerNet(CellSpec spec, int in_dim, int num_classes)
    : spec_(std::move(spec)), in_dim_(in_dim), num_classes_(num_classes) {
    spec_.validate();
    if (in_dim_ < 1 || num_classes_ < 2) throw BadArgument("LearnerNet: bad input/class dims");
    edges_ = cell_edges(spec_);
    num_edges_ = static_cast<int>(edges_.size());
    op_kinds_.reserve(spec_.ops.size());
    for (const auto& name : spec_.ops) op_kinds_.push_back(op_kind_from_name(name, spec_.input));

    if (spec_.input == InputKind::vector_in) {
        layout_.add("stem.w", in_dim_, spec_.width);
        layout_.add("stem.b", 1, spec_.width);
        feat_geom_ = ImageGeom{};
    } else {
        if (spec_.image.flat() != in_dim_)
            throw BadArgument("LearnerNet: image geometry does not match input dim");
        layout_.add("stem.w", spec_.width, spec_.image.c * 9);
        layout_.add("stem.b", 1, spec_.width);
        feat_geom_ = ImageGeom{spec_.image.h, spec_.image.w, spec_.width};
    }
    for (int c = 0; c < spec_.num_cells; ++c)
        for (int e = 0; e < num_edges_; ++e)
            for (int k = 0; k < spec_.num_ops(); ++k)
                register_op_params(layout_, op_param_prefix(c, e, k), op_kinds_[k], spec_.width);

    const int feat = spec_.input == InputKind::vector_in ? spec_.width : spec_.width;
    layout_.add("cls.w", feat, num_classes_);
    layout_.add("cls.b", 1, num_classes_);
}

Genotype LearnerNet::discretize(const ParamVector& arch) const {
    if (static_cast<int>(arch.size()) != arch_size())
        throw BadArgument("discretize: arch length mismatch");
    const int num_ops = spec_.num_ops();

    // Per edge: softmax over op logits, strongest non-zero op and its weight.
    struct EdgeChoice {
        int edge;
        int op;
        double weight;
    };
    std::vector<EdgeChoice> choices(num_edges_);
    for (int e = 0; e < num_edges_; ++e) {
        double mx = arch[e * num_ops];
        for (int k = 1; k < num_ops; ++k) mx = std::max(mx, arch[e * num_ops + k]);
        double denom = 0.0;
        std::vector<double> p(num_ops);
        for (int k = 0; k < num_ops; ++k) {
            p[k] = std::exp(arch[e * num_ops + k] - mx);
            denom += p[k];
        }
        int best = -1;
        for (int k = 0; k < num_ops; ++k) {
            p[k] /= denom;
            if (op_kinds_[k] == OpKind::zero) continue;
            if (best < 0 || p[k] > p[best]) best = k;
        }
        choices[e] = EdgeChoice{e, best, p[best]};
    }

    Genotype g;
    int e = 0;
    for (int j = 2; j < spec_.num_nodes; ++j) {
        std::vector<EdgeChoice> incoming;
        for (int i = 0; i < j; ++i, ++e) incoming.push_back(choices[e]);
        std::stable_sort(incoming.begin(), incoming.end(),
                         [](const EdgeChoice& a, const EdgeChoice& b) {
                             if (a.weight != b.weight) return a.weight > b.weight;
                             return a.edge < b.edge;
                         });
        const int keep = std::min<int>(spec_.k_in, static_cast<int>(incoming.size()));
        incoming.resize(keep);
        std::sort(incoming.begin(), incoming.end(),
                  [](const EdgeChoice& a, const EdgeChoice& b) { return a.edge < b.edge; });
        GenotypeNode node;
        node.node = j;
        for (const EdgeChoice& c : incoming)
            node.edges.push_back(GenotypeEdge{edges_[c.edge].from, spec_.ops[c.op]});
        g.nodes.push_back(std::move(node));
    }
    return g;
}

DiscreteNet::DiscreteNet(CellSpec spec, Genotype genotype, int in_dim, int num_classes)
    : spec_(std::move(spec)), geno_(std::move(genotype)), in_dim_(in_dim),
      num_classes_(num_classes) {
    spec_.validate();
    if (static_cast<int>(geno_.nodes.size()) != spec_.num_intermediate())
        throw BadArgument("DiscreteNet: genotype node count mismatch");
    if (spec_.input == InputKind::vector_in) {
        layout_.add("stem.w", in_dim_, spec_.width);
        layout_.add("stem.b", 1, spec_.width);
    } else {
        if (spec_.image.flat() != in_dim_)
            throw BadArgument("DiscreteNet: image geometry does not match input dim");
        layout_.add("stem.w", spec_.width, spec_.image.c * 9);
        layout_.add("stem.b", 1, spec_.width);
        feat_geom_ = ImageGeom{spec_.image.h, spec_.image.w, spec_.width};
    }
    for (int c = 0; c < spec_.num_cells; ++c)
        for (std::size_t ni = 0; ni < geno_.nodes.size(); ++ni) {
            const GenotypeNode& gn = geno_.nodes[ni];
            if (gn.node != static_cast<int>(ni) + 2)
                throw BadArgument("DiscreteNet: genotype nodes must be 2..num_nodes-1 in order");
            for (std::size_t ei = 0; ei < gn.edges.size(); ++ei) {
                const GenotypeEdge& ge = gn.edges[ei];
                if (ge.from < 0 || ge.from >= gn.node)
                    throw BadArgument("DiscreteNet: edge source out of range");
                const OpKind kind = op_kind_from_name(ge.op, spec_.input);
                register_op_params(layout_,
                                   "c" + std::to_string(c) + ".n" + std::to_string(ni) + ".e" +
                                       std::to_string(ei),
                                   kind, spec_.width);
            }
        }
    layout_.add("cls.w", spec_.width, num_classes_);
    layout_.add("cls.b", 1, num_classes_);
}

std::string genotype_to_json(const Genotype& g) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const GenotypeNode& n : g.nodes) {
        nlohmann::ordered_json jn;
        jn["node"] = n.node;
        jn["edges"] = nlohmann::ordered_json::array();
        for (const GenotypeEdge& e : n.edges) {
            nlohmann::ordered_json je;
            je["from"] = e.from;
            je["op"] = e.op;
            jn["edges"].push_back(je);
        }
        j["nodes"].push_back(jn);
    }
    return j.dump(2);
}

Genotype genotype_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("genotype JSON parse error: ") + e.what());
    }
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw IoError("genotype JSON: missing 'nodes' array");
    Genotype g;
    for (const auto& jn : j["nodes"]) {
        GenotypeNode n;
        n.node = jn.at("node").get<int>();
        for (const auto& je : jn.at("edges"))
            n.edges.push_back(GenotypeEdge{je.at("from").get<int>(), je.at("op").get<std::string>()});
        g.nodes.push_back(std::move(n));
    }
    return g;
}

} // namespace lpt
