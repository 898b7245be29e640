#pragma once

#include <map>
#include <vector>

#include "lpt/data_bank.hpp"
#include "lpt/diff_fn.hpp"
#include "lpt/optim.hpp"
#include "lpt/search_space.hpp"

namespace lpt {

struct TesterSpec {
    int encoder_hidden = 16;
    int latent_dim = 16;
    InputKind input = InputKind::vector_in;
    ImageGeom image;
};

// The tester's three learnable parts. The creator and the executor both read
// the encoder's latent; the creator emits one selection logit, the executor
// class logits.
class TesterNet {
public:
    TesterNet(TesterSpec spec, int in_dim, int num_classes)
        : spec_(spec), in_dim_(in_dim), num_classes_(num_classes) {
        if (in_dim_ < 1 || num_classes_ < 2) throw BadArgument("TesterNet: bad input/class dims");
        if (spec_.encoder_hidden < 1 || spec_.latent_dim < 1)
            throw BadArgument("TesterNet: encoder dims must be positive");
        if (spec_.input == InputKind::vector_in) {
            enc_.add("e.w1", in_dim_, spec_.encoder_hidden);
            enc_.add("e.b1", 1, spec_.encoder_hidden);
            enc_.add("e.w2", spec_.encoder_hidden, spec_.latent_dim);
            enc_.add("e.b2", 1, spec_.latent_dim);
        } else {
            if (spec_.image.flat() != in_dim_)
                throw BadArgument("TesterNet: image geometry does not match input dim");
            enc_.add("e.c1w", spec_.encoder_hidden, spec_.image.c * 9);
            enc_.add("e.c1b", 1, spec_.encoder_hidden);
            enc_.add("e.c2w", spec_.encoder_hidden, spec_.encoder_hidden * 9);
            enc_.add("e.c2b", 1, spec_.encoder_hidden);
            enc_.add("e.w2", spec_.encoder_hidden, spec_.latent_dim);
            enc_.add("e.b2", 1, spec_.latent_dim);
        }
        cre_.add("c.w", spec_.latent_dim, 1);
        cre_.add("c.b", 1, 1);
        exe_.add("x.w", spec_.latent_dim, num_classes_);
        exe_.add("x.b", 1, num_classes_);
    }

    const TesterSpec& spec() const { return spec_; }
    int encoder_size() const { return enc_.total(); }
    int creator_size() const { return cre_.total(); }
    int executor_size() const { return exe_.total(); }
    int num_classes() const { return num_classes_; }

    ParamVector init_encoder(Rng& rng) const { return enc_.init(rng); }
    // Zero creator: every selection weight starts at 0.5.
    ParamVector init_creator() const { return ParamVector::zeros(cre_.total()); }
    ParamVector init_executor(Rng& rng) const { return exe_.init(rng); }

    template <class S>
    int encode(Tape<S>& t, int e_block, const Batch& batch) const {
        if (batch.x.cols != in_dim_) throw BadArgument("encoder: input dim mismatch");
        const int x = t.constant_cast(batch.x);
        if (spec_.input == InputKind::vector_in) {
            const int h = t.tanh_(t.add_rowvec(t.matmul(x, enc_.view(t, e_block, "e.w1")),
                                               enc_.view(t, e_block, "e.b1")));
            // bounded latent keeps selection logits on the creator's scale
            return t.tanh_(t.add_rowvec(t.matmul(h, enc_.view(t, e_block, "e.w2")),
                                        enc_.view(t, e_block, "e.b2")));
        }
        const ImageGeom g1{spec_.image.h, spec_.image.w, spec_.encoder_hidden};
        int h = t.tanh_(t.conv3x3(x, enc_.view(t, e_block, "e.c1w"), enc_.view(t, e_block, "e.c1b"),
                                  spec_.image, spec_.encoder_hidden));
        h = t.avgpool3x3(h, g1);
        h = t.tanh_(t.conv3x3(h, enc_.view(t, e_block, "e.c2w"), enc_.view(t, e_block, "e.c2b"), g1,
                              spec_.encoder_hidden));
        h = t.global_avg_pool(h, g1);
        return t.tanh_(t.add_rowvec(t.matmul(h, enc_.view(t, e_block, "e.w2")),
                                    enc_.view(t, e_block, "e.b2")));
    }

    // f(d, C, E) = sigmoid(C . encode(E, d)), strictly inside (0, 1).
    template <class S>
    int selection(Tape<S>& t, int e_block, int c_block, const Batch& batch) const {
        const int z = encode(t, e_block, batch);
        const int logit = t.add_rowvec(t.matmul(z, cre_.view(t, c_block, "c.w")),
                                       cre_.view(t, c_block, "c.b"));
        return t.sigmoid_(logit);
    }

    template <class S>
    int executor_logits(Tape<S>& t, int e_block, int x_block, const Batch& batch) const {
        const int z = encode(t, e_block, batch);
        return t.add_rowvec(t.matmul(z, exe_.view(t, x_block, "x.w")),
                            exe_.view(t, x_block, "x.b"));
    }

private:
    TesterSpec spec_;
    int in_dim_ = 0;
    int num_classes_ = 0;
    ParamLayout enc_, cre_, exe_;
};

struct TesterState {
    ParamVector encoder;  // E
    ParamVector creator;  // C
    ParamVector executor; // X
    ParamVector sel_raw;  // ablation-1 raw per-bank-example scalars
    SgdMomentum opt_e, opt_x;
    Adam opt_c, opt_s;
};

// Mean executor cross-entropy on a tester batch. Blocks: {E, X}.
inline DifferentiableFn make_val_loss_fn(const TesterNet& net) {
    return DifferentiableFn({"E", "X"}, [&net](auto& t, const std::vector<int>& b, const Batch& batch) {
        return t.cross_entropy_mean(net.executor_logits(t, b[0], b[1], batch), batch.labels);
    });
}

// sum_d f(d,C,E) * ce(E,X,d) over the bank batch (no gamma). Blocks: {E, X, C}.
inline DifferentiableFn make_bank_exec_fn(const TesterNet& net) {
    return DifferentiableFn({"E", "X", "C"},
                            [&net](auto& t, const std::vector<int>& b, const Batch& batch) {
                                const int f = net.selection(t, b[0], b[2], batch);
                                const int ce = t.cross_entropy_rows(
                                    net.executor_logits(t, b[0], b[1], batch), batch.labels);
                                return t.dot(f, ce);
                            });
}

// Stage II loss: ce(tester-train) + gamma * sum_d f * ce(bank). The
// tester-train batch is bound at construction, the bank batch flows through
// the call. Blocks: {E, X, C}; callers differentiate only E and X here.
inline DifferentiableFn make_stage2_fn(const TesterNet& net, Batch tt_batch, double gamma) {
    if (gamma < 0.0) throw BadArgument("stage2 loss: gamma must be >= 0");
    return DifferentiableFn(
        {"E", "X", "C"}, [&net, tt_batch = std::move(tt_batch), gamma](
                             auto& t, const std::vector<int>& b, const Batch& bank) {
            int loss = t.cross_entropy_mean(net.executor_logits(t, b[0], b[1], tt_batch),
                                            tt_batch.labels);
            if (gamma > 0.0 && bank.size() > 0) {
                const int f = net.selection(t, b[0], b[2], bank);
                const int ce = t.cross_entropy_rows(net.executor_logits(t, b[0], b[1], bank),
                                                    bank.labels);
                loss = t.add(loss, t.scale(t.dot(f, ce), gamma));
            }
            return loss;
        });
}

// Ablation setting 2: the stage II loss without its tester-train term.
inline DifferentiableFn make_ablation2_fn(const TesterNet& net, double gamma) {
    if (gamma < 0.0) throw BadArgument("ablation2 loss: gamma must be >= 0");
    return DifferentiableFn({"E", "X", "C"},
                            [&net, gamma](auto& t, const std::vector<int>& b, const Batch& bank) {
                                const int f = net.selection(t, b[0], b[2], bank);
                                const int ce = t.cross_entropy_rows(
                                    net.executor_logits(t, b[0], b[1], bank), bank.labels);
                                return t.scale(t.dot(f, ce), gamma);
                            });
}

// Soft cardinality sum_d f(d,C,E) of the bank batch. Blocks: {C, E}.
inline DifferentiableFn make_sel_sum_fn(const TesterNet& net) {
    return DifferentiableFn({"C", "E"}, [&net](auto& t, const std::vector<int>& b, const Batch& batch) {
        return t.sum_all(net.selection(t, b[1], b[0], batch));
    });
}

// sum_d f(d,C,E) * ell_d with fixed per-example losses. Blocks: {C, E}.
inline DifferentiableFn make_sel_weighted_fn(const TesterNet& net, std::vector<double> ell) {
    return DifferentiableFn(
        {"C", "E"}, [&net, ell = std::move(ell)](auto& t, const std::vector<int>& b,
                                                 const Batch& batch) {
            if (static_cast<int>(ell.size()) != batch.size())
                throw BadArgument("sel_weighted: loss count != batch size");
            Mat<double> l(batch.size(), 1);
            l.a = ell;
            return t.dot(net.selection(t, b[1], b[0], batch), t.constant_cast(l));
        });
}

// Ablation setting 1: difficulty-only objective over raw per-example
// selection scalars, sum_d s(d) ell_d / sum_d s(d) with s = sigmoid(raw).
// `bank_pos` maps batch rows to raw-scalar indices. Blocks: {S}.
inline DifferentiableFn make_ablation1_fn(std::vector<double> ell, std::vector<int> bank_pos) {
    if (ell.size() != bank_pos.size())
        throw BadArgument("ablation1: loss/index count mismatch");
    return DifferentiableFn(
        {"S"}, [ell = std::move(ell), bank_pos = std::move(bank_pos)](
                   auto& t, const std::vector<int>& b, const Batch& batch) {
            if (static_cast<int>(ell.size()) != batch.size())
                throw BadArgument("ablation1: loss count != batch size");
            Mat<double> l(batch.size(), 1);
            l.a = ell;
            const int f = t.sigmoid_(t.gather(b[0], bank_pos));
            return t.div_scalars(t.dot(f, t.constant_cast(l)), t.sum_all(f));
        });
}

inline std::vector<double> selection_weights(const TesterNet& net, const ParamVector& e,
                                             const ParamVector& c, const Batch& batch,
                                             Precision prec = Precision::f64) {
    Tape<double> t(prec);
    const int e_id = t.constant(detail::column_from<double>(e));
    const int c_id = t.constant(detail::column_from<double>(c));
    return t.val(net.selection(t, e_id, c_id, batch)).a;
}

inline double selection_weight(const TesterNet& net, const ParamVector& e, const ParamVector& c,
                               const Example& d, int num_classes,
                               Precision prec = Precision::f64) {
    Batch b;
    b.num_classes = num_classes;
    b.x = Mat<double>(1, static_cast<int>(d.input.size()));
    b.x.a = d.input;
    b.labels = {d.label};
    b.ids = {d.id};
    b.corrupted = {static_cast<uint8_t>(d.corrupted ? 1 : 0)};
    return selection_weights(net, e, c, b, prec)[0];
}

// Ablation-1 weights for raw scalar positions.
inline std::vector<double> ablation1_selection(const ParamVector& raw,
                                               const std::vector<int>& bank_pos) {
    std::vector<double> f(bank_pos.size());
    for (std::size_t i = 0; i < bank_pos.size(); ++i) f[i] = ad_sigmoid(raw[bank_pos[i]]);
    return f;
}

inline double stage2_loss(const TesterNet& net, const ParamVector& e, const ParamVector& x,
                          const ParamVector& c, const Batch& tt_batch, const Batch& bank,
                          double gamma, Precision prec = Precision::f64) {
    return evaluate(make_stage2_fn(net, tt_batch, gamma), {{"E", &e}, {"X", &x}, {"C", &c}}, bank,
                    prec);
}

inline double val_loss(const TesterNet& net, const ParamVector& e, const ParamVector& x,
                       const Batch& batch, Precision prec = Precision::f64) {
    if (batch.size() == 0) throw BadArgument("val_loss: empty batch");
    return evaluate(make_val_loss_fn(net), {{"E", &e}, {"X", &x}}, batch, prec);
}

inline double ablation2_stage2(const TesterNet& net, const ParamVector& e, const ParamVector& x,
                               const ParamVector& c, const Batch& bank, double gamma,
                               Precision prec = Precision::f64) {
    return evaluate(make_ablation2_fn(net, gamma), {{"E", &e}, {"X", &x}, {"C", &c}}, bank, prec);
}

} // namespace lpt
