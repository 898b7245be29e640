#include "lpt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "lpt/hypergrad.hpp"
#include "lpt/learner.hpp"
#include "lpt/tester.hpp"

namespace lpt {

ParamVector numerical_grad(const std::function<double(const ParamVector&)>& objective,
                           const ParamVector& theta, double eps) {
    std::vector<double> g(theta.size());
    std::vector<double> probe(theta.raw());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double fp = objective(ParamVector(probe));
        probe[i] = saved - eps;
        const double fm = objective(ParamVector(probe));
        probe[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFiniteLoss("numerical_grad: non-finite probe");
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return ParamVector(std::move(g));
}

double rel_err(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw BadArgument("rel_err: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

double rel_err_scalar(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-12);
}

// ---- small dense matrix helpers ---------------------------------------------

namespace {

std::vector<double> matvec(const std::vector<double>& m, int rows, int cols,
                           const std::vector<double>& v) {
    std::vector<double> out(rows, 0.0);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out[i] += m[i * cols + j] * v[j];
    return out;
}

std::vector<double> mat_t_vec(const std::vector<double>& m, int rows, int cols,
                              const std::vector<double>& v) {
    std::vector<double> out(cols, 0.0);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out[j] += m[i * cols + j] * v[i];
    return out;
}

double fro_norm(const std::vector<double>& m) {
    double s = 0.0;
    for (double x : m) s += x * x;
    return std::sqrt(s);
}

// Gauss-Jordan with partial pivoting; returns false when singular.
bool invert(std::vector<double> m, int n, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) out[i * n + i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(m[r * n + col]) > std::abs(m[pivot * n + col])) pivot = r;
        if (std::abs(m[pivot * n + col]) < 1e-14) return false;
        if (pivot != col)
            for (int j = 0; j < n; ++j) {
                std::swap(m[pivot * n + j], m[col * n + j]);
                std::swap(out[pivot * n + j], out[col * n + j]);
            }
        const double inv = 1.0 / m[col * n + col];
        for (int j = 0; j < n; ++j) {
            m[col * n + j] *= inv;
            out[col * n + j] *= inv;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m[r * n + col];
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                m[r * n + j] -= f * m[col * n + j];
                out[r * n + j] -= f * out[col * n + j];
            }
        }
    }
    return true;
}

std::vector<double> random_spd(int n, Rng& rng, double diag_boost) {
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (auto& x : a) x = rng.normal();
    std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += a[k * n + i] * a[k * n + j];
            h[i * n + j] = s / n;
        }
    for (int i = 0; i < n; ++i) h[i * n + i] += diag_boost;
    return h;
}

} // namespace

QuadraticBilevel QuadraticBilevel::random(int dw, int da, Rng& rng, double tanh_coupling) {
    QuadraticBilevel p;
    p.dim_w = dw;
    p.dim_a = da;
    p.H = random_spd(dw, rng, 0.5);
    p.P = random_spd(dw, rng, 0.3);
    p.R = random_spd(da, rng, 0.2);
    p.G.resize(static_cast<std::size_t>(dw) * da);
    for (auto& x : p.G) x = 0.5 * rng.normal();
    p.b.resize(dw);
    p.q.resize(dw);
    p.s.resize(da);
    for (auto& x : p.b) x = 0.5 * rng.normal();
    for (auto& x : p.q) x = 0.5 * rng.normal();
    for (auto& x : p.s) x = 0.5 * rng.normal();
    p.tanh_coupling = tanh_coupling;
    return p;
}

DifferentiableFn make_bilevel_inner_fn(const QuadraticBilevel& p) {
    return DifferentiableFn({"A", "W"}, [p](auto& t, const std::vector<int>& blk, const Batch&) {
        Mat<double> h(p.dim_w, p.dim_w), g(p.dim_w, p.dim_a), b(p.dim_w, 1);
        h.a = p.H;
        g.a = p.G;
        b.a = p.b;
        const int a = blk[0], w = blk[1];
        int loss = t.scale(t.dot(w, t.matmul(t.constant_cast(h), w)), 0.5);
        loss = t.add(loss, t.dot(w, t.add(t.matmul(t.constant_cast(g), a), t.constant_cast(b))));
        if (p.tanh_coupling != 0.0) {
            std::vector<int> pattern(p.dim_w);
            for (int i = 0; i < p.dim_w; ++i) pattern[i] = i % p.dim_a;
            const int coupled = t.dot(t.gather(a, pattern), t.tanh_(w));
            loss = t.add(loss, t.scale(coupled, p.tanh_coupling));
        }
        return loss;
    });
}

DifferentiableFn make_bilevel_outer_fn(const QuadraticBilevel& p) {
    return DifferentiableFn({"A", "W"}, [p](auto& t, const std::vector<int>& blk, const Batch&) {
        Mat<double> pm(p.dim_w, p.dim_w), r(p.dim_a, p.dim_a), q(p.dim_w, 1), s(p.dim_a, 1);
        pm.a = p.P;
        r.a = p.R;
        q.a = p.q;
        s.a = p.s;
        const int a = blk[0], w = blk[1];
        int loss = t.scale(t.dot(w, t.matmul(t.constant_cast(pm), w)), 0.5);
        loss = t.add(loss, t.dot(t.constant_cast(q), w));
        loss = t.add(loss, t.scale(t.dot(a, t.matmul(t.constant_cast(r), a)), 0.5));
        loss = t.add(loss, t.dot(t.constant_cast(s), a));
        return loss;
    });
}

BilevelExact quadratic_bilevel_exact(const QuadraticBilevel& p, const ParamVector& a) {
    if (p.tanh_coupling != 0.0)
        throw BadArgument("quadratic_bilevel_exact: closed form needs tanh_coupling == 0");
    if (static_cast<int>(a.size()) != p.dim_a)
        throw BadArgument("quadratic_bilevel_exact: arch dimension mismatch");
    std::vector<double> h_inv;
    if (!invert(p.H, p.dim_w, h_inv))
        throw IllConditioned("quadratic_bilevel_exact: H is singular");
    if (fro_norm(p.H) * fro_norm(h_inv) > 1e8)
        throw IllConditioned("quadratic_bilevel_exact: cond(H) > 1e8");

    // w* = -H^{-1} (G a + b)
    std::vector<double> ga = matvec(p.G, p.dim_w, p.dim_a, a.raw());
    for (int i = 0; i < p.dim_w; ++i) ga[i] += p.b[i];
    std::vector<double> w_star = matvec(h_inv, p.dim_w, p.dim_w, ga);
    for (auto& x : w_star) x = -x;

    // grad = R a + s - G' H^{-1} (P w* + q)
    std::vector<double> pwq = matvec(p.P, p.dim_w, p.dim_w, w_star);
    for (int i = 0; i < p.dim_w; ++i) pwq[i] += p.q[i];
    const std::vector<double> hpwq = matvec(h_inv, p.dim_w, p.dim_w, pwq);
    const std::vector<double> gt = mat_t_vec(p.G, p.dim_w, p.dim_a, hpwq);
    std::vector<double> grad = matvec(p.R, p.dim_a, p.dim_a, a.raw());
    for (int j = 0; j < p.dim_a; ++j) grad[j] += p.s[j] - gt[j];

    return BilevelExact{ParamVector(std::move(w_star)), ParamVector(std::move(grad))};
}

ParamVector quadratic_one_step_grad(const QuadraticBilevel& p, const ParamVector& a,
                                    const ParamVector& w, double xi) {
    // w'(a) = w - xi grad_w inner(a, w)
    std::vector<double> gw = matvec(p.H, p.dim_w, p.dim_w, w.raw());
    const std::vector<double> ga = matvec(p.G, p.dim_w, p.dim_a, a.raw());
    std::vector<double> tanh_d(p.dim_w, 0.0);
    for (int i = 0; i < p.dim_w; ++i) {
        gw[i] += ga[i] + p.b[i];
        if (p.tanh_coupling != 0.0) {
            const double th = std::tanh(w[i]);
            tanh_d[i] = (1.0 - th * th);
            gw[i] += p.tanh_coupling * a[i % p.dim_a] * tanh_d[i];
        }
    }
    std::vector<double> w1(p.dim_w);
    for (int i = 0; i < p.dim_w; ++i) w1[i] = w[i] - xi * gw[i];

    // d outer / d a = R a + s + (dw'/da)' (P w' + q)
    std::vector<double> pwq = matvec(p.P, p.dim_w, p.dim_w, w1);
    for (int i = 0; i < p.dim_w; ++i) pwq[i] += p.q[i];
    std::vector<double> grad = matvec(p.R, p.dim_a, p.dim_a, a.raw());
    for (int j = 0; j < p.dim_a; ++j) grad[j] += p.s[j];
    for (int i = 0; i < p.dim_w; ++i)
        for (int j = 0; j < p.dim_a; ++j) {
            double dwda = -xi * p.G[i * p.dim_a + j];
            if (p.tanh_coupling != 0.0 && j == i % p.dim_a)
                dwda -= xi * p.tanh_coupling * tanh_d[i];
            grad[j] += dwda * pwq[i];
        }
    return ParamVector(std::move(grad));
}

// ---- genotype enumeration ----------------------------------------------------

std::vector<Genotype> all_genotypes(const CellSpec& spec) {
    spec.validate();
    std::vector<std::string> real_ops;
    for (const auto& op : spec.ops)
        if (op != "zero") real_ops.push_back(op);

    // Per intermediate node: all predecessor combinations x op assignments.
    std::vector<std::vector<GenotypeNode>> node_options;
    for (int j = 2; j < spec.num_nodes; ++j) {
        const int keep = std::min(spec.k_in, j);
        std::vector<int> comb(keep);
        std::vector<GenotypeNode> options;
        std::function<void(int, int)> pick = [&](int start, int depth) {
            if (depth == keep) {
                std::vector<int> op_idx(keep, 0);
                while (true) {
                    GenotypeNode node;
                    node.node = j;
                    for (int k = 0; k < keep; ++k)
                        node.edges.push_back(GenotypeEdge{comb[k], real_ops[op_idx[k]]});
                    options.push_back(node);
                    int carry = keep - 1;
                    while (carry >= 0 && ++op_idx[carry] == static_cast<int>(real_ops.size())) {
                        op_idx[carry] = 0;
                        --carry;
                    }
                    if (carry < 0) break;
                }
                return;
            }
            for (int i = start; i < j; ++i) {
                comb[depth] = i;
                pick(i + 1, depth + 1);
            }
        };
        pick(0, 0);
        node_options.push_back(std::move(options));
    }

    std::vector<Genotype> out;
    std::vector<int> cursor(node_options.size(), 0);
    while (true) {
        Genotype g;
        for (std::size_t n = 0; n < node_options.size(); ++n)
            g.nodes.push_back(node_options[n][cursor[n]]);
        out.push_back(std::move(g));
        int carry = static_cast<int>(node_options.size()) - 1;
        while (carry >= 0 &&
               ++cursor[carry] == static_cast<int>(node_options[carry].size())) {
            cursor[carry] = 0;
            --carry;
        }
        if (carry < 0) break;
    }
    return out;
}

std::vector<RankedGenotype> enumerate_genotypes(const CellSpec& spec, const Dataset& train,
                                                const Dataset& test, const TrainBudget& budget) {
    const std::vector<Genotype> genotypes = all_genotypes(spec);
    if (genotypes.size() > 200)
        throw BadArgument("enumerate_genotypes: space has " + std::to_string(genotypes.size()) +
                          " genotypes (cap 200)");
    std::vector<RankedGenotype> ranked;
    ranked.reserve(genotypes.size());
    for (const Genotype& g : genotypes) {
        DiscreteNet net(spec, g, train.dim, train.num_classes);
        const ParamVector w = train_discrete(net, train, budget);
        const auto [err, loss] = evaluate_discrete(net, w, test);
        ranked.push_back(RankedGenotype{g, err, loss});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedGenotype& a, const RankedGenotype& b) {
                         if (a.error_rate != b.error_rate) return a.error_rate < b.error_rate;
                         return a.mean_loss < b.mean_loss;
                     });
    return ranked;
}

// ---- self-check suites --------------------------------------------------------

namespace {

Batch random_batch(int n, int dim, int classes, Rng& rng) {
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

// max rel err of value_and_grad vs numerical_grad over every block of f.
double gradcheck(const DifferentiableFn& f, const NamedBlocks& blocks, const Batch& batch) {
    double worst = 0.0;
    for (const auto& [name, block] : blocks) {
        auto r = value_and_grad(f, blocks, batch, {name});
        auto objective = [&](const ParamVector& theta) {
            NamedBlocks probe = blocks;
            for (auto& [n, p] : probe)
                if (n == name) p = &theta;
            return evaluate(f, probe, batch);
        };
        const ParamVector num = numerical_grad(objective, *block);
        worst = std::max(worst, rel_err(r.grads.at(name), num));
    }
    return worst;
}

struct SuiteBuilder {
    std::vector<OracleCheck> checks;
    void add(const std::string& name, double err, double tol) {
        checks.push_back(OracleCheck{name, err, tol, err <= tol});
    }
};

void autodiff_suite(SuiteBuilder& sb) {
    Rng rng(20240801);

    // Learner-side losses on a small supernet.
    CellSpec cell;
    cell.num_nodes = 4;
    cell.num_cells = 1;
    cell.width = 3;
    LearnerNet lnet(cell, 2, 2);
    double worst_train = 0.0, worst_weighted = 0.0, worst_norm = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const Batch batch = random_batch(5, 2, 2, rng);
        ParamVector arch = ParamVector::randn(lnet.arch_size(), rng, 0.5);
        ParamVector w = lnet.init_weights(rng);
        NamedBlocks blocks{{"A", &arch}, {"W", &w}};
        worst_train = std::max(worst_train, gradcheck(make_train_loss_fn(lnet), blocks, batch));
        std::vector<double> f(batch.size());
        for (auto& x : f) x = rng.uniform(0.05, 1.0);
        worst_weighted =
            std::max(worst_weighted, gradcheck(make_weighted_test_loss_fn(lnet, f), blocks, batch));
        worst_norm = std::max(worst_norm,
                              gradcheck(make_normalized_test_loss_fn(lnet, f), blocks, batch));
    }
    sb.add("grad.train_loss", worst_train, 1e-5);
    sb.add("grad.weighted_test_loss", worst_weighted, 1e-5);
    sb.add("grad.normalized_test_loss", worst_norm, 1e-5);

    // Tester-side losses.
    TesterNet tnet(TesterSpec{3, 3, InputKind::vector_in, {}}, 2, 2);
    double worst_stage2 = 0.0, worst_val = 0.0, worst_bank = 0.0, worst_sel = 0.0,
           worst_ab1 = 0.0, worst_ab2 = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const Batch bank = random_batch(4, 2, 2, rng);
        const Batch tt = random_batch(4, 2, 2, rng);
        ParamVector e = tnet.init_encoder(rng);
        ParamVector c = ParamVector::randn(tnet.creator_size(), rng, 0.5);
        ParamVector x = tnet.init_executor(rng);
        NamedBlocks exc{{"E", &e}, {"X", &x}, {"C", &c}};
        worst_stage2 = std::max(worst_stage2, gradcheck(make_stage2_fn(tnet, tt, 0.7), exc, bank));
        worst_ab2 = std::max(worst_ab2, gradcheck(make_ablation2_fn(tnet, 0.7), exc, bank));
        worst_bank = std::max(worst_bank, gradcheck(make_bank_exec_fn(tnet), exc, bank));
        worst_val = std::max(worst_val,
                             gradcheck(make_val_loss_fn(tnet), {{"E", &e}, {"X", &x}}, tt));
        NamedBlocks ce{{"C", &c}, {"E", &e}};
        worst_sel = std::max(worst_sel, gradcheck(make_sel_sum_fn(tnet), ce, bank));
        std::vector<double> ell(bank.size());
        for (auto& l : ell) l = rng.uniform(0.1, 3.0);
        worst_sel = std::max(worst_sel, gradcheck(make_sel_weighted_fn(tnet, ell), ce, bank));
        ParamVector s = ParamVector::randn(bank.size(), rng, 1.0);
        std::vector<int> pos(bank.size());
        std::iota(pos.begin(), pos.end(), 0);
        worst_ab1 = std::max(worst_ab1,
                             gradcheck(make_ablation1_fn(ell, pos), {{"S", &s}}, bank));
    }
    sb.add("grad.stage2_loss", worst_stage2, 1e-5);
    sb.add("grad.val_loss", worst_val, 1e-5);
    sb.add("grad.bank_exec_loss", worst_bank, 1e-5);
    sb.add("grad.selection", worst_sel, 1e-5);
    sb.add("grad.ablation1", worst_ab1, 1e-5);
    sb.add("grad.ablation2", worst_ab2, 1e-5);

    // Exact HVP vs central difference of gradients on the bilevel inner loss.
    double worst_hvp = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const QuadraticBilevel p = QuadraticBilevel::random(4, 3, rng, 0.3);
        const DifferentiableFn inner = make_bilevel_inner_fn(p);
        ParamVector a = ParamVector::randn(p.dim_a, rng, 1.0);
        ParamVector w = ParamVector::randn(p.dim_w, rng, 1.0);
        ParamVector v = ParamVector::randn(p.dim_w, rng, 1.0);
        const ParamVector hv = hvp_exact(inner, {{"A", &a}, {"W", &w}}, "W", v, Batch{});
        const double eps = 1e-4;
        ParamVector wp = w, wm = w;
        wp.add_scaled(eps, v);
        wm.add_scaled(-eps, v);
        auto gp = value_and_grad(inner, {{"A", &a}, {"W", &wp}}, Batch{}, {"W"});
        auto gm = value_and_grad(inner, {{"A", &a}, {"W", &wm}}, Batch{}, {"W"});
        ParamVector fd = std::move(gp.grads.at("W"));
        fd.add_scaled(-1.0, gm.grads.at("W"));
        fd.scale(1.0 / (2.0 * eps));
        worst_hvp = std::max(worst_hvp, rel_err(hv, fd));
    }
    sb.add("hvp.exact_vs_fd", worst_hvp, 1e-5);
}

void hypergrad_suite(SuiteBuilder& sb) {
    Rng rng(20240802);
    const UnrollConfig cfg{0.08, 0.08, 0.08, 0.01, false};

    // Architecture hypergradient vs numerical gradient of the composed map.
    double worst_arch = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const QuadraticBilevel p =
            QuadraticBilevel::random(4, 3, rng, trial % 2 == 0 ? 0.0 : 0.4);
        const DifferentiableFn inner = make_bilevel_inner_fn(p);
        const DifferentiableFn outer = make_bilevel_outer_fn(p);
        const ParamVector a = ParamVector::randn(p.dim_a, rng, 0.8);
        const ParamVector w = ParamVector::randn(p.dim_w, rng, 0.8);
        const ParamVector hg =
            arch_hypergradient(inner, outer, a, w, Batch{}, Batch{}, cfg);
        auto composed = [&](const ParamVector& aa) {
            const ParamVector w1 = learner_unroll(inner, aa, w, Batch{}, cfg.xi_ln);
            return evaluate(outer, {{"A", &aa}, {"W", &w1}}, Batch{});
        };
        worst_arch = std::max(worst_arch, rel_err(hg, numerical_grad(composed, a)));
    }
    sb.add("hypergrad.arch_one_step", worst_arch, 1e-3);

    // Creator gradient paths on a tiny tester instance.
    TesterNet tnet(TesterSpec{2, 2, InputKind::vector_in, {}}, 2, 2);
    const Batch bank = random_batch(3, 2, 2, rng);
    const Batch tt = random_batch(3, 2, 2, rng);
    const Batch val = random_batch(3, 2, 2, rng);
    const double gamma = 0.8, lambda = 0.9;
    const ParamVector e0 = tnet.init_encoder(rng);
    const ParamVector x0 = tnet.init_executor(rng);
    const ParamVector c0 = ParamVector::randn(tnet.creator_size(), rng, 0.4);
    std::vector<double> ell(bank.size());
    for (auto& l : ell) l = rng.uniform(0.2, 2.5);

    const DifferentiableFn stage2 = make_stage2_fn(tnet, tt, gamma);
    const DifferentiableFn bank_fn = make_bank_exec_fn(tnet);
    const DifferentiableFn val_fn = make_val_loss_fn(tnet);
    const DifferentiableFn num_fn = make_sel_weighted_fn(tnet, ell);
    const DifferentiableFn den_fn = make_sel_sum_fn(tnet);

    auto unrolled = [&](const ParamVector& c) {
        return tester_unroll(stage2, e0, x0, c, bank, cfg);
    };
    const auto [e1, x1] = unrolled(c0);

    const ParamVector gval =
        creator_grad_val(bank_fn, val_fn, e0, x0, c0, e1, x1, bank, val, gamma, cfg);
    auto composed_val = [&](const ParamVector& c) {
        const auto [ec, xc] = unrolled(c);
        return evaluate(val_fn, {{"E", &ec}, {"X", &xc}}, val);
    };
    sb.add("hypergrad.creator_val_path", rel_err(gval, numerical_grad(composed_val, c0)), 1e-3);

    const ParamVector gdiff =
        creator_grad_difficulty(num_fn, den_fn, bank_fn, e0, x0, c0, e1, bank, gamma, cfg);
    auto composed_diff = [&](const ParamVector& c) {
        const auto [ec, xc] = unrolled(c);
        const double num = evaluate(num_fn, {{"C", &c}, {"E", &ec}}, bank);
        const double den = evaluate(den_fn, {{"C", &c}, {"E", &ec}}, bank);
        return num / den;
    };
    sb.add("hypergrad.creator_difficulty_path", rel_err(gdiff, numerical_grad(composed_diff, c0)),
           1e-3);

    const CreatorGrad total = creator_total_grad(num_fn, den_fn, bank_fn, val_fn, e0, x0, c0, e1,
                                                 x1, bank, val, gamma, lambda, cfg);
    auto composed_total = [&](const ParamVector& c) {
        return composed_diff(c) - lambda * composed_val(c);
    };
    sb.add("hypergrad.creator_total", rel_err(total.ascent, numerical_grad(composed_total, c0)),
           1e-3);

    // Finite-difference HVP vs the exact product at the default scale.
    double worst_fd_hvp = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const QuadraticBilevel p = QuadraticBilevel::random(5, 3, rng, 0.0);
        const DifferentiableFn inner = make_bilevel_inner_fn(p);
        const ParamVector a = ParamVector::randn(p.dim_a, rng, 0.8);
        const ParamVector w = ParamVector::randn(p.dim_w, rng, 0.8);
        const ParamVector v = ParamVector::randn(p.dim_w, rng, 1.0);
        const ParamVector exact = hvp_exact(inner, {{"A", &a}, {"W", &w}}, "W", v, Batch{});
        const double alpha = fd_coefficient(v, 0.01);
        ParamVector wp = w, wm = w;
        wp.add_scaled(alpha, v);
        wm.add_scaled(-alpha, v);
        auto gp = value_and_grad(inner, {{"A", &a}, {"W", &wp}}, Batch{}, {"W"});
        auto gm = value_and_grad(inner, {{"A", &a}, {"W", &wm}}, Batch{}, {"W"});
        ParamVector fd = std::move(gp.grads.at("W"));
        fd.add_scaled(-1.0, gm.grads.at("W"));
        fd.scale(1.0 / (2.0 * alpha));
        worst_fd_hvp = std::max(worst_fd_hvp, rel_err(fd, exact));
    }
    sb.add("hypergrad.fd_hvp_default_scale", worst_fd_hvp, 1e-2);
}

void bilevel_suite(SuiteBuilder& sb) {
    Rng rng(20240803);
    const double xi = 0.1;
    double worst_ratio = 0.0, worst_bound = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const QuadraticBilevel p = QuadraticBilevel::random(4, 3, rng, 0.0);
        ParamVector a = ParamVector::randn(p.dim_a, rng, 0.8);
        const BilevelExact exact = quadratic_bilevel_exact(p, a);
        const ParamVector onestep = quadratic_one_step_grad(p, a, exact.w_star, xi);
        ParamVector diff = exact.hypergrad;
        diff.add_scaled(-1.0, onestep);

        // ||exact - onestep|| <= ||I - xi H||_F * ||G' H^{-1} (P w* + q)||
        std::vector<double> i_xh(p.H);
        for (auto& v : i_xh) v = -xi * v;
        for (int i = 0; i < p.dim_w; ++i) i_xh[i * p.dim_w + i] += 1.0;
        std::vector<double> h_inv;
        invert(p.H, p.dim_w, h_inv);
        std::vector<double> pwq = matvec(p.P, p.dim_w, p.dim_w, exact.w_star.raw());
        for (int i = 0; i < p.dim_w; ++i) pwq[i] += p.q[i];
        const ParamVector scale(mat_t_vec(p.G, p.dim_w, p.dim_a,
                                          matvec(h_inv, p.dim_w, p.dim_w, pwq)));
        const double ratio = diff.norm2() / std::max(scale.norm2(), 1e-12);
        worst_ratio = std::max(worst_ratio, ratio);
        worst_bound = std::max(worst_bound, ratio / std::max(fro_norm(i_xh), 1e-12));
    }
    sb.add("bilevel.one_step_measured_ratio", worst_ratio, 10.0); // reported, loosely bounded
    sb.add("bilevel.one_step_factor_within_bound", worst_bound, 1.0 + 1e-9);

    // Scalar H with xi = 1/H: the one-step update is an exact Newton step.
    QuadraticBilevel p;
    p.dim_w = 1;
    p.dim_a = 1;
    p.H = {2.5};
    p.G = {1.3};
    p.P = {1.0};
    p.R = {0.4};
    p.b = {0.2};
    p.q = {-0.1};
    p.s = {0.3};
    ParamVector a(std::vector<double>{0.7});
    ParamVector w(std::vector<double>{-0.9});
    const BilevelExact exact = quadratic_bilevel_exact(p, a);
    const ParamVector newton = quadratic_one_step_grad(p, a, w, 1.0 / p.H[0]);
    sb.add("bilevel.scalar_newton_step_exact", rel_err(newton, exact.hypergrad), 1e-10);
}

} // namespace

std::vector<OracleCheck> run_oracle_suite(const std::string& suite) {
    SuiteBuilder sb;
    bool known = false;
    if (suite == "all" || suite == "autodiff") {
        autodiff_suite(sb);
        known = true;
    }
    if (suite == "all" || suite == "hypergrad") {
        hypergrad_suite(sb);
        known = true;
    }
    if (suite == "all" || suite == "bilevel") {
        bilevel_suite(sb);
        known = true;
    }
    if (!known) throw BadArgument("unknown oracle suite '" + suite + "'");
    return sb.checks;
}

void write_oracle_report(const std::string& path, const std::vector<OracleCheck>& checks) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const OracleCheck& c : checks) {
        nlohmann::ordered_json jc;
        jc["name"] = c.name;
        jc["max_rel_err"] = c.max_rel_err;
        jc["tolerance"] = c.tolerance;
        jc["pass"] = c.pass;
        j.push_back(jc);
    }
    std::ofstream f(path);
    if (!f) throw IoError("write_oracle_report: cannot open " + path);
    f << j.dump(2) << '\n';
}

} // namespace lpt
