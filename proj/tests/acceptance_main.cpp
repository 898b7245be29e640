// Acceptance suite: one check per criterion, one PASS/FAIL line each.
// Run with no arguments for the full gate or with criterion numbers to run a
// subset (e.g. ./lpt_acceptance 6 7).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lpt/engine.hpp"
#include "lpt/hypergrad.hpp"
#include "lpt/oracle.hpp"

using namespace lpt;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

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

double gradcheck_fn(const DifferentiableFn& f, const NamedBlocks& blocks, const Batch& batch) {
    double worst = 0.0;
    for (const auto& [name, block] : blocks) {
        auto r = value_and_grad(f, blocks, batch, {name});
        auto objective = [&](const ParamVector& theta) {
            NamedBlocks probe = blocks;
            for (auto& [n, p] : probe)
                if (n == name) p = &theta;
            return evaluate(f, probe, batch);
        };
        worst = std::max(worst, rel_err(r.grads.at(name), numerical_grad(objective, *block, 1e-5)));
    }
    return worst;
}

// ---- criterion 1: autodiff soundness over every loss family -----------------

Outcome criterion1() {
    Rng rng(101);
    double worst = 0.0;
    std::string worst_name = "none";
    auto track = [&](const char* name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    for (int inst = 0; inst < 20; ++inst) {
        CellSpec cell;
        cell.num_nodes = 4;
        cell.width = 2 + static_cast<int>(rng.below(2));
        LearnerNet lnet(cell, 2, 2);
        TesterNet tnet(TesterSpec{2 + static_cast<int>(rng.below(2)),
                                  2 + static_cast<int>(rng.below(2)), InputKind::vector_in, {}},
                       2, 2);

        const Batch tr = random_batch(4, 2, 2, rng);
        const Batch bank = random_batch(4, 2, 2, rng);
        const Batch val = random_batch(4, 2, 2, rng);
        ParamVector arch = ParamVector::randn(lnet.arch_size(), rng, 0.6);
        ParamVector w = lnet.init_weights(rng);
        ParamVector e = tnet.init_encoder(rng);
        ParamVector x = tnet.init_executor(rng);
        ParamVector c = ParamVector::randn(tnet.creator_size(), rng, 0.6);
        std::vector<double> f(bank.size()), ell(bank.size());
        for (auto& v : f) v = rng.uniform(0.05, 0.95);
        for (auto& v : ell) v = rng.uniform(0.1, 3.0);
        const double gamma = rng.uniform(0.2, 1.5);

        const NamedBlocks aw{{"A", &arch}, {"W", &w}};
        const NamedBlocks exc{{"E", &e}, {"X", &x}, {"C", &c}};
        const NamedBlocks ce{{"C", &c}, {"E", &e}};
        track("train_loss", gradcheck_fn(make_train_loss_fn(lnet), aw, tr));
        track("weighted_test_loss", gradcheck_fn(make_weighted_test_loss_fn(lnet, f), aw, bank));
        track("normalized_test_loss",
              gradcheck_fn(make_normalized_test_loss_fn(lnet, f), aw, bank));
        track("stage2_loss", gradcheck_fn(make_stage2_fn(tnet, tr, gamma), exc, bank));
        track("ablation2_loss", gradcheck_fn(make_ablation2_fn(tnet, gamma), exc, bank));
        track("bank_exec_loss", gradcheck_fn(make_bank_exec_fn(tnet), exc, bank));
        track("val_loss", gradcheck_fn(make_val_loss_fn(tnet), {{"E", &e}, {"X", &x}}, val));
        track("sel_sum", gradcheck_fn(make_sel_sum_fn(tnet), ce, bank));
        track("sel_weighted", gradcheck_fn(make_sel_weighted_fn(tnet, ell), ce, bank));
        ParamVector s = ParamVector::randn(bank.size(), rng, 1.0);
        std::vector<int> pos(bank.size());
        for (int i = 0; i < bank.size(); ++i) pos[i] = i;
        track("ablation1_objective",
              gradcheck_fn(make_ablation1_fn(ell, pos), {{"S", &s}}, bank));
    }

    std::ostringstream ss;
    ss << "max rel err " << worst << " (" << worst_name << ") over 20 instances x 10 losses";
    return Outcome{worst <= 1e-5, ss.str()};
}

// ---- criterion 2: architecture hypergradient -----------------------------------

Outcome criterion2() {
    UnrollConfig cfg;
    cfg.xi_ln = 0.09;
    Rng rng(202);

    struct Instance {
        QuadraticBilevel p;
        ParamVector a, w;
    };
    std::vector<Instance> instances;
    for (int i = 0; i < 12; ++i) {
        const double tanh_coupling = i < 6 ? 0.0 : 0.8;
        QuadraticBilevel p = QuadraticBilevel::random(5, 4, rng, tanh_coupling); // 9 params
        instances.push_back(
            Instance{p, ParamVector::randn(4, rng, 0.7), ParamVector::randn(5, rng, 0.7)});
    }

    auto max_err_at = [&](double scale) {
        double worst = 0.0;
        UnrollConfig c2 = cfg;
        c2.fd_epsilon_scale = scale;
        for (const Instance& inst : instances) {
            const DifferentiableFn inner = make_bilevel_inner_fn(inst.p);
            const DifferentiableFn outer = make_bilevel_outer_fn(inst.p);
            const ParamVector g =
                arch_hypergradient(inner, outer, inst.a, inst.w, Batch{}, Batch{}, c2);
            auto composed = [&](const ParamVector& aa) {
                const ParamVector w1 = learner_unroll(inner, aa, inst.w, Batch{}, c2.xi_ln);
                return evaluate(outer, {{"A", &aa}, {"W", &w1}}, Batch{});
            };
            worst = std::max(worst, rel_err(g, numerical_grad(composed, inst.a)));
        }
        return worst;
    };

    const double err_default = max_err_at(1e-2);
    const double err_coarse = max_err_at(1e-1);
    const double err_fine = max_err_at(1e-3);
    std::ostringstream ss;
    ss << "rel err at scales {1e-1,1e-2,1e-3} = {" << err_coarse << ", " << err_default << ", "
       << err_fine << "} on 12 instances";
    const bool pass = err_default <= 1e-3 && err_coarse > err_default && err_default > err_fine;
    return Outcome{pass, ss.str()};
}

// ---- criterion 3: creator gradient ----------------------------------------------

Outcome criterion3() {
    double worst_val = 0.0, worst_diff = 0.0, worst_total = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        Rng rng(300 + inst);
        TesterNet tnet(TesterSpec{2, 2, InputKind::vector_in, {}}, 2, 2);
        const Batch bank = random_batch(3, 2, 2, rng);
        const Batch tt = random_batch(3, 2, 2, rng);
        const Batch val = random_batch(3, 2, 2, rng);
        const ParamVector e = tnet.init_encoder(rng);
        const ParamVector x = tnet.init_executor(rng);
        const ParamVector c = ParamVector::randn(tnet.creator_size(), rng, 0.5);
        std::vector<double> ell(bank.size());
        for (auto& l : ell) l = rng.uniform(0.2, 2.5);
        const double gamma = rng.uniform(0.3, 1.2);
        const double lambda = rng.uniform(0.3, 1.2);
        UnrollConfig cfg;
        cfg.xi_e = rng.uniform(0.03, 0.1);
        cfg.xi_x = rng.uniform(0.03, 0.1);

        const DifferentiableFn stage2 = make_stage2_fn(tnet, tt, gamma);
        const DifferentiableFn bank_fn = make_bank_exec_fn(tnet);
        const DifferentiableFn val_fn = make_val_loss_fn(tnet);
        const DifferentiableFn num_fn = make_sel_weighted_fn(tnet, ell);
        const DifferentiableFn den_fn = make_sel_sum_fn(tnet);
        const auto [e1, x1] = tester_unroll(stage2, e, x, c, bank, cfg);

        auto unrolled = [&](const ParamVector& cc) {
            return tester_unroll(stage2, e, x, cc, bank, cfg);
        };
        auto composed_val = [&](const ParamVector& cc) {
            const auto [ec, xc] = unrolled(cc);
            return evaluate(val_fn, {{"E", &ec}, {"X", &xc}}, val);
        };
        auto composed_diff = [&](const ParamVector& cc) {
            const auto [ec, xc] = unrolled(cc);
            const double n = evaluate(num_fn, {{"C", &cc}, {"E", &ec}}, bank);
            const double d = evaluate(den_fn, {{"C", &cc}, {"E", &ec}}, bank);
            return n / d;
        };

        const ParamVector gv =
            creator_grad_val(bank_fn, val_fn, e, x, c, e1, x1, bank, val, gamma, cfg);
        worst_val = std::max(worst_val, rel_err(gv, numerical_grad(composed_val, c)));

        const ParamVector gd =
            creator_grad_difficulty(num_fn, den_fn, bank_fn, e, x, c, e1, bank, gamma, cfg);
        worst_diff = std::max(worst_diff, rel_err(gd, numerical_grad(composed_diff, c)));

        const CreatorGrad gt = creator_total_grad(num_fn, den_fn, bank_fn, val_fn, e, x, c, e1,
                                                  x1, bank, val, gamma, lambda, cfg);
        auto composed_total = [&](const ParamVector& cc) {
            return composed_diff(cc) - lambda * composed_val(cc);
        };
        worst_total = std::max(worst_total, rel_err(gt.ascent, numerical_grad(composed_total, c)));
    }
    std::ostringstream ss;
    ss << "rel err val/difficulty/total = " << worst_val << "/" << worst_diff << "/"
       << worst_total << " over 10 instances";
    return Outcome{worst_val <= 1e-3 && worst_diff <= 1e-3 && worst_total <= 1e-3, ss.str()};
}

// ---- criterion 4: degenerate guards -------------------------------------------

LptConfig small_run_config() {
    LptConfig cfg = default_config();
    cfg.seed = 7;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.data.n = 96;
    cfg.data.noise = 0.12;
    cfg.data.corrupt_frac = 0.1;
    cfg.data.test_n = 64;
    cfg.cell.num_nodes = 4;
    cfg.cell.width = 3;
    cfg.tester.encoder_hidden = 6;
    cfg.tester.latent_dim = 6;
    return cfg;
}

Outcome criterion4() {
    std::vector<std::string> failures;

    // (a) sum f -> 0 raises DegenerateTest from the normalized loss.
    {
        CellSpec cell;
        cell.num_nodes = 4;
        cell.width = 2;
        LearnerNet lnet(cell, 2, 2);
        bool threw = false;
        try {
            (void)make_normalized_test_loss_fn(lnet, {1e-9, 1e-8});
        } catch (const DegenerateTest&) {
            threw = true;
        }
        if (!threw) failures.push_back("normalized loss accepted sum(f)~0");
    }

    // (b) a degenerate step skips arch/creator updates and the run continues.
    {
        const LptConfig cfg = small_run_config();
        auto [src, test] = load_data(cfg);
        LptEngine engine(cfg, make_run_splits(cfg, src));
        LptState& st = engine.state();
        st.tester.creator.set(st.tester.creator.size() - 1, -40.0);
        st.e_unrolled = st.tester.encoder;
        const std::uint64_t arch_before = st.learner.arch.hash64();
        const StepOutput o1 = engine.step();
        const StepOutput o2 = engine.step();
        if (!o1.row.degenerate_test) failures.push_back("degenerate step not flagged");
        if (engine.state().learner.arch.hash64() != arch_before)
            failures.push_back("arch updated on a degenerate step");
        if (!std::isfinite(o1.row.train_loss) || !std::isfinite(o2.row.train_loss))
            failures.push_back("run did not continue after a degenerate step");
    }

    // (c) zero direction: ZeroDirection raised, FD term dropped to zero.
    {
        bool threw = false;
        try {
            (void)fd_coefficient(ParamVector::zeros(4), 0.01);
        } catch (const ZeroDirection&) {
            threw = true;
        }
        if (!threw) failures.push_back("fd_coefficient accepted a zero direction");

        QuadraticBilevel p;
        p.dim_w = 2;
        p.dim_a = 2;
        p.H = {1, 0, 0, 1};
        p.G = {0.4, 0, 0, 0.4};
        p.P = {0, 0, 0, 0}; // outer ignores W: grad_W' test = 0
        p.R = {1, 0, 0, 1};
        p.b = {0.1, 0.2};
        p.q = {0, 0};
        p.s = {0.3, -0.2};
        UnrollConfig ucfg;
        ucfg.xi_ln = 0.1;
        HypergradStats stats;
        const ParamVector a(std::vector<double>{0.5, -0.25});
        const ParamVector w(std::vector<double>{0.3, 0.1});
        const ParamVector g = arch_hypergradient(make_bilevel_inner_fn(p),
                                                 make_bilevel_outer_fn(p), a, w, Batch{}, Batch{},
                                                 ucfg, Precision::f64, &stats);
        if (stats.fd_probe_evals != 0) failures.push_back("FD term evaluated on zero direction");
        const double want0 = 0.5 + 0.3, want1 = -0.25 - 0.2; // R a + s
        if (std::abs(g[0] - want0) > 1e-12 || std::abs(g[1] - want1) > 1e-12)
            failures.push_back("FD term not exactly zeroed");
    }

    std::ostringstream ss;
    if (failures.empty())
        ss << "DegenerateTest and ZeroDirection guards hold; runs continue";
    else
        for (const auto& f : failures) ss << f << "; ";
    return Outcome{failures.empty(), ss.str()};
}

// ---- criterion 5: isolation and determinism ------------------------------------

Outcome criterion5() {
    const LptConfig cfg = small_run_config();
    auto [src, test] = load_data(cfg);

    // 100 consecutive steps of per-phase block isolation.
    LptEngine engine(cfg, make_run_splits(cfg, src));
    long violations = 0;
    struct H {
        std::uint64_t a, w, c, e, x;
    };
    auto hash_of = [](const LptState& st) {
        return H{st.learner.arch.hash64(), st.learner.weights.hash64(),
                 st.tester.creator.hash64(), st.tester.encoder.hash64(),
                 st.tester.executor.hash64()};
    };
    H before = hash_of(engine.state());
    for (int i = 0; i < 100; ++i) {
        (void)engine.step([&](StepPhase phase, const LptState& st) {
            const H now = hash_of(st);
            switch (phase) {
            case StepPhase::arch:
                violations += (now.w != before.w) + (now.c != before.c) + (now.e != before.e) +
                              (now.x != before.x);
                break;
            case StepPhase::creator:
                violations += (now.a != before.a) + (now.w != before.w) + (now.e != before.e) +
                              (now.x != before.x);
                break;
            case StepPhase::encoder_executor:
                violations += (now.a != before.a) + (now.w != before.w) + (now.c != before.c);
                break;
            case StepPhase::weights:
                violations += (now.a != before.a) + (now.c != before.c) + (now.e != before.e) +
                              (now.x != before.x);
                break;
            }
            before = now;
        });
    }

    // Two same-seed runs are bit-identical.
    LptEngine r1(cfg, make_run_splits(cfg, src));
    LptEngine r2(cfg, make_run_splits(cfg, src));
    for (int i = 0; i < 100; ++i) {
        (void)r1.step();
        (void)r2.step();
    }
    const bool identical = r1.state().hash() == r2.state().hash() &&
                           r1.state().learner.arch == r2.state().learner.arch &&
                           r1.state().learner.weights == r2.state().learner.weights &&
                           r1.state().tester.creator == r2.state().tester.creator;

    std::ostringstream ss;
    ss << violations << " isolation violations in 100 steps; same-seed runs "
       << (identical ? "bit-identical" : "DIVERGED");
    return Outcome{violations == 0 && identical, ss.str()};
}

// ---- criterion 6: enumeration quality ------------------------------------------

LptConfig search_quality_config(std::uint64_t seed) {
    LptConfig cfg = default_config();
    cfg.seed = seed;
    cfg.mode = RunMode::full;
    cfg.lambda = 1.0;
    cfg.gamma = 1.0;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.data.n = 256;
    cfg.data.noise = 0.05;
    cfg.data.corrupt_frac = 0.0;
    cfg.data.seed = 17;
    cfg.data.test_n = 192;
    cfg.cell.num_nodes = 4;
    cfg.cell.width = 6;
    cfg.cell.k_in = 1;
    cfg.cell.ops = {"zero", "identity", "tanh_mlp"};
    cfg.tester.encoder_hidden = 8;
    cfg.tester.latent_dim = 8;
    cfg.opt_arch.lr = 0.02; // desk-scale step budget
    cfg.eval.epochs = 40;
    cfg.eval.lr = 0.1;
    return cfg;
}

Outcome criterion6() {
    const LptConfig base = search_quality_config(1);
    auto [src, test] = load_data(base);

    TrainBudget budget;
    budget.epochs = base.eval.epochs;
    budget.batch_size = base.batch_size;
    budget.lr = base.eval.lr;
    budget.momentum = 0.9;
    budget.weight_decay = 3e-4;
    budget.seed = 99;
    const Splits splits = make_run_splits(base, src);
    const Dataset pool = eval_training_set(splits);
    const auto ranked = enumerate_genotypes(base.cell, pool, test, budget);
    const std::size_t total = ranked.size();
    const std::size_t cutoff =
        static_cast<std::size_t>(std::ceil(0.3 * static_cast<double>(total)));

    int hits = 0;
    std::ostringstream ranks;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LptConfig cfg = search_quality_config(seed);
        LptEngine engine(cfg, make_run_splits(cfg, src));
        const SearchResult res = engine.run_search();
        std::size_t rank = total + 1;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (ranked[i].genotype == res.genotype) {
                rank = i + 1;
                break;
            }
        }
        if (rank <= cutoff) ++hits;
        ranks << rank << "/" << total << " ";
    }
    std::ostringstream ss;
    ss << "ranks " << ranks.str() << "(top-30% cutoff " << cutoff << "), hits " << hits << "/5";
    return Outcome{hits >= 4, ss.str()};
}

// ---- criterion 7: meaningfulness signal ----------------------------------------

LptConfig meaningfulness_config(std::uint64_t seed, RunMode mode) {
    LptConfig cfg = default_config();
    cfg.seed = seed;
    cfg.mode = mode;
    cfg.lambda = 1.0;
    cfg.gamma = 1.0;
    cfg.epochs = 14;
    cfg.batch_size = 16;
    cfg.batch_size_bank = 64; // the whole bank forms one relaxed test per step
    cfg.data.n = 256;
    cfg.data.noise = 0.10;
    cfg.data.corrupt_frac = 0.10;
    cfg.data.corrupt_target = "bank";
    cfg.data.seed = 23;
    cfg.data.test_n = 128;
    cfg.data.fractions[0] = 0.3;
    cfg.data.fractions[1] = 0.25;
    cfg.data.fractions[2] = 0.2;
    cfg.data.fractions[3] = 0.25;
    cfg.cell.num_nodes = 4;
    cfg.cell.width = 4;
    cfg.tester.encoder_hidden = 32;
    cfg.tester.latent_dim = 64;
    cfg.opt_creator.lr = 0.01;          // desk-scale step budget
    cfg.opt_encoder_executor.lr = 0.1;  // tester competent within a few epochs
    cfg.unroll.xi_e = 0.02;
    cfg.unroll.xi_x = 0.02;
    return cfg;
}

std::pair<double, double> final_mean_f(const LptConfig& cfg, const Dataset& src) {
    LptEngine engine(cfg, make_run_splits(cfg, src));
    (void)engine.run_search();
    const Batch bank = full_batch(engine.splits().bank);
    const std::vector<double> f = engine.selection_for(bank);
    double clean = 0.0, corr = 0.0;
    int n_clean = 0, n_corr = 0;
    for (int i = 0; i < bank.size(); ++i) {
        if (bank.corrupted[i]) {
            corr += f[i];
            ++n_corr;
        } else {
            clean += f[i];
            ++n_clean;
        }
    }
    return {clean / n_clean, corr / n_corr};
}

Outcome criterion7() {
    int full_hits = 0, ablation_absent = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const LptConfig cfg_full = meaningfulness_config(seed, RunMode::full);
        auto [src, test] = load_data(cfg_full);
        const auto [clean_f, corr_f] = final_mean_f(cfg_full, src);
        if (corr_f < clean_f) ++full_hits;

        const LptConfig cfg_ab = meaningfulness_config(seed, RunMode::ablation1);
        const auto [clean_a, corr_a] = final_mean_f(cfg_ab, src);
        if (corr_a >= clean_a) ++ablation_absent;
        detail << "s" << seed << ": full " << corr_f - clean_f << " ab1 " << corr_a - clean_a
               << "; ";
    }
    std::ostringstream ss;
    ss << "full-mode corrupted<clean in " << full_hits << "/5; ablation1 absent/reversed in "
       << ablation_absent << "/5 (" << detail.str() << ")";
    return Outcome{full_hits >= 4 && ablation_absent >= 3, ss.str()};
}

// ---- criterion 8: sweep shape ---------------------------------------------------

LptConfig sweep_config(std::uint64_t seed) {
    LptConfig cfg = default_config();
    cfg.seed = seed;
    cfg.mode = RunMode::full;
    cfg.lambda = 1.0;
    cfg.gamma = 1.0;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.batch_size_bank = 64;
    cfg.data.n = 256;
    cfg.data.noise = 0.15;
    cfg.data.corrupt_frac = 0.35;
    cfg.data.corrupt_target = "bank_region";
    cfg.data.seed = 23;
    cfg.data.test_n = 128;
    cfg.data.fractions[0] = 0.3;
    cfg.data.fractions[1] = 0.25;
    cfg.data.fractions[2] = 0.2;
    cfg.data.fractions[3] = 0.25;
    cfg.cell.num_nodes = 5;
    cfg.cell.width = 4;
    cfg.cell.k_in = 2;
    cfg.cell.ops = {"zero", "identity", "linear", "tanh_mlp"};
    cfg.tester.encoder_hidden = 32;
    cfg.tester.latent_dim = 64;
    cfg.opt_creator.lr = 0.01;
    cfg.opt_encoder_executor.lr = 0.1;
    cfg.opt_arch.lr = 0.03;
    cfg.unroll.xi_e = 0.02;
    cfg.unroll.xi_x = 0.02;
    cfg.eval.epochs = 25;
    cfg.eval.lr = 0.1;
    return cfg;
}

Outcome criterion8() {
    const std::vector<double> grid = {0.1, 0.5, 1.0, 2.0, 3.0};
    std::ostringstream detail;
    int lambda_interior = 0, gamma_interior = 0;
    for (const char* param : {"lambda", "gamma"}) {
        int& interior = param == std::string("lambda") ? lambda_interior : gamma_interior;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            std::vector<double> curve;
            for (double value : grid) {
                LptConfig cfg = sweep_config(seed);
                if (param == std::string("lambda"))
                    cfg.lambda = value;
                else
                    cfg.gamma = value;
                auto [src, test] = load_data(cfg);
                LptEngine engine(cfg, make_run_splits(cfg, src));
                const SearchResult res = engine.run_search();
                const EvalRunResult ev = run_eval(res.genotype, cfg, engine.splits(), test);
                curve.push_back(ev.mean_loss);
            }
            const double m = *std::min_element(curve.begin(), curve.end());
            const bool interior_min = curve.front() > m && curve.back() > m;
            if (interior_min) ++interior;
            detail << param[0] << seed << ":[";
            for (double c : curve) detail << c << ' ';
            detail << (interior_min ? "int] " : "edge] ");
        }
    }
    std::ostringstream ss;
    ss << "strict interior minima: lambda " << lambda_interior << "/5, gamma " << gamma_interior
       << "/5; curves " << detail.str();
    return Outcome{lambda_interior >= 3 && gamma_interior >= 3, ss.str()};
}

// ---- criterion 9: baseline reduction --------------------------------------------

Outcome criterion9() {
    LptConfig cfg = small_run_config();
    cfg.epochs = 5;
    cfg.lambda = 0.0;
    cfg.gamma = 0.0;
    cfg.frozen_f = true;
    auto [src, test] = load_data(cfg);
    LptEngine full(cfg, make_run_splits(cfg, src));

    LptConfig cfg_d = cfg;
    cfg_d.mode = RunMode::darts_baseline;
    cfg_d.frozen_f = false;
    LptEngine darts(cfg_d, make_run_splits(cfg_d, src));

    for (int i = 0; i < 50; ++i) {
        (void)full.step();
        (void)darts.step();
        if (!(full.state().learner.arch == darts.state().learner.arch) ||
            !(full.state().learner.weights == darts.state().learner.weights)) {
            std::ostringstream ss;
            ss << "trajectories diverged at step " << i;
            return Outcome{false, ss.str()};
        }
    }
    return Outcome{true, "(A, W) trajectories bit-identical for 50 steps"};
}

} // namespace

int main(int argc, char** argv) {
    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const std::vector<Entry> entries = {
        {1, "autodiff soundness", criterion1},
        {2, "architecture hypergradient", criterion2},
        {3, "creator gradient", criterion3},
        {4, "degenerate guards", criterion4},
        {5, "isolation and determinism", criterion5},
        {6, "enumeration quality", criterion6},
        {7, "meaningfulness signal", criterion7},
        {8, "sweep shape", criterion8},
        {9, "baseline reduction", criterion9},
    };

    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    bool all_pass = true;
    for (const Entry& e : entries) {
        if (!wanted.empty() && !wanted.count(e.id)) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = e.fn();
        } catch (const std::exception& ex) {
            out = Outcome{false, std::string("exception: ") + ex.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s — %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", e.id,
                    e.name, out.detail.c_str(), secs);
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
