#include "lpt/engine.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace lpt {

BatchCursor::BatchCursor(const Dataset* ds, int batch_size, std::uint64_t seed)
    : ds_(ds), bs_(batch_size), seed_(seed) {
    order_ = batch_order(ds_->size(), bs_, seed_, 0);
}

Batch BatchCursor::next() {
    if (pos_ >= order_.size()) {
        ++epoch_;
        order_ = batch_order(ds_->size(), bs_, seed_, epoch_);
        pos_ = 0;
    }
    return make_batch(*ds_, order_[pos_++]);
}

std::uint64_t LptState::hash() const {
    std::uint64_t h = 0x811c9dc5;
    auto mixin = [&h](std::uint64_t v) { h = Rng::mix(h, v); };
    mixin(learner.arch.hash64());
    mixin(learner.weights.hash64());
    mixin(learner.opt_w.hash64());
    mixin(tester.encoder.hash64());
    mixin(tester.creator.hash64());
    mixin(tester.executor.hash64());
    mixin(tester.sel_raw.hash64());
    mixin(tester.opt_e.hash64());
    mixin(tester.opt_x.hash64());
    mixin(tester.opt_c.hash64());
    mixin(tester.opt_s.hash64());
    mixin(e_unrolled.hash64());
    mixin(opt_a.hash64());
    mixin(static_cast<std::uint64_t>(step));
    return h;
}

namespace {

Dataset corrupt_labels(Dataset d, double frac, std::uint64_t seed, bool by_region) {
    const int flips = static_cast<int>(std::floor(frac * d.size()));
    if (flips <= 0) return d;
    std::vector<int> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    if (by_region) {
        // poor-quality examples concentrated in one input region: flip the
        // examples with the largest projection onto a fixed direction
        auto proj = [&d](int i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d.examples[i].input.size(); ++j)
                s += (j % 2 == 0 ? 1.0 : -0.7) * d.examples[i].input[j];
            return s;
        };
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return proj(a) > proj(b); });
    } else {
        Rng rng(Rng::mix(seed, 0x62616e6b));
        rng.shuffle(order);
    }
    for (int k = 0; k < flips; ++k) {
        Example& e = d.examples[order[k]];
        e.label = (e.label + 1) % d.num_classes;
        e.corrupted = true;
    }
    return d;
}

double mean_or_nan(double sum, int count) {
    return count > 0 ? sum / count : std::nan("");
}

} // namespace

std::pair<Dataset, Dataset> load_data(const LptConfig& cfg) {
    if (cfg.data.source == "lptd") {
        return {read_lptd(cfg.data.path), read_lptd(cfg.data.test_path)};
    }
    const double source_corrupt =
        cfg.data.corrupt_target == "all" ? cfg.data.corrupt_frac : 0.0;
    Dataset train = synth_two_class(cfg.data.n, cfg.data.noise, source_corrupt, cfg.data.seed);
    Dataset test = synth_two_class(cfg.data.test_n, cfg.data.noise, 0.0,
                                   Rng::mix(cfg.data.seed, 0x74657374));
    return {std::move(train), std::move(test)};
}

LptEngine::LptEngine(LptConfig cfg, Splits splits)
    : cfg_(std::move(cfg)), splits_(std::move(splits)),
      lnet_(cfg_.cell, splits_.learner_train.dim, splits_.learner_train.num_classes),
      tnet_(cfg_.tester, splits_.learner_train.dim, splits_.learner_train.num_classes),
      train_fn_(make_train_loss_fn(lnet_)), val_fn_(make_val_loss_fn(tnet_)),
      bank_fn_(make_bank_exec_fn(tnet_)), den_fn_(make_sel_sum_fn(tnet_)) {
    cfg_.validate();

    Rng rng_w(Rng::mix(cfg_.seed, 0x57));
    Rng rng_e(Rng::mix(cfg_.seed, 0x45));
    Rng rng_x(Rng::mix(cfg_.seed, 0x58));
    st_.learner.arch = lnet_.init_arch();
    st_.learner.weights = lnet_.init_weights(rng_w);
    st_.tester.encoder = tnet_.init_encoder(rng_e);
    st_.tester.creator = tnet_.init_creator();
    st_.tester.executor = tnet_.init_executor(rng_x);
    st_.tester.sel_raw = ParamVector::zeros(splits_.bank.size());
    st_.e_unrolled = st_.tester.encoder;

    const long total = static_cast<long>(cfg_.epochs) * steps_per_epoch();
    st_.learner.opt_w =
        SgdMomentum(st_.learner.weights.size(), cfg_.opt_weights.momentum,
                    cfg_.opt_weights.weight_decay,
                    CosineSchedule{cfg_.opt_weights.lr, cfg_.opt_weights.lr_min, total});
    st_.tester.opt_e = SgdMomentum(
        st_.tester.encoder.size(), cfg_.opt_encoder_executor.momentum,
        cfg_.opt_encoder_executor.weight_decay,
        CosineSchedule{cfg_.opt_encoder_executor.lr, cfg_.opt_encoder_executor.lr_min, total});
    st_.tester.opt_x = SgdMomentum(
        st_.tester.executor.size(), cfg_.opt_encoder_executor.momentum,
        cfg_.opt_encoder_executor.weight_decay,
        CosineSchedule{cfg_.opt_encoder_executor.lr, cfg_.opt_encoder_executor.lr_min, total});
    st_.tester.opt_c = Adam(st_.tester.creator.size(), cfg_.opt_creator.lr, cfg_.opt_creator.beta1,
                            cfg_.opt_creator.beta2, cfg_.opt_creator.weight_decay);
    st_.tester.opt_s = Adam(st_.tester.sel_raw.size(), cfg_.opt_creator.lr, cfg_.opt_creator.beta1,
                            cfg_.opt_creator.beta2, cfg_.opt_creator.weight_decay);
    st_.opt_a = Adam(st_.learner.arch.size(), cfg_.opt_arch.lr, cfg_.opt_arch.beta1,
                     cfg_.opt_arch.beta2, cfg_.opt_arch.weight_decay);

    cur_tr_ = BatchCursor(&splits_.learner_train, cfg_.batch_size, Rng::mix(cfg_.seed, 1));
    cur_tt_ = BatchCursor(&splits_.tester_train, cfg_.batch_size, Rng::mix(cfg_.seed, 2));
    cur_val_ = BatchCursor(&splits_.tester_val, cfg_.batch_size, Rng::mix(cfg_.seed, 3));
    const int bank_bs = cfg_.batch_size_bank > 0 ? cfg_.batch_size_bank : cfg_.batch_size;
    cur_bank_ = BatchCursor(&splits_.bank, bank_bs, Rng::mix(cfg_.seed, 4));

    for (int i = 0; i < splits_.bank.size(); ++i) bank_pos_[splits_.bank.examples[i].id] = i;

    if (cfg_.precision == Precision::f32) maybe_round_all();
}

long LptEngine::steps_per_epoch() const {
    return (splits_.learner_train.size() + cfg_.batch_size - 1) / cfg_.batch_size;
}

std::vector<int> LptEngine::bank_positions(const Batch& bank) const {
    std::vector<int> pos;
    pos.reserve(bank.ids.size());
    for (int id : bank.ids) {
        auto it = bank_pos_.find(id);
        if (it == bank_pos_.end()) throw BadArgument("bank batch contains a non-bank example");
        pos.push_back(it->second);
    }
    return pos;
}

std::vector<double> LptEngine::selection_for(const Batch& bank) const {
    if (cfg_.frozen_f || cfg_.mode == RunMode::darts_baseline)
        return std::vector<double>(bank.size(), 1.0);
    if (cfg_.mode == RunMode::ablation1)
        return ablation1_selection(st_.tester.sel_raw, bank_positions(bank));
    return selection_weights(tnet_, st_.e_unrolled, st_.tester.creator, bank, cfg_.precision);
}

void LptEngine::maybe_round_all() {
    st_.learner.arch.round_f32();
    st_.learner.weights.round_f32();
    st_.tester.encoder.round_f32();
    st_.tester.creator.round_f32();
    st_.tester.executor.round_f32();
    st_.tester.sel_raw.round_f32();
    st_.e_unrolled.round_f32();
}

StepBatches LptEngine::draw_batches() {
    StepBatches b;
    b.tr = cur_tr_.next();
    b.tt = cur_tt_.next();
    b.val = cur_val_.next();
    b.bank = cur_bank_.next();
    return b;
}

StepOutput LptEngine::step(const StepObserver& obs) { return step_with(draw_batches(), obs); }

StepOutput LptEngine::step_with(const StepBatches& b, const StepObserver& obs) {
    const Precision prec = cfg_.precision;
    const bool tester_active = cfg_.mode == RunMode::full || cfg_.mode == RunMode::ablation2;
    const bool creator_frozen = cfg_.frozen_f || cfg_.mode == RunMode::darts_baseline;

    StepOutput out;
    MetricsRow& row = out.row;
    row.step = st_.step;
    row.epoch = st_.step / std::max<long>(1, steps_per_epoch());

    // Shared per-step quantities: the unrolled W', the bank selection f, and
    // the learner's per-example bank losses at (A, W').
    const ParamVector w1 =
        learner_unroll(train_fn_, st_.learner.arch, st_.learner.weights, b.tr, cfg_.unroll.xi_ln,
                       prec);
    out.bank_f = selection_for(b.bank);
    out.bank_ids = b.bank.ids;
    out.bank_corrupted = b.bank.corrupted;
    const std::vector<double> ell =
        per_example_losses(lnet_, st_.learner.arch, w1, b.bank, prec);

    double card = 0.0, num = 0.0;
    double f_clean = 0.0, f_corr = 0.0;
    int n_clean = 0, n_corr = 0;
    for (int i = 0; i < b.bank.size(); ++i) {
        card += out.bank_f[i];
        num += out.bank_f[i] * ell[i];
        if (b.bank.corrupted[i]) {
            f_corr += out.bank_f[i];
            ++n_corr;
        } else {
            f_clean += out.bank_f[i];
            ++n_clean;
        }
    }
    row.card_sigma = card;
    row.mean_f_clean = mean_or_nan(f_clean, n_clean);
    row.mean_f_corrupted = mean_or_nan(f_corr, n_corr);

    const bool degenerate = card <= kCardEpsilon;
    row.degenerate_test = degenerate;
    row.norm_test_loss = degenerate ? std::nan("") : num / card;

    // Step 1: architecture (skipped when the test degenerates).
    if (!degenerate) {
        const DifferentiableFn ntest_fn = make_normalized_test_loss_fn(lnet_, out.bank_f);
        const ParamVector g_arch =
            arch_hypergradient(train_fn_, ntest_fn, st_.learner.arch, st_.learner.weights, b.bank,
                               b.tr, cfg_.unroll, prec);
        st_.opt_a.step(st_.learner.arch, g_arch);
        if (prec == Precision::f32) {
            st_.learner.arch.round_f32();
            st_.opt_a.round_f32();
        }
    } else {
        std::fprintf(stderr, "[lpt] step %ld: degenerate test (sum f = %g); skipping arch/creator updates\n",
                     st_.step, card);
    }
    if (obs) obs(StepPhase::arch, st_);

    // Step 2: creator ascent.
    if (!creator_frozen) {
        if (cfg_.mode == RunMode::ablation1) {
            if (!degenerate) {
                const DifferentiableFn obj = make_ablation1_fn(ell, bank_positions(b.bank));
                auto r = value_and_grad(obj, {{"S", &st_.tester.sel_raw}}, b.bank, {"S"}, prec);
                st_.tester.opt_s.step(st_.tester.sel_raw, r.grads.at("S"), /*ascend=*/true);
                if (prec == Precision::f32) {
                    st_.tester.sel_raw.round_f32();
                    st_.tester.opt_s.round_f32();
                }
            }
        } else if (tester_active) {
            const DifferentiableFn stage2_fn = cfg_.mode == RunMode::ablation2
                                                   ? make_ablation2_fn(tnet_, cfg_.gamma)
                                                   : make_stage2_fn(tnet_, b.tt, cfg_.gamma);
            auto [e1, x1] = tester_unroll(stage2_fn, st_.tester.encoder, st_.tester.executor,
                                          st_.tester.creator, b.bank, cfg_.unroll, prec);
            const DifferentiableFn num_fn = make_sel_weighted_fn(tnet_, ell);
            const CreatorGrad cg = creator_total_grad(
                num_fn, den_fn_, bank_fn_, val_fn_, st_.tester.encoder, st_.tester.executor,
                st_.tester.creator, e1, x1, b.bank, b.val, cfg_.gamma, cfg_.lambda, cfg_.unroll,
                prec);
            if (cg.difficulty_degenerate)
                std::fprintf(stderr,
                             "[lpt] step %ld: degenerate difficulty path; creator uses the validation term only\n",
                             st_.step);
            st_.tester.opt_c.step(st_.tester.creator, cg.ascent, /*ascend=*/true);
            st_.e_unrolled = std::move(e1);
            if (prec == Precision::f32) {
                st_.tester.creator.round_f32();
                st_.tester.opt_c.round_f32();
                st_.e_unrolled.round_f32();
            }
        }
    }
    if (obs) obs(StepPhase::creator, st_);

    // Step 3: encoder and executor.
    if (tester_active) {
        const DifferentiableFn stage2_fn = cfg_.mode == RunMode::ablation2
                                               ? make_ablation2_fn(tnet_, cfg_.gamma)
                                               : make_stage2_fn(tnet_, b.tt, cfg_.gamma);
        auto r = value_and_grad(stage2_fn,
                                {{"E", &st_.tester.encoder},
                                 {"X", &st_.tester.executor},
                                 {"C", &st_.tester.creator}},
                                b.bank, {"E", "X"}, prec);
        row.stage2_loss = r.loss;
        st_.tester.opt_e.step(st_.tester.encoder, r.grads.at("E"));
        st_.tester.opt_x.step(st_.tester.executor, r.grads.at("X"));
        if (prec == Precision::f32) {
            st_.tester.encoder.round_f32();
            st_.tester.executor.round_f32();
            st_.tester.opt_e.round_f32();
            st_.tester.opt_x.round_f32();
        }
    } else {
        row.stage2_loss = std::nan("");
    }
    if (obs) obs(StepPhase::encoder_executor, st_);

    // Step 4: learner weights.
    row.train_loss = weights_step(st_.learner, lnet_, b.tr, prec);
    if (obs) obs(StepPhase::weights, st_);

    row.val_loss = val_loss(tnet_, st_.tester.encoder, st_.tester.executor, b.val, prec);

    ++st_.step;
    return out;
}

void write_metrics_header(std::ostream& os) {
    os << "step,epoch,train_loss,stage2_loss,val_loss,norm_test_loss,card_sigma,mean_f_clean,"
          "mean_f_corrupted\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
    os << r.step << ',' << r.epoch << ',' << r.train_loss << ',' << r.stage2_loss << ','
       << r.val_loss << ',' << r.norm_test_loss << ',' << r.card_sigma << ',' << r.mean_f_clean
       << ',' << r.mean_f_corrupted << '\n';
}

SearchResult LptEngine::run_search(const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::ofstream metrics, selw;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        metrics.open(out_dir + "/metrics.csv");
        selw.open(out_dir + "/selection_weights.csv");
        if (!metrics || !selw) throw IoError("run_search: cannot open output files in " + out_dir);
        write_metrics_header(metrics);
        selw << "step,example_id,f,corrupted\n";
    }

    SearchResult res;
    const long spe = steps_per_epoch();
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (long s = 0; s < spe; ++s) {
            StepOutput o = step();
            res.history.push_back(o.row);
            if (metrics.is_open()) {
                write_metrics_row(metrics, o.row);
                metrics.flush();
            }
            if (selw.is_open()) {
                for (std::size_t i = 0; i < o.bank_f.size(); ++i)
                    selw << o.row.step << ',' << o.bank_ids[i] << ',' << o.bank_f[i] << ','
                         << static_cast<int>(o.bank_corrupted[i]) << '\n';
                selw.flush();
            }
        }
    }

    // Final selection weights over the whole bank, step index = total steps.
    const Batch whole_bank = full_batch(splits_.bank);
    const std::vector<double> f = selection_for(whole_bank);
    if (selw.is_open()) {
        for (int i = 0; i < whole_bank.size(); ++i)
            selw << st_.step << ',' << whole_bank.ids[i] << ',' << f[i] << ','
                 << static_cast<int>(whole_bank.corrupted[i]) << '\n';
    }

    res.genotype = genotype();
    if (!out_dir.empty()) {
        std::ofstream g(out_dir + "/genotype.json");
        if (!g) throw IoError("run_search: cannot write genotype.json");
        g << genotype_to_json(res.genotype) << '\n';
    }
    return res;
}

Dataset eval_training_set(const Splits& splits) {
    Dataset out;
    out.dim = splits.learner_train.dim;
    out.num_classes = splits.learner_train.num_classes;
    std::map<int, bool> seen;
    for (const Dataset* d : {&splits.learner_train, &splits.bank, &splits.tester_val}) {
        for (const Example& e : d->examples) {
            if (seen.count(e.id)) continue;
            seen[e.id] = true;
            out.examples.push_back(e);
        }
    }
    return out;
}

EvalRunResult run_eval(const Genotype& genotype, const LptConfig& cfg, const Splits& splits,
                       const Dataset& test) {
    const Dataset train = eval_training_set(splits);
    DiscreteNet net(cfg.cell, genotype, train.dim, train.num_classes);
    TrainBudget budget;
    budget.epochs = cfg.eval.epochs > 0 ? cfg.eval.epochs : cfg.epochs;
    budget.batch_size = cfg.eval.batch_size > 0 ? cfg.eval.batch_size : cfg.batch_size;
    budget.lr = cfg.eval.lr > 0.0 ? cfg.eval.lr : cfg.opt_weights.lr;
    budget.lr_min = cfg.opt_weights.lr_min;
    budget.momentum = cfg.opt_weights.momentum;
    budget.weight_decay = cfg.opt_weights.weight_decay;
    budget.seed = cfg.seed;
    budget.prec = cfg.precision;

    EvalRunResult out;
    const long reads_before = test.read_count;
    const ParamVector w = train_discrete(net, train, budget, &out.epoch_losses);
    out.test_reads_during_training = test.read_count - reads_before;
    const auto [err, loss] = evaluate_discrete(net, w, test);
    out.error_rate = err;
    out.mean_loss = loss;
    return out;
}

Splits make_run_splits(const LptConfig& cfg, const Dataset& train_source) {
    SplitSpec spec;
    spec.learner_train = cfg.data.fractions[0];
    spec.tester_train = cfg.data.fractions[1];
    spec.tester_val = cfg.data.fractions[2];
    spec.bank = cfg.data.fractions[3];
    spec.seed = Rng::mix(cfg.data.seed, 0x73706c69);
    spec.alias_bank_val = cfg.data.alias_bank_val;
    Splits splits = make_splits(train_source, spec);
    if (cfg.data.corrupt_frac > 0.0 &&
        (cfg.data.corrupt_target == "bank" || cfg.data.corrupt_target == "bank_region")) {
        splits.bank = corrupt_labels(std::move(splits.bank), cfg.data.corrupt_frac, cfg.data.seed,
                                     cfg.data.corrupt_target == "bank_region");
        if (cfg.data.alias_bank_val) splits.tester_val = splits.bank;
    }
    return splits;
}

} // namespace lpt
