#include "lpt/discrete_train.hpp"

#include "lpt/optim.hpp"

namespace lpt {

DifferentiableFn make_discrete_loss_fn(const DiscreteNet& net) {
    return DifferentiableFn({"W"}, [&net](auto& t, const std::vector<int>& b, const Batch& batch) {
        return t.cross_entropy_mean(net.logits(t, b[0], batch), batch.labels);
    });
}

ParamVector train_discrete(const DiscreteNet& net, const Dataset& train, const TrainBudget& budget,
                           std::vector<double>* epoch_losses) {
    if (train.empty()) throw BadArgument("train_discrete: empty training set");
    Rng init_rng(Rng::mix(budget.seed, 0x696e6974));
    ParamVector w = net.init_weights(init_rng);

    const long steps_per_epoch = (train.size() + budget.batch_size - 1) / budget.batch_size;
    SgdMomentum opt(w.size(), budget.momentum, budget.weight_decay,
                    CosineSchedule{budget.lr, budget.lr_min, budget.epochs * steps_per_epoch});
    const DifferentiableFn loss_fn = make_discrete_loss_fn(net);

    for (int epoch = 0; epoch < budget.epochs; ++epoch) {
        double epoch_loss = 0.0;
        long batches = 0;
        for (const auto& idx : batch_order(train.size(), budget.batch_size, budget.seed, epoch)) {
            const Batch b = make_batch(train, idx);
            auto r = value_and_grad(loss_fn, {{"W", &w}}, b, {"W"}, budget.prec);
            opt.step(w, r.grads.at("W"));
            if (budget.prec == Precision::f32) {
                w.round_f32();
                opt.round_f32();
            }
            epoch_loss += r.loss;
            ++batches;
        }
        if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(batches));
    }
    return w;
}

std::pair<double, double> evaluate_discrete(const DiscreteNet& net, const ParamVector& w,
                                            const Dataset& test) {
    if (test.empty()) throw BadArgument("evaluate_discrete: empty test set");
    const Batch b = full_batch(test);
    Tape<double> t;
    const int w_id = t.constant(detail::column_from<double>(w));
    const int logits = net.logits(t, w_id, b);
    const int ce = t.cross_entropy_rows(logits, b.labels);

    const Mat<double>& z = t.val(logits);
    int wrong = 0;
    for (int i = 0; i < z.rows; ++i) {
        int best = 0;
        for (int j = 1; j < z.cols; ++j)
            if (z.at(i, j) > z.at(i, best)) best = j;
        if (best != b.labels[i]) ++wrong;
    }
    const Mat<double>& losses = t.val(ce);
    double mean_loss = 0.0;
    for (double l : losses.a) mean_loss += l;
    mean_loss /= losses.a.size();
    return {static_cast<double>(wrong) / z.rows, mean_loss};
}

} // namespace lpt
