#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lpt/data_bank.hpp"
#include "lpt/search_space.hpp"

namespace lpt {

// Training recipe for a fixed (discretized) architecture; shared by
// architecture evaluation and exhaustive genotype enumeration.
struct TrainBudget {
    int epochs = 30;
    int batch_size = 16;
    double lr = 0.05;
    double lr_min = 0.0;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    std::uint64_t seed = 0;
    Precision prec = Precision::f64;
};

DifferentiableFn make_discrete_loss_fn(const DiscreteNet& net);

// SGD-momentum training from a fresh seeded init; per-epoch mean train loss
// optionally reported.
ParamVector train_discrete(const DiscreteNet& net, const Dataset& train, const TrainBudget& budget,
                           std::vector<double>* epoch_losses = nullptr);

// (error rate, mean cross-entropy) on a held-out set. Argmax ties resolve to
// the lower class index.
std::pair<double, double> evaluate_discrete(const DiscreteNet& net, const ParamVector& w,
                                            const Dataset& test);

} // namespace lpt
