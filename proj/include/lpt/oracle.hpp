#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lpt/data_bank.hpp"
#include "lpt/diff_fn.hpp"
#include "lpt/discrete_train.hpp"
#include "lpt/search_space.hpp"

namespace lpt {

// Central differences per coordinate, the anti-drift ground truth every
// analytic gradient in the repo is checked against.
ParamVector numerical_grad(const std::function<double(const ParamVector&)>& objective,
                           const ParamVector& theta, double eps = 1e-5);

// ||a - b||_2 / max(||b||_2, floor)
double rel_err(const ParamVector& a, const ParamVector& b);
double rel_err_scalar(double a, double b);

// Quadratic bilevel toy, the closed-form check for the one-step unroll:
//   inner(a, w) = 0.5 w'Hw + w'(Ga + b) + tanh_coupling * sum_i a_{i mod da} tanh(w_i)
//   outer(a, w) = 0.5 w'Pw + q'w + 0.5 a'Ra + s'a
// H is SPD. tanh_coupling = 0 keeps the instance exactly quadratic.
struct QuadraticBilevel {
    int dim_w = 2;
    int dim_a = 2;
    std::vector<double> H, G, P, R; // row-major dim_w*dim_w / dim_w*dim_a / dim_w*dim_w / dim_a*dim_a
    std::vector<double> b, q, s;    // dim_w / dim_w / dim_a
    double tanh_coupling = 0.0;

    static QuadraticBilevel random(int dw, int da, Rng& rng, double tanh_coupling = 0.0);
};

// Exposes blocks {A, W}. The inner loss is the stand-in training loss, the
// outer loss the stand-in test loss.
DifferentiableFn make_bilevel_inner_fn(const QuadraticBilevel& p);
DifferentiableFn make_bilevel_outer_fn(const QuadraticBilevel& p);

struct BilevelExact {
    ParamVector w_star;
    ParamVector hypergrad;
};

// w*(a) = -H^{-1}(Ga + b) and the exact d outer / d a via the chain rule.
// Only valid for tanh_coupling == 0. Throws IllConditioned when cond(H) is
// beyond 1e8.
BilevelExact quadratic_bilevel_exact(const QuadraticBilevel& p, const ParamVector& a);

// Closed-form gradient of a -> outer(a, w - xi grad_w inner(a, w)) for the
// quadratic instance, used to measure the one-step approximation error.
ParamVector quadratic_one_step_grad(const QuadraticBilevel& p, const ParamVector& a,
                                    const ParamVector& w, double xi);

std::vector<Genotype> all_genotypes(const CellSpec& spec);

struct RankedGenotype {
    Genotype genotype;
    double error_rate = 0.0;
    double mean_loss = 0.0;
};

// Trains every genotype of the (tiny) cell space with an identical budget and
// ranks by held-out error rate, mean loss breaking ties. Refuses spaces with
// more than 200 genotypes.
std::vector<RankedGenotype> enumerate_genotypes(const CellSpec& spec, const Dataset& train,
                                                const Dataset& test, const TrainBudget& budget);

struct OracleCheck {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Self-check suites: "autodiff", "hypergrad", "bilevel", or "all".
std::vector<OracleCheck> run_oracle_suite(const std::string& suite);

void write_oracle_report(const std::string& path, const std::vector<OracleCheck>& checks);

} // namespace lpt
