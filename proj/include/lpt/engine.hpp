#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lpt/config.hpp"
#include "lpt/data_bank.hpp"
#include "lpt/discrete_train.hpp"
#include "lpt/hypergrad.hpp"
#include "lpt/learner.hpp"
#include "lpt/tester.hpp"

namespace lpt {

struct MetricsRow {
    long step = 0;
    long epoch = 0;
    double train_loss = 0.0;
    double stage2_loss = 0.0;
    double val_loss = 0.0;
    double norm_test_loss = 0.0;
    double card_sigma = 0.0;
    double mean_f_clean = 0.0;
    double mean_f_corrupted = 0.0;
    bool degenerate_test = false;
};

// Algorithm phases, in update order: A, C, (E, X), W.
enum class StepPhase { arch, creator, encoder_executor, weights };

// Deterministic per-role batch stream: epoch-level reshuffle keyed by
// (seed, epoch), short final batch kept.
class BatchCursor {
public:
    BatchCursor() = default;
    BatchCursor(const Dataset* ds, int batch_size, std::uint64_t seed);
    Batch next();
    long epoch() const { return epoch_; }

private:
    const Dataset* ds_ = nullptr;
    int bs_ = 1;
    std::uint64_t seed_ = 0;
    long epoch_ = 0;
    std::size_t pos_ = 0;
    std::vector<std::vector<int>> order_;
};

struct StepBatches {
    Batch tr;   // learner-train
    Batch tt;   // tester-train
    Batch val;  // tester-val
    Batch bank; // test bank
};

struct LptState {
    LearnerState learner;
    TesterState tester;
    ParamVector e_unrolled; // E' from the previous step's tester unroll
    Adam opt_a;
    long step = 0;

    std::uint64_t hash() const;
};

struct StepOutput {
    MetricsRow row;
    std::vector<double> bank_f;
    std::vector<int> bank_ids;
    std::vector<uint8_t> bank_corrupted;
};

struct SearchResult {
    Genotype genotype;
    std::vector<MetricsRow> history;
};

// The four-step update cycle of the search phase plus run orchestration.
class LptEngine {
public:
    using StepObserver = std::function<void(StepPhase, const LptState&)>;

    LptEngine(LptConfig cfg, Splits splits);
    LptEngine(const LptEngine&) = delete;
    LptEngine& operator=(const LptEngine&) = delete;

    StepOutput step(const StepObserver& obs = {});
    StepOutput step_with(const StepBatches& batches, const StepObserver& obs = {});

    // epochs x steps_per_epoch steps; when out_dir is set, streams
    // metrics.csv and selection_weights.csv row by row and writes
    // genotype.json at the end.
    SearchResult run_search(const std::string& out_dir = "");

    long steps_per_epoch() const;
    const LptConfig& config() const { return cfg_; }
    const Splits& splits() const { return splits_; }
    const LptState& state() const { return st_; }
    LptState& state() { return st_; }
    const LearnerNet& learner_net() const { return lnet_; }
    const TesterNet& tester_net() const { return tnet_; }

    // Mode-aware selection weights for a bank batch (creator+encoder in
    // full/ablation2, raw scalars in ablation1, all ones when frozen).
    std::vector<double> selection_for(const Batch& bank) const;

    Genotype genotype() const { return lnet_.discretize(st_.learner.arch); }

private:
    StepBatches draw_batches();
    std::vector<int> bank_positions(const Batch& bank) const;
    void maybe_round_all();

    LptConfig cfg_;
    Splits splits_;
    LearnerNet lnet_;
    TesterNet tnet_;
    DifferentiableFn train_fn_;
    DifferentiableFn val_fn_;
    DifferentiableFn bank_fn_;
    DifferentiableFn den_fn_;
    LptState st_;
    BatchCursor cur_tr_, cur_tt_, cur_val_, cur_bank_;
    std::map<int, int> bank_pos_; // bank example id -> raw-scalar index
};

struct EvalRunResult {
    double error_rate = 0.0;
    double mean_loss = 0.0;
    std::vector<double> epoch_losses;
    long test_reads_during_training = 0;
};

// Train-source and held-out test set per the data config.
std::pair<Dataset, Dataset> load_data(const LptConfig& cfg);

// Four-role splits of the train source, with the configured bank-label
// corruption applied after splitting when corrupt_target == "bank".
Splits make_run_splits(const LptConfig& cfg, const Dataset& train_source);

// Architecture evaluation training pool: learner-train + bank + tester-val,
// de-duplicated by example id.
Dataset eval_training_set(const Splits& splits);

// Retrains the discretized genotype from scratch on the evaluation pool and
// reports held-out error. The test set is only touched after training.
EvalRunResult run_eval(const Genotype& genotype, const LptConfig& cfg, const Splits& splits,
                       const Dataset& test);

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

} // namespace lpt
