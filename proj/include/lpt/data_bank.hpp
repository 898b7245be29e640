#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpt/diff_fn.hpp"
#include "lpt/errors.hpp"

namespace lpt {

// One labeled example. `corrupted` records synthetic provenance (a flipped
// label) and is never visible to any loss; it exists for post-hoc analysis.
struct Example {
    int id = 0;
    std::vector<double> input;
    int label = 0;
    bool corrupted = false;
};

struct Dataset {
    std::vector<Example> examples;
    int dim = 0;
    int num_classes = 0;

    // Counts batch materializations; lets tests assert that held-out data is
    // never touched during training.
    mutable long read_count = 0;

    int size() const { return static_cast<int>(examples.size()); }
    bool empty() const { return examples.empty(); }
};

// Fractions for the four data roles. All must be positive and sum to 1.
// With alias_bank_val, the tester-val and bank fractions are drawn as one
// subset that is returned as both roles (one validation pool doing double duty).
struct SplitSpec {
    double learner_train = 0.5;
    double tester_train = 0.25;
    double tester_val = 0.125;
    double bank = 0.125;
    std::uint64_t seed = 0;
    bool alias_bank_val = false;
};

struct Splits {
    Dataset learner_train;
    Dataset tester_train;
    Dataset tester_val;
    Dataset bank;
};

// Deterministic disjoint partition (or aliased, see SplitSpec). Split sizes
// come from rounding the cumulative fractions.
Splits make_splits(const Dataset& source, const SplitSpec& spec);

// Two interleaved noisy half-moon classes in 2-D. floor(corrupt_frac*n)
// examples get their label flipped and corrupted=true.
Dataset synth_two_class(int n, double noise, double corrupt_frac, std::uint64_t seed);

// Batch index order for one epoch: shuffle deterministic in (seed, epoch),
// final short batch kept.
std::vector<std::vector<int>> batch_order(int n, int batch_size, std::uint64_t seed, long epoch);

Batch make_batch(const Dataset& d, const std::vector<int>& idx);
Batch full_batch(const Dataset& d);

// Little-endian binary dataset file: "LPTD", u32 n, u32 dim, u32 classes,
// then n records of {u32 label, dim x f32}.
void write_lptd(const std::string& path, const Dataset& d);
Dataset read_lptd(const std::string& path);

// Split membership export: columns id,split,corrupted.
void write_split_csv(const std::string& path, const Splits& s);

} // namespace lpt
