#pragma once

#include <cstdint>
#include <string>

#include "lpt/data_bank.hpp"
#include "lpt/hypergrad.hpp"
#include "lpt/search_space.hpp"
#include "lpt/tester.hpp"

namespace lpt {

enum class RunMode { full, ablation1, ablation2, darts_baseline };

std::string run_mode_name(RunMode m);
RunMode run_mode_from_name(const std::string& name);

struct SgdCfg {
    double lr = 0.025;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double lr_min = 0.0;
};

struct AdamCfg {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-3;
};

struct DataCfg {
    std::string source = "synthetic"; // "synthetic" or "lptd"
    std::string path;                 // train source file when source == lptd
    std::string test_path;            // held-out test file when source == lptd
    int n = 512;
    double noise = 0.15;
    double corrupt_frac = 0.0;
    std::string corrupt_target = "bank"; // "bank": flip random bank labels;
                                         // "bank_region": flip one input region
                                         // of the bank; "all": corrupt the source
    std::uint64_t seed = 7;
    int test_n = 256;
    double fractions[4] = {0.5, 0.25, 0.125, 0.125};
    bool alias_bank_val = false;
};

struct EvalCfg {
    int epochs = 0;     // 0: inherit run epochs
    int batch_size = 0; // 0: inherit run batch size
    double lr = 0.0;    // 0: inherit weights lr
};

struct LptConfig {
    int schema_version = 1;
    std::uint64_t seed = 1;
    Precision precision = Precision::f64;
    RunMode mode = RunMode::full;
    double lambda = 1.0;
    double gamma = 1.0;
    int epochs = 50;
    int batch_size = 64;
    int batch_size_bank = 0; // 0: use batch_size; bank batches may span the whole bank
    bool frozen_f = false; // force f == 1 and freeze the creator
    DataCfg data;
    CellSpec cell;
    TesterSpec tester;
    SgdCfg opt_weights;
    SgdCfg opt_encoder_executor;
    AdamCfg opt_creator;
    AdamCfg opt_arch{3e-4, 0.5, 0.999, 1e-3};
    UnrollConfig unroll;
    EvalCfg eval;

    void validate() const;
};

LptConfig default_config();

// Strict parse: every key must be known, values type-checked; offending key
// named in the ConfigError. Missing keys keep their defaults.
LptConfig config_from_json(const std::string& text);
LptConfig config_from_file(const std::string& path);

std::string config_to_json(const LptConfig& cfg);

} // namespace lpt
