#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lpt/config.hpp"

using namespace lpt;
namespace fs = std::filesystem;

namespace {

std::string test_dir(const std::string& name) {
    const std::string dir = std::string(LPT_TEST_TMP) + "/" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string(LPT_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_tiny_config(const std::string& path, const std::string& extra = "") {
    std::ofstream f(path);
    f << R"({
  "seed": 3,
  "epochs": 1,
  "batch_size": 8,
  "data": {"n": 64, "noise": 0.12, "corrupt_frac": 0.1, "test_n": 48},
  "cell": {"num_nodes": 4, "width": 3},
  "tester": {"encoder_hidden": 4, "latent_dim": 4})"
      << extra << "\n}\n";
}

} // namespace

TEST_CASE("config: unknown keys are rejected with the offending name") {
    CHECK_THROWS_WITH_AS((void)config_from_json("{\"lambada\": 1}"),
                         doctest::Contains("lambada"), ConfigError);
    CHECK_THROWS_WITH_AS((void)config_from_json("{\"optim\": {\"weights\": {\"lr\": 0.1, \"nesterov\": true}}}"),
                         doctest::Contains("optim.weights.nesterov"), ConfigError);
    CHECK_THROWS_AS((void)config_from_json("not json"), ConfigError);
    CHECK_THROWS_AS((void)config_from_json("{\"lambda\": -1}"), ConfigError);
    CHECK_THROWS_AS((void)config_from_json("{\"epochs\": 0}"), ConfigError);
    CHECK_THROWS_AS((void)config_from_json("{\"precision\": \"f16\"}"), ConfigError);
}

TEST_CASE("config: json round trip preserves every field") {
    LptConfig cfg = default_config();
    cfg.seed = 99;
    cfg.mode = RunMode::ablation2;
    cfg.precision = Precision::f32;
    cfg.lambda = 2.5;
    cfg.gamma = 0.25;
    cfg.frozen_f = true;
    cfg.data.corrupt_frac = 0.2;
    cfg.data.alias_bank_val = true;
    cfg.cell.ops = {"zero", "identity", "linear"};
    cfg.unroll.first_order = true;
    cfg.unroll.fd_epsilon_scale = 0.05;
    const LptConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.seed == cfg.seed);
    CHECK(back.mode == cfg.mode);
    CHECK(back.precision == cfg.precision);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.gamma == cfg.gamma);
    CHECK(back.frozen_f == cfg.frozen_f);
    CHECK(back.data.corrupt_frac == cfg.data.corrupt_frac);
    CHECK(back.data.alias_bank_val == cfg.data.alias_bank_val);
    CHECK(back.cell.ops == cfg.cell.ops);
    CHECK(back.unroll.first_order == cfg.unroll.first_order);
    CHECK(back.unroll.fd_epsilon_scale == cfg.unroll.fd_epsilon_scale);
}

TEST_CASE("cli: bad config exits 2 and names the key") {
    const std::string dir = test_dir("cli_badcfg");
    {
        std::ofstream f(dir + "/bad.json");
        f << "{\"lambda\": 1, \"bogus_key\": 3}\n";
    }
    const int rc = run_cli("search --config " + dir + "/bad.json --out " + dir, dir + "/log.txt");
    CHECK(rc == 2);
    CHECK(slurp(dir + "/log.txt").find("bogus_key") != std::string::npos);

    const int rc2 = run_cli("search --config " + dir + "/missing.json --out " + dir,
                            dir + "/log2.txt");
    CHECK(rc2 == 2);
}

TEST_CASE("cli: search writes genotype, metrics, selection weights and manifest") {
    const std::string dir = test_dir("cli_search");
    write_tiny_config(dir + "/cfg.json");
    const int rc = run_cli("search --config " + dir + "/cfg.json --out " + dir + "/run",
                           dir + "/log.txt");
    CHECK(rc == 0);
    for (const char* f :
         {"genotype.json", "metrics.csv", "selection_weights.csv", "manifest.json", "splits.csv"})
        CHECK(fs::exists(dir + "/run/" + f));

    const auto manifest = nlohmann::json::parse(slurp(dir + "/run/manifest.json"));
    CHECK(manifest.at("status") == "success");
    CHECK(manifest.at("seed") == 3);
    CHECK(manifest.contains("config"));
    CHECK(manifest.contains("started_utc"));
    CHECK(manifest.contains("ended_utc"));

    std::ifstream m(dir + "/run/metrics.csv");
    std::string header;
    std::getline(m, header);
    CHECK(header ==
          "step,epoch,train_loss,stage2_loss,val_loss,norm_test_loss,card_sigma,mean_f_clean,"
          "mean_f_corrupted");
    int rows = 0;
    for (std::string line; std::getline(m, line);) ++rows;
    CHECK(rows == 4); // ceil(32 / 8) steps x 1 epoch

    // eval on the produced genotype
    const int rc2 = run_cli("eval --config " + dir + "/cfg.json --genotype " + dir +
                                "/run/genotype.json --out " + dir + "/eval",
                            dir + "/log2.txt");
    CHECK(rc2 == 0);
    CHECK(fs::exists(dir + "/eval/eval_metrics.csv"));
}

TEST_CASE("cli: seed flag overrides the config seed") {
    const std::string dir = test_dir("cli_seed");
    write_tiny_config(dir + "/cfg.json");
    const int rc = run_cli("search --config " + dir + "/cfg.json --seed 42 --out " + dir + "/run",
                           dir + "/log.txt");
    CHECK(rc == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir + "/run/manifest.json"));
    CHECK(manifest.at("seed") == 42);
}

TEST_CASE("cli: sweep produces one row per grid value") {
    const std::string dir = test_dir("cli_sweep");
    write_tiny_config(dir + "/cfg.json");
    const int rc = run_cli("sweep --config " + dir + "/cfg.json --param lambda "
                           "--values 0.1 0.5 1 2 --jobs 2 --out " +
                               dir + "/sweep",
                           dir + "/log.txt");
    CHECK(rc == 0);
    std::ifstream f(dir + "/sweep/sweep.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "param,value,seed,final_error,final_loss");
    int rows = 0;
    for (std::string line; std::getline(f, line);) ++rows;
    CHECK(rows == 4);
}

TEST_CASE("cli: oracle subcommand writes the report and exits 0") {
    const std::string dir = test_dir("cli_oracle");
    const int rc = run_cli("oracle --suite bilevel --out " + dir, dir + "/log.txt");
    CHECK(rc == 0);
    CHECK(fs::exists(dir + "/oracle_report.json"));
    const auto report = nlohmann::json::parse(slurp(dir + "/oracle_report.json"));
    CHECK(report.is_array());
    CHECK(report.size() >= 2);
    for (const auto& c : report) {
        CHECK(c.contains("name"));
        CHECK(c.contains("max_rel_err"));
        CHECK(c.contains("tolerance"));
        CHECK(c.at("pass") == true);
    }
}
