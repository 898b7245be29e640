// lpt: batch entry point for search / eval / oracle / sweep runs.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpt/config.hpp"
#include "lpt/engine.hpp"
#include "lpt/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kBuildId = "lpt 0.1.0";

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Run manifest: written before the run starts, finalized when it ends.
class Manifest {
public:
    Manifest(std::string out_dir, std::string command, const lpt::LptConfig* cfg,
             std::uint64_t seed)
        : path_(out_dir + "/manifest.json") {
        fs::create_directories(out_dir);
        j_["schema_version"] = 1;
        j_["command"] = std::move(command);
        j_["build"] = kBuildId;
        j_["seed"] = seed;
        if (cfg) j_["config"] = nlohmann::json::parse(lpt::config_to_json(*cfg));
        j_["started_utc"] = utc_now();
        j_["status"] = "running";
        j_["outputs"] = ordered_json::array();
        flush();
    }

    void add_output(const std::string& file) { j_["outputs"].push_back(file); }

    void finalize(bool success) {
        j_["ended_utc"] = utc_now();
        j_["status"] = success ? "success" : "failed";
        flush();
    }

private:
    void flush() {
        std::ofstream f(path_);
        if (f) f << j_.dump(2) << '\n';
    }
    std::string path_;
    ordered_json j_;
};

struct SweepRow {
    std::string param;
    double value = 0.0;
    std::uint64_t seed = 0;
    double error_rate = 0.0;
    double mean_loss = 0.0;
};

int cmd_search(const lpt::LptConfig& cfg, const std::string& out_dir) {
    Manifest manifest(out_dir, "search", &cfg, cfg.seed);
    try {
        auto [train_source, test] = lpt::load_data(cfg);
        lpt::Splits splits = lpt::make_run_splits(cfg, train_source);
        lpt::write_split_csv(out_dir + "/splits.csv", splits);
        lpt::LptEngine engine(cfg, std::move(splits));
        const lpt::SearchResult res = engine.run_search(out_dir);
        for (const char* f : {"metrics.csv", "selection_weights.csv", "genotype.json", "splits.csv"})
            manifest.add_output(f);
        manifest.finalize(true);
        std::printf("search complete: %zu steps, genotype written to %s/genotype.json\n",
                    res.history.size(), out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "search failed: %s\n", e.what());
        manifest.finalize(false);
        return 1;
    }
}

int cmd_eval(const lpt::LptConfig& cfg, const std::string& genotype_path,
             const std::string& out_dir) {
    Manifest manifest(out_dir, "eval", &cfg, cfg.seed);
    try {
        std::ifstream gf(genotype_path);
        if (!gf) {
            std::fprintf(stderr, "eval failed: cannot open genotype file %s\n",
                         genotype_path.c_str());
            manifest.finalize(false);
            return 1;
        }
        std::ostringstream ss;
        ss << gf.rdbuf();
        const lpt::Genotype genotype = lpt::genotype_from_json(ss.str());

        auto [train_source, test] = lpt::load_data(cfg);
        lpt::Splits splits = lpt::make_run_splits(cfg, train_source);
        const lpt::EvalRunResult r = lpt::run_eval(genotype, cfg, splits, test);

        std::ofstream m(out_dir + "/eval_metrics.csv");
        m << "epoch,train_loss,test_error,test_loss\n";
        for (std::size_t i = 0; i < r.epoch_losses.size(); ++i) {
            m << i << ',' << r.epoch_losses[i] << ',';
            if (i + 1 == r.epoch_losses.size())
                m << r.error_rate << ',' << r.mean_loss << '\n';
            else
                m << "nan,nan\n";
        }
        manifest.add_output("eval_metrics.csv");
        manifest.finalize(true);
        std::printf("eval complete: test error %.4f, test loss %.4f\n", r.error_rate, r.mean_loss);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "eval failed: %s\n", e.what());
        manifest.finalize(false);
        return 1;
    }
}

int cmd_oracle(const std::string& suite, const std::string& out_dir) {
    Manifest manifest(out_dir, "oracle", nullptr, 0);
    try {
        const std::vector<lpt::OracleCheck> checks = lpt::run_oracle_suite(suite);
        lpt::write_oracle_report(out_dir + "/oracle_report.json", checks);
        manifest.add_output("oracle_report.json");
        bool all_pass = true;
        for (const auto& c : checks) {
            std::printf("[%s] %-40s max_rel_err=%.3e tol=%.1e\n", c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.max_rel_err, c.tolerance);
            all_pass = all_pass && c.pass;
        }
        manifest.finalize(all_pass);
        return all_pass ? 0 : 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "oracle failed: %s\n", e.what());
        manifest.finalize(false);
        return 3;
    }
}

int cmd_sweep(const lpt::LptConfig& base_cfg, const std::string& param,
              std::vector<double> values, std::vector<std::uint64_t> seeds,
              const std::string& out_dir, int jobs) {
    Manifest manifest(out_dir, "sweep", &base_cfg, base_cfg.seed);
    try {
        if (param != "lambda" && param != "gamma")
            throw lpt::ConfigError("sweep param must be 'lambda' or 'gamma'");
        if (values.empty()) values = {0.1, 0.5, 1.0, 2.0, 3.0};
        if (seeds.empty()) seeds = {base_cfg.seed};

        struct Job {
            double value;
            std::uint64_t seed;
        };
        std::vector<Job> todo;
        for (double v : values)
            for (std::uint64_t s : seeds) todo.push_back({v, s});
        std::vector<SweepRow> rows(todo.size());
        std::vector<std::string> errors;
        std::mutex err_mu;
        std::size_t cursor = 0;
        std::mutex cursor_mu;

        auto worker = [&]() {
            while (true) {
                std::size_t k;
                {
                    std::lock_guard<std::mutex> lk(cursor_mu);
                    if (cursor >= todo.size()) return;
                    k = cursor++;
                }
                lpt::LptConfig cfg = base_cfg;
                if (param == "lambda")
                    cfg.lambda = todo[k].value;
                else
                    cfg.gamma = todo[k].value;
                cfg.seed = todo[k].seed;
                std::ostringstream sub;
                sub << out_dir << '/' << param << '_' << todo[k].value << "_seed_"
                    << todo[k].seed;
                try {
                    auto [train_source, test] = lpt::load_data(cfg);
                    lpt::Splits splits = lpt::make_run_splits(cfg, train_source);
                    lpt::LptEngine engine(cfg, std::move(splits));
                    const lpt::SearchResult res = engine.run_search(sub.str());
                    const lpt::EvalRunResult ev =
                        lpt::run_eval(res.genotype, cfg, engine.splits(), test);
                    rows[k] = SweepRow{param, todo[k].value, todo[k].seed, ev.error_rate,
                                       ev.mean_loss};
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    errors.push_back(sub.str() + ": " + e.what());
                }
            }
        };
        const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(todo.size())));
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        if (!errors.empty()) {
            for (const auto& e : errors) std::fprintf(stderr, "sweep point failed: %s\n", e.c_str());
            manifest.finalize(false);
            return 1;
        }

        std::ofstream f(out_dir + "/sweep.csv");
        f << "param,value,seed,final_error,final_loss\n";
        for (const SweepRow& r : rows)
            f << r.param << ',' << r.value << ',' << r.seed << ',' << r.error_rate << ','
              << r.mean_loss << '\n';
        manifest.add_output("sweep.csv");
        manifest.finalize(true);
        std::printf("sweep complete: %zu points written to %s/sweep.csv\n", rows.size(),
                    out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep failed: %s\n", e.what());
        manifest.finalize(false);
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"learning-by-passing-tests search engine"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run_out", genotype_path, suite = "all", param = "lambda";
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "JSON config path");
        if (needs_config) opt->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag_callback("--version", [] {
            std::printf("%s\n", kBuildId);
            std::exit(0);
        });
        sub->add_option("--seed", seed_override, "override config seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* search = app.add_subcommand("search", "run architecture search");
    add_common(search, true);

    CLI::App* eval = app.add_subcommand("eval", "train and evaluate a discretized genotype");
    add_common(eval, true);
    eval->add_option("--genotype", genotype_path, "genotype.json path")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "run brute-force self-checks");
    add_common(oracle, false);
    oracle->add_option("--suite", suite, "suite name: all|autodiff|hypergrad|bilevel");

    CLI::App* sweep = app.add_subcommand("sweep", "sweep lambda or gamma over a value grid");
    add_common(sweep, true);
    sweep->add_option("--param", param, "lambda or gamma");
    sweep->add_option("--values", values, "grid values (default 0.1 0.5 1 2 3)");
    sweep->add_option("--seeds", seeds, "seeds (default: config seed)");
    sweep->add_option("--jobs", jobs, "parallel workers");

    CLI11_PARSE(app, argc, argv);

    lpt::LptConfig cfg;
    if (!config_path.empty()) {
        try {
            cfg = lpt::config_from_file(config_path);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }
        if (seed_set) cfg.seed = seed_override;
    }

    try {
        if (search->parsed()) return cmd_search(cfg, out_dir);
        if (eval->parsed()) return cmd_eval(cfg, genotype_path, out_dir);
        if (oracle->parsed()) return cmd_oracle(suite, out_dir);
        if (sweep->parsed()) return cmd_sweep(cfg, param, values, seeds, out_dir, jobs);
    } catch (const lpt::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
