#include "lpt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lpt {

using nlohmann::json;

std::string run_mode_name(RunMode m) {
    switch (m) {
    case RunMode::full: return "full";
    case RunMode::ablation1: return "ablation1";
    case RunMode::ablation2: return "ablation2";
    case RunMode::darts_baseline: return "darts_baseline";
    }
    return "full";
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "full") return RunMode::full;
    if (name == "ablation1") return RunMode::ablation1;
    if (name == "ablation2") return RunMode::ablation2;
    if (name == "darts_baseline") return RunMode::darts_baseline;
    throw ConfigError("unknown mode '" + name + "'");
}

void LptConfig::validate() const {
    if (schema_version != 1) throw ConfigError("unsupported schema_version");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (batch_size_bank < 0) throw ConfigError("batch_size_bank must be >= 0");
    if (unroll.xi_ln < 0.0 || unroll.xi_e < 0.0 || unroll.xi_x < 0.0)
        throw ConfigError("unroll rates must be >= 0");
    if (unroll.fd_epsilon_scale <= 0.0) throw ConfigError("fd_epsilon_scale must be > 0");
    if (data.source != "synthetic" && data.source != "lptd")
        throw ConfigError("data.source must be 'synthetic' or 'lptd'");
    if (data.corrupt_target != "bank" && data.corrupt_target != "bank_region" &&
        data.corrupt_target != "all")
        throw ConfigError("data.corrupt_target must be 'bank', 'bank_region', or 'all'");
    if (data.corrupt_frac < 0.0 || data.corrupt_frac > 0.5)
        throw ConfigError("data.corrupt_frac must be in [0, 0.5]");
    if (data.source == "lptd" && (data.path.empty() || data.test_path.empty()))
        throw ConfigError("data.source 'lptd' requires data.path and data.test_path");
    cell.validate();
}

LptConfig default_config() {
    LptConfig cfg;
    cfg.cell.num_nodes = 5;
    cfg.cell.num_cells = 1;
    cfg.cell.width = 8;
    return cfg;
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") +
                              it.key() + "'");
    }
}

template <class T>
void get_to(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception&) {
        throw ConfigError("bad value for config key '" + (where.empty() ? "" : where + ".") +
                          key + "'");
    }
}

void parse_sgd(const json& j, SgdCfg& cfg, const std::string& where) {
    require_keys(j, {"lr", "momentum", "weight_decay", "lr_min"}, where);
    get_to(j, "lr", cfg.lr, where);
    get_to(j, "momentum", cfg.momentum, where);
    get_to(j, "weight_decay", cfg.weight_decay, where);
    get_to(j, "lr_min", cfg.lr_min, where);
}

void parse_adam(const json& j, AdamCfg& cfg, const std::string& where) {
    require_keys(j, {"lr", "beta1", "beta2", "weight_decay"}, where);
    get_to(j, "lr", cfg.lr, where);
    get_to(j, "beta1", cfg.beta1, where);
    get_to(j, "beta2", cfg.beta2, where);
    get_to(j, "weight_decay", cfg.weight_decay, where);
}

} // namespace

LptConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    LptConfig cfg = default_config();
    require_keys(j,
                 {"schema_version", "seed", "precision", "mode", "lambda", "gamma", "epochs",
                  "batch_size", "batch_size_bank", "frozen_f", "data", "cell", "tester", "optim",
                  "unroll", "eval"},
                 "");
    get_to(j, "schema_version", cfg.schema_version, "");
    get_to(j, "seed", cfg.seed, "");
    if (j.contains("precision")) {
        const std::string p = j.at("precision").get<std::string>();
        if (p == "f64")
            cfg.precision = Precision::f64;
        else if (p == "f32")
            cfg.precision = Precision::f32;
        else
            throw ConfigError("precision must be 'f64' or 'f32'");
    }
    if (j.contains("mode")) cfg.mode = run_mode_from_name(j.at("mode").get<std::string>());
    get_to(j, "lambda", cfg.lambda, "");
    get_to(j, "gamma", cfg.gamma, "");
    get_to(j, "epochs", cfg.epochs, "");
    get_to(j, "batch_size", cfg.batch_size, "");
    get_to(j, "batch_size_bank", cfg.batch_size_bank, "");
    get_to(j, "frozen_f", cfg.frozen_f, "");

    if (j.contains("data")) {
        const json& d = j.at("data");
        require_keys(d,
                     {"source", "path", "test_path", "n", "noise", "corrupt_frac",
                      "corrupt_target", "seed", "test_n", "fractions", "alias_bank_val"},
                     "data");
        get_to(d, "source", cfg.data.source, "data");
        get_to(d, "path", cfg.data.path, "data");
        get_to(d, "test_path", cfg.data.test_path, "data");
        get_to(d, "n", cfg.data.n, "data");
        get_to(d, "noise", cfg.data.noise, "data");
        get_to(d, "corrupt_frac", cfg.data.corrupt_frac, "data");
        get_to(d, "corrupt_target", cfg.data.corrupt_target, "data");
        get_to(d, "seed", cfg.data.seed, "data");
        get_to(d, "test_n", cfg.data.test_n, "data");
        get_to(d, "alias_bank_val", cfg.data.alias_bank_val, "data");
        if (d.contains("fractions")) {
            std::vector<double> fr;
            get_to(d, "fractions", fr, "data");
            if (fr.size() != 4) throw ConfigError("data.fractions must have 4 entries");
            for (int i = 0; i < 4; ++i) cfg.data.fractions[i] = fr[i];
        }
    }
    if (j.contains("cell")) {
        const json& c = j.at("cell");
        require_keys(c, {"num_nodes", "num_cells", "ops", "width", "k_in", "input", "image"},
                     "cell");
        get_to(c, "num_nodes", cfg.cell.num_nodes, "cell");
        get_to(c, "num_cells", cfg.cell.num_cells, "cell");
        get_to(c, "ops", cfg.cell.ops, "cell");
        get_to(c, "width", cfg.cell.width, "cell");
        get_to(c, "k_in", cfg.cell.k_in, "cell");
        if (c.contains("input")) {
            const std::string k = c.at("input").get<std::string>();
            if (k == "vector")
                cfg.cell.input = InputKind::vector_in;
            else if (k == "image")
                cfg.cell.input = InputKind::image_in;
            else
                throw ConfigError("cell.input must be 'vector' or 'image'");
        }
        if (c.contains("image")) {
            const json& im = c.at("image");
            require_keys(im, {"h", "w", "c"}, "cell.image");
            get_to(im, "h", cfg.cell.image.h, "cell.image");
            get_to(im, "w", cfg.cell.image.w, "cell.image");
            get_to(im, "c", cfg.cell.image.c, "cell.image");
        }
    }
    if (j.contains("tester")) {
        const json& t = j.at("tester");
        require_keys(t, {"encoder_hidden", "latent_dim"}, "tester");
        get_to(t, "encoder_hidden", cfg.tester.encoder_hidden, "tester");
        get_to(t, "latent_dim", cfg.tester.latent_dim, "tester");
    }
    cfg.tester.input = cfg.cell.input;
    cfg.tester.image = cfg.cell.image;
    if (j.contains("optim")) {
        const json& o = j.at("optim");
        require_keys(o, {"weights", "encoder_executor", "creator", "arch"}, "optim");
        if (o.contains("weights")) parse_sgd(o.at("weights"), cfg.opt_weights, "optim.weights");
        if (o.contains("encoder_executor"))
            parse_sgd(o.at("encoder_executor"), cfg.opt_encoder_executor,
                      "optim.encoder_executor");
        if (o.contains("creator")) parse_adam(o.at("creator"), cfg.opt_creator, "optim.creator");
        if (o.contains("arch")) parse_adam(o.at("arch"), cfg.opt_arch, "optim.arch");
    }
    if (j.contains("unroll")) {
        const json& u = j.at("unroll");
        require_keys(u, {"xi_ln", "xi_e", "xi_x", "fd_epsilon_scale", "first_order"}, "unroll");
        get_to(u, "xi_ln", cfg.unroll.xi_ln, "unroll");
        get_to(u, "xi_e", cfg.unroll.xi_e, "unroll");
        get_to(u, "xi_x", cfg.unroll.xi_x, "unroll");
        get_to(u, "fd_epsilon_scale", cfg.unroll.fd_epsilon_scale, "unroll");
        get_to(u, "first_order", cfg.unroll.first_order, "unroll");
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        require_keys(e, {"epochs", "batch_size", "lr"}, "eval");
        get_to(e, "epochs", cfg.eval.epochs, "eval");
        get_to(e, "batch_size", cfg.eval.batch_size, "eval");
        get_to(e, "lr", cfg.eval.lr, "eval");
    }
    cfg.validate();
    return cfg;
}

LptConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const LptConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    j["precision"] = cfg.precision == Precision::f64 ? "f64" : "f32";
    j["mode"] = run_mode_name(cfg.mode);
    j["lambda"] = cfg.lambda;
    j["gamma"] = cfg.gamma;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["batch_size_bank"] = cfg.batch_size_bank;
    j["frozen_f"] = cfg.frozen_f;
    j["data"] = {{"source", cfg.data.source},
                 {"path", cfg.data.path},
                 {"test_path", cfg.data.test_path},
                 {"n", cfg.data.n},
                 {"noise", cfg.data.noise},
                 {"corrupt_frac", cfg.data.corrupt_frac},
                 {"corrupt_target", cfg.data.corrupt_target},
                 {"seed", cfg.data.seed},
                 {"test_n", cfg.data.test_n},
                 {"fractions", {cfg.data.fractions[0], cfg.data.fractions[1],
                                cfg.data.fractions[2], cfg.data.fractions[3]}},
                 {"alias_bank_val", cfg.data.alias_bank_val}};
    j["cell"] = {{"num_nodes", cfg.cell.num_nodes},
                 {"num_cells", cfg.cell.num_cells},
                 {"ops", cfg.cell.ops},
                 {"width", cfg.cell.width},
                 {"k_in", cfg.cell.k_in},
                 {"input", cfg.cell.input == InputKind::vector_in ? "vector" : "image"},
                 {"image", {{"h", cfg.cell.image.h}, {"w", cfg.cell.image.w},
                            {"c", cfg.cell.image.c}}}};
    j["tester"] = {{"encoder_hidden", cfg.tester.encoder_hidden},
                   {"latent_dim", cfg.tester.latent_dim}};
    j["optim"] = {
        {"weights",
         {{"lr", cfg.opt_weights.lr},
          {"momentum", cfg.opt_weights.momentum},
          {"weight_decay", cfg.opt_weights.weight_decay},
          {"lr_min", cfg.opt_weights.lr_min}}},
        {"encoder_executor",
         {{"lr", cfg.opt_encoder_executor.lr},
          {"momentum", cfg.opt_encoder_executor.momentum},
          {"weight_decay", cfg.opt_encoder_executor.weight_decay},
          {"lr_min", cfg.opt_encoder_executor.lr_min}}},
        {"creator",
         {{"lr", cfg.opt_creator.lr},
          {"beta1", cfg.opt_creator.beta1},
          {"beta2", cfg.opt_creator.beta2},
          {"weight_decay", cfg.opt_creator.weight_decay}}},
        {"arch",
         {{"lr", cfg.opt_arch.lr},
          {"beta1", cfg.opt_arch.beta1},
          {"beta2", cfg.opt_arch.beta2},
          {"weight_decay", cfg.opt_arch.weight_decay}}}};
    j["unroll"] = {{"xi_ln", cfg.unroll.xi_ln},
                   {"xi_e", cfg.unroll.xi_e},
                   {"xi_x", cfg.unroll.xi_x},
                   {"fd_epsilon_scale", cfg.unroll.fd_epsilon_scale},
                   {"first_order", cfg.unroll.first_order}};
    j["eval"] = {{"epochs", cfg.eval.epochs},
                 {"batch_size", cfg.eval.batch_size},
                 {"lr", cfg.eval.lr}};
    return j.dump(2);
}

} // namespace lpt
