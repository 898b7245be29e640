// lpt_engine._core: python bindings over the search engine's main operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lpt/config.hpp"
#include "lpt/engine.hpp"
#include "lpt/oracle.hpp"

namespace py = pybind11;

namespace {

lpt::LptConfig parse_config(const std::string& config_json) {
    return lpt::config_from_json(config_json);
}

py::dict genotype_to_dict(const lpt::Genotype& g) {
    py::list nodes;
    for (const auto& n : g.nodes) {
        py::list edges;
        for (const auto& e : n.edges) {
            py::dict je;
            je["from"] = e.from;
            je["op"] = e.op;
            edges.append(je);
        }
        py::dict jn;
        jn["node"] = n.node;
        jn["edges"] = edges;
        nodes.append(jn);
    }
    py::dict out;
    out["nodes"] = nodes;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "learning-by-passing-tests search engine";

    m.def("default_config", [] { return lpt::config_to_json(lpt::default_config()); },
          "Default run configuration as a JSON string.");

    m.def(
        "validate_config",
        [](const std::string& config_json) { return lpt::config_to_json(parse_config(config_json)); },
        py::arg("config_json"),
        "Parse and validate a config; returns the normalized JSON echo.");

    m.def(
        "search",
        [](const std::string& config_json, const std::string& out_dir) {
            const lpt::LptConfig cfg = parse_config(config_json);
            auto [train_source, test] = lpt::load_data(cfg);
            lpt::LptEngine engine(cfg, lpt::make_run_splits(cfg, train_source));
            const lpt::SearchResult res = engine.run_search(out_dir);
            py::dict out;
            out["genotype"] = genotype_to_dict(res.genotype);
            out["genotype_json"] = lpt::genotype_to_json(res.genotype);
            out["steps"] = static_cast<long>(res.history.size());
            out["final_norm_test_loss"] =
                res.history.empty() ? 0.0 : res.history.back().norm_test_loss;
            out["state_hash"] = engine.state().hash();
            return out;
        },
        py::arg("config_json"), py::arg("out_dir") = std::string(),
        "Run architecture search; returns the selected genotype and run summary.");

    m.def(
        "eval_genotype",
        [](const std::string& genotype_json, const std::string& config_json) {
            const lpt::LptConfig cfg = parse_config(config_json);
            const lpt::Genotype g = lpt::genotype_from_json(genotype_json);
            auto [train_source, test] = lpt::load_data(cfg);
            const lpt::Splits splits = lpt::make_run_splits(cfg, train_source);
            const lpt::EvalRunResult r = lpt::run_eval(g, cfg, splits, test);
            py::dict out;
            out["error_rate"] = r.error_rate;
            out["mean_loss"] = r.mean_loss;
            out["epoch_losses"] = r.epoch_losses;
            return out;
        },
        py::arg("genotype_json"), py::arg("config_json"),
        "Retrain a discretized genotype from scratch and report held-out error.");

    m.def(
        "oracle",
        [](const std::string& suite) {
            py::list out;
            for (const auto& c : lpt::run_oracle_suite(suite)) {
                py::dict jc;
                jc["name"] = c.name;
                jc["max_rel_err"] = c.max_rel_err;
                jc["tolerance"] = c.tolerance;
                jc["pass"] = c.pass;
                out.append(jc);
            }
            return out;
        },
        py::arg("suite") = "all", "Run the brute-force self-check suite.");

    m.def(
        "synth_two_class",
        [](int n, double noise, double corrupt_frac, std::uint64_t seed) {
            const lpt::Dataset d = lpt::synth_two_class(n, noise, corrupt_frac, seed);
            py::list xs, ys, corrupted;
            for (const auto& e : d.examples) {
                xs.append(py::make_tuple(e.input[0], e.input[1]));
                ys.append(e.label);
                corrupted.append(e.corrupted);
            }
            py::dict out;
            out["x"] = xs;
            out["label"] = ys;
            out["corrupted"] = corrupted;
            return out;
        },
        py::arg("n"), py::arg("noise") = 0.15, py::arg("corrupt_frac") = 0.0, py::arg("seed") = 0,
        "Generate the two-class synthetic dataset.");
}
