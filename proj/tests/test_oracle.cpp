#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lpt/oracle.hpp"
#include "test_helpers.hpp"

using namespace lpt;
using namespace lpt::testing;

TEST_CASE("numerical_grad: squares, constants, guards") {
    const ParamVector g = numerical_grad(
        [](const ParamVector& t) { return t[0] * t[0]; }, ParamVector(std::vector<double>{3.0}));
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));

    const ParamVector gc = numerical_grad([](const ParamVector&) { return 4.2; },
                                          ParamVector(std::vector<double>{1.0, 2.0}));
    CHECK(gc.norm2() == 0.0);

    CHECK_THROWS_AS((void)numerical_grad(
                        [](const ParamVector& t) { return std::log(t[0]); },
                        ParamVector(std::vector<double>{1e-9})),
                    NonFiniteLoss);
}

TEST_CASE("quadratic_bilevel_exact: hand-derived identity instance") {
    QuadraticBilevel p;
    p.dim_w = 2;
    p.dim_a = 2;
    p.H = {1, 0, 0, 1};
    p.G = {1, 0, 0, 1};
    p.P = {1, 0, 0, 1};
    p.R = {0, 0, 0, 0};
    p.b = {0, 0};
    p.q = {0, 0};
    p.s = {0, 0};
    const ParamVector a(std::vector<double>{0.7, -0.4});
    const BilevelExact r = quadratic_bilevel_exact(p, a);
    CHECK(r.w_star[0] == doctest::Approx(-0.7));
    CHECK(r.w_star[1] == doctest::Approx(0.4));
    CHECK(r.hypergrad[0] == doctest::Approx(0.7));
    CHECK(r.hypergrad[1] == doctest::Approx(-0.4));
}

TEST_CASE("quadratic_bilevel_exact: G = 0 leaves only the outer-in-a term") {
    Rng rng(3);
    QuadraticBilevel p = QuadraticBilevel::random(3, 2, rng, 0.0);
    for (auto& g : p.G) g = 0.0;
    const ParamVector a(std::vector<double>{0.3, -0.9});
    const BilevelExact r = quadratic_bilevel_exact(p, a);
    // grad = R a + s
    for (int j = 0; j < 2; ++j) {
        double want = p.s[j];
        for (int k = 0; k < 2; ++k) want += p.R[j * 2 + k] * a[k];
        CHECK(r.hypergrad[j] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("quadratic_bilevel_exact: exact gradient matches numerical bilevel solve") {
    Rng rng(5);
    const QuadraticBilevel p = QuadraticBilevel::random(4, 3, rng, 0.0);
    const ParamVector a = ParamVector::randn(3, rng, 0.6);
    const BilevelExact r = quadratic_bilevel_exact(p, a);
    const ParamVector num = numerical_grad(
        [&](const ParamVector& aa) {
            const BilevelExact s = quadratic_bilevel_exact(p, aa);
            const DifferentiableFn outer = make_bilevel_outer_fn(p);
            return evaluate(outer, {{"A", &aa}, {"W", &s.w_star}}, Batch{});
        },
        a);
    CHECK(rel_err(r.hypergrad, num) <= 1e-6);
}

TEST_CASE("quadratic_bilevel_exact: ill-conditioned H is rejected") {
    QuadraticBilevel p;
    p.dim_w = 2;
    p.dim_a = 1;
    p.H = {1.0, 0.0, 0.0, 1e-10};
    p.G = {1.0, 1.0};
    p.P = {1.0, 0.0, 0.0, 1.0};
    p.R = {1.0};
    p.b = {0.0, 0.0};
    p.q = {0.0, 0.0};
    p.s = {0.0};
    CHECK_THROWS_AS((void)quadratic_bilevel_exact(p, ParamVector(std::vector<double>{1.0})),
                    IllConditioned);
}

TEST_CASE("all_genotypes: exhaustive, duplicate-free, correctly counted") {
    CellSpec spec;
    spec.num_nodes = 4; // intermediates 2 and 3
    spec.width = 1;
    spec.k_in = 2;
    spec.ops = {"zero", "identity"}; // one real op
    const std::vector<Genotype> gs = all_genotypes(spec);
    // node 2: C(2,2)=1 combo x 1 op^2; node 3: C(3,2)=3 x 1 -> 3 genotypes
    CHECK(gs.size() == 3);
    std::set<std::string> unique;
    for (const auto& g : gs) unique.insert(genotype_to_json(g));
    CHECK(unique.size() == gs.size());

    CellSpec bigger = spec;
    bigger.ops = {"zero", "identity", "linear", "tanh_mlp"};
    // node 2: 1 x 3^2 = 9; node 3: 3 x 9 = 27 -> 243
    CHECK(all_genotypes(bigger).size() == 243);
}

TEST_CASE("enumerate_genotypes: deterministic ranking; degenerate baseline is worst") {
    CellSpec spec;
    spec.num_nodes = 4;
    spec.width = 4;
    spec.k_in = 1;
    spec.ops = {"zero", "identity", "tanh_mlp"};
    const Dataset train = synth_two_class(96, 0.08, 0.0, 21);
    const Dataset test = synth_two_class(64, 0.08, 0.0, 22);
    TrainBudget budget;
    budget.epochs = 12;
    budget.batch_size = 16;
    budget.lr = 0.08;
    budget.seed = 5;

    const auto ranked = enumerate_genotypes(spec, train, test, budget);
    CHECK(ranked.size() == all_genotypes(spec).size());
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i - 1].error_rate <= ranked[i].error_rate + 1e-12);
    }
    const auto ranked2 = enumerate_genotypes(spec, train, test, budget);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(ranked[i].genotype == ranked2[i].genotype);
        CHECK(ranked[i].error_rate == ranked2[i].error_rate);
    }

    // The all-zero-op architecture (bias-only classifier) cannot beat the
    // worst enumerated genotype on separable data.
    Genotype zero_g;
    zero_g.nodes.push_back(GenotypeNode{2, {{0, "zero"}, {1, "zero"}}});
    zero_g.nodes.push_back(GenotypeNode{3, {{0, "zero"}, {1, "zero"}}});
    DiscreteNet zero_net(spec, zero_g, train.dim, train.num_classes);
    const ParamVector w = train_discrete(zero_net, train, budget);
    const auto [zerr, zloss] = evaluate_discrete(zero_net, w, test);
    CHECK(zerr >= ranked.back().error_rate - 1e-12);
    CHECK(zerr >= 0.4); // bias-only net is near chance on balanced data
}

TEST_CASE("enumerate_genotypes: refuses oversized spaces") {
    CellSpec spec;
    spec.num_nodes = 6;
    spec.width = 1;
    spec.ops = {"zero", "identity", "linear", "tanh_mlp"};
    const Dataset train = synth_two_class(16, 0.1, 0.0, 1);
    CHECK_THROWS_AS((void)enumerate_genotypes(spec, train, train, TrainBudget{}), BadArgument);
}

TEST_CASE("oracle suite: autodiff subset passes and writes a report") {
    const auto checks = run_oracle_suite("autodiff");
    CHECK(checks.size() >= 5);
    for (const auto& c : checks) CHECK(c.pass);

    std::filesystem::create_directories(LPT_TEST_TMP);
    const std::string path = std::string(LPT_TEST_TMP) + "/oracle_report.json";
    write_oracle_report(path, checks);
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str().find("max_rel_err") != std::string::npos);

    CHECK_THROWS_AS((void)run_oracle_suite("nonsense"), BadArgument);
}
