#include <doctest.h>

#include "lpt/diff_fn.hpp"
#include "lpt/oracle.hpp"
#include "test_helpers.hpp"

using namespace lpt;
using namespace lpt::testing;

TEST_CASE("autodiff: quadratic identity") {
    const DifferentiableFn f = make_halfnorm_fn();
    const ParamVector theta(std::vector<double>{3.0, 4.0});
    const auto r = value_and_grad(f, {{"T", &theta}}, Batch{}, {"T"});
    CHECK(r.loss == doctest::Approx(12.5).epsilon(1e-15));
    CHECK(r.grads.at("T")[0] == doctest::Approx(3.0));
    CHECK(r.grads.at("T")[1] == doctest::Approx(4.0));
}

TEST_CASE("autodiff: constant objective has zero gradient") {
    const DifferentiableFn f = make_constant_fn(2.75);
    const ParamVector theta(std::vector<double>{1.0, -2.0, 0.5});
    const auto r = value_and_grad(f, {{"T", &theta}}, Batch{}, {"T"});
    CHECK(r.loss == 2.75);
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(r.grads.at("T")[i] == 0.0);
}

TEST_CASE("autodiff: tanh MLP gradient matches central differences") {
    Rng rng(11);
    const ToyMlp mlp(2, 4, 2);
    const Batch batch = random_batch(8, 2, 2, rng);
    const DifferentiableFn f = mlp.loss_fn();
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const ParamVector w = mlp.init(rng);
        const auto r = value_and_grad(f, {{"W", &w}}, batch, {"W"});
        const ParamVector num = numerical_grad(
            [&](const ParamVector& p) { return evaluate(f, {{"W", &p}}, batch); }, w, 1e-5);
        worst = std::max(worst, rel_err(r.grads.at("W"), num));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("autodiff: unknown block names are rejected") {
    const DifferentiableFn f = make_halfnorm_fn();
    const ParamVector theta(std::vector<double>{1.0});
    CHECK_THROWS_AS((void)value_and_grad(f, {{"T", &theta}}, Batch{}, {"Q"}), BadArgument);
    CHECK_THROWS_AS((void)value_and_grad(f, {{"X", &theta}}, Batch{}, {"T"}), BadArgument);
}

TEST_CASE("autodiff: non-finite values fail fast") {
    Tape<double> t;
    Mat<double> m(1, 1);
    m.a[0] = 1e308;
    const int big = t.constant(std::move(m));
    CHECK_THROWS_AS((void)t.hadamard(t.scale(big, 10.0), big), NonFiniteLoss);

    CHECK_THROWS_AS((void)ParamVector(std::vector<double>{1.0, std::nan("")}), NonFiniteValue);
}

TEST_CASE("autodiff: determinism is bit-exact") {
    Rng rng(5);
    const ToyMlp mlp(3, 5, 3);
    const Batch batch = random_batch(6, 3, 3, rng);
    const ParamVector w = mlp.init(rng);
    const DifferentiableFn f = mlp.loss_fn();
    const auto r1 = value_and_grad(f, {{"W", &w}}, batch, {"W"});
    const auto r2 = value_and_grad(f, {{"W", &w}}, batch, {"W"});
    CHECK(r1.loss == r2.loss);
    CHECK(r1.grads.at("W") == r2.grads.at("W"));
}

TEST_CASE("autodiff: gradients are linear in the objective") {
    Rng rng(7);
    const QuadraticBilevel p = QuadraticBilevel::random(4, 3, rng, 0.3);
    const DifferentiableFn f = make_bilevel_inner_fn(p);
    const DifferentiableFn g = make_bilevel_outer_fn(p);
    const double alpha = 1.7, beta = -0.6;
    const DifferentiableFn combo =
        DifferentiableFn({"A", "W"}, [p, alpha, beta](auto& t, const std::vector<int>& b,
                                                      const Batch& batch) {
            const DifferentiableFn fi = make_bilevel_inner_fn(p);
            const DifferentiableFn fo = make_bilevel_outer_fn(p);
            return t.add(t.scale(fi.build(t, b, batch), alpha),
                         t.scale(fo.build(t, b, batch), beta));
        });
    const ParamVector a = ParamVector::randn(3, rng, 1.0);
    const ParamVector w = ParamVector::randn(4, rng, 1.0);
    const NamedBlocks blocks{{"A", &a}, {"W", &w}};
    const auto rf = value_and_grad(f, blocks, Batch{}, {"A", "W"});
    const auto rg = value_and_grad(g, blocks, Batch{}, {"A", "W"});
    const auto rc = value_and_grad(combo, blocks, Batch{}, {"A", "W"});
    for (const char* name : {"A", "W"}) {
        ParamVector want = rf.grads.at(name);
        want.scale(alpha);
        want.add_scaled(beta, rg.grads.at(name));
        CHECK(rel_err(rc.grads.at(name), want) <= 1e-12);
    }
}

TEST_CASE("hvp_exact: analytic diagonal quadratic") {
    // f(w) = 0.5 w' H w with H = diag(2, 4); H v at v = (1,1) is (2,4).
    const DifferentiableFn f =
        DifferentiableFn({"W"}, [](auto& t, const std::vector<int>& b, const Batch&) {
            Mat<double> h(2, 2);
            h.at(0, 0) = 2.0;
            h.at(1, 1) = 4.0;
            return t.scale(t.dot(b[0], t.matmul(t.constant_cast(h), b[0])), 0.5);
        });
    const ParamVector w(std::vector<double>{0.3, -1.2});
    const ParamVector v(std::vector<double>{1.0, 1.0});
    const ParamVector hv = hvp_exact(f, {{"W", &w}}, "W", v, Batch{});
    CHECK(hv[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(hv[1] == doctest::Approx(4.0).epsilon(1e-14));

    const ParamVector zero = ParamVector::zeros(2);
    const ParamVector hz = hvp_exact(f, {{"W", &w}}, "W", zero, Batch{});
    CHECK(hz.norm2() == 0.0);
}

TEST_CASE("hvp_exact: MLP agrees with finite differences of the gradient") {
    Rng rng(23);
    const ToyMlp mlp(2, 2, 2); // 12 parameters
    const Batch batch = random_batch(5, 2, 2, rng);
    const DifferentiableFn f = mlp.loss_fn();
    const ParamVector w = mlp.init(rng);
    const ParamVector v = ParamVector::randn(w.size(), rng, 1.0);
    const ParamVector hv = hvp_exact(f, {{"W", &w}}, "W", v, batch);

    const double eps = 1e-4;
    ParamVector wp = w, wm = w;
    wp.add_scaled(eps, v);
    wm.add_scaled(-eps, v);
    auto gp = value_and_grad(f, {{"W", &wp}}, batch, {"W"});
    auto gm = value_and_grad(f, {{"W", &wm}}, batch, {"W"});
    ParamVector fd = std::move(gp.grads.at("W"));
    fd.add_scaled(-1.0, gm.grads.at("W"));
    fd.scale(1.0 / (2.0 * eps));
    CHECK(rel_err(hv, fd) <= 1e-5);
}

TEST_CASE("hvp_exact: refuses objectives without a second-order path") {
    const DifferentiableFn f = DifferentiableFn(
        DifferentiableFn::first_order_only, {"T"},
        [](Tape<double>& t, const std::vector<int>& b, const Batch&) { return t.sum_all(b[0]); });
    const ParamVector theta(std::vector<double>{1.0});
    const ParamVector v(std::vector<double>{1.0});
    CHECK_THROWS_AS((void)hvp_exact(f, {{"T", &theta}}, "T", v, Batch{}), NotDifferentiableTwice);
}

TEST_CASE("autodiff: f32 mode rounds every value through binary32") {
    const DifferentiableFn f = make_halfnorm_fn();
    const ParamVector theta(std::vector<double>{0.1, 0.2, 0.3});
    const double l64 = evaluate(f, {{"T", &theta}}, Batch{}, Precision::f64);
    const double l32 = evaluate(f, {{"T", &theta}}, Batch{}, Precision::f32);
    CHECK(l32 == static_cast<double>(static_cast<float>(l32)));
    CHECK(l32 == doctest::Approx(l64).epsilon(1e-6));
    CHECK(l32 != l64);
    CHECK(evaluate(f, {{"T", &theta}}, Batch{}, Precision::f32) == l32);
}
