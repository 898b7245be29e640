#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "lpt/data_bank.hpp"
#include "lpt/optim.hpp"
#include "test_helpers.hpp"

using namespace lpt;
using namespace lpt::testing;

namespace {

Dataset toy_dataset(int n) {
    Dataset d;
    d.dim = 1;
    d.num_classes = 2;
    for (int i = 0; i < n; ++i) d.examples.push_back(Example{i, {double(i)}, i % 2, false});
    return d;
}

std::set<int> ids_of(const Dataset& d) {
    std::set<int> s;
    for (const auto& e : d.examples) s.insert(e.id);
    return s;
}

} // namespace

TEST_CASE("make_splits: documented sizes and reference membership") {
    const Dataset src = toy_dataset(100);
    SplitSpec spec;
    spec.learner_train = 0.5;
    spec.tester_train = 0.25;
    spec.tester_val = 0.125;
    spec.bank = 0.125;
    spec.seed = 7;
    const Splits s = make_splits(src, spec);
    CHECK(s.learner_train.size() == 50);
    CHECK(s.tester_train.size() == 25);
    CHECK(s.tester_val.size() == 13);
    CHECK(s.bank.size() == 12);

    // Independent recomputation of the shuffle and boundary arithmetic.
    std::vector<int> order(100);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(7);
    rng.shuffle(order);
    for (int i = 0; i < 50; ++i) CHECK(s.learner_train.examples[i].id == order[i]);
    for (int i = 0; i < 25; ++i) CHECK(s.tester_train.examples[i].id == order[50 + i]);
    for (int i = 0; i < 13; ++i) CHECK(s.tester_val.examples[i].id == order[75 + i]);
    for (int i = 0; i < 12; ++i) CHECK(s.bank.examples[i].id == order[88 + i]);
}

TEST_CASE("make_splits: zero fractions degenerate") {
    const Dataset src = toy_dataset(100);
    SplitSpec spec;
    spec.learner_train = 0.5;
    spec.tester_train = 0.5;
    spec.tester_val = 0.0;
    spec.bank = 0.0;
    CHECK_THROWS_AS((void)make_splits(src, spec), DegenerateSplit);
}

TEST_CASE("make_splits: same seed twice gives identical membership") {
    const Dataset src = toy_dataset(64);
    SplitSpec spec;
    spec.seed = 42;
    const Splits a = make_splits(src, spec);
    const Splits b = make_splits(src, spec);
    CHECK(ids_of(a.learner_train) == ids_of(b.learner_train));
    CHECK(ids_of(a.bank) == ids_of(b.bank));
}

TEST_CASE("make_splits: disjoint and exhaustive") {
    const Dataset src = toy_dataset(97);
    SplitSpec spec;
    spec.learner_train = 0.4;
    spec.tester_train = 0.3;
    spec.tester_val = 0.2;
    spec.bank = 0.1;
    spec.seed = 3;
    const Splits s = make_splits(src, spec);
    std::set<int> all;
    std::size_t total = 0;
    for (const Dataset* d : {&s.learner_train, &s.tester_train, &s.tester_val, &s.bank}) {
        for (int id : ids_of(*d)) all.insert(id);
        total += d->examples.size();
    }
    CHECK(total == 97);       // exhaustive
    CHECK(all.size() == 97);  // pairwise disjoint
}

TEST_CASE("make_splits: alias mode returns one subset as both bank and val") {
    const Dataset src = toy_dataset(80);
    SplitSpec spec;
    spec.alias_bank_val = true;
    spec.seed = 9;
    const Splits s = make_splits(src, spec);
    CHECK(ids_of(s.bank) == ids_of(s.tester_val));
    CHECK(s.bank.size() == 20); // 0.125 + 0.125 of 80
}

TEST_CASE("synth_two_class: corruption counts") {
    const Dataset clean = synth_two_class(200, 0.1, 0.0, 5);
    for (const auto& e : clean.examples) CHECK_FALSE(e.corrupted);

    const Dataset noisy = synth_two_class(1000, 0.1, 0.1, 5);
    int flipped = 0;
    for (const auto& e : noisy.examples) flipped += e.corrupted ? 1 : 0;
    CHECK(flipped == 100);

    CHECK_THROWS_AS((void)synth_two_class(3, 0.1, 0.0, 1), BadArgument);
    CHECK_THROWS_AS((void)synth_two_class(100, 0.1, 0.6, 1), BadArgument);
}

TEST_CASE("synth_two_class: noiseless task is separable by a small MLP") {
    const Dataset d = synth_two_class(64, 0.0, 0.0, 3);
    const ToyMlp mlp(2, 8, 2);
    Rng rng(1);
    ParamVector w = mlp.init(rng);
    const DifferentiableFn loss = mlp.loss_fn();
    SgdMomentum opt(w.size(), 0.9, 0.0, CosineSchedule{0.2, 0.0, 200});
    const Batch full = full_batch(d);
    for (int step = 0; step < 200; ++step) {
        auto r = value_and_grad(loss, {{"W", &w}}, full, {"W"});
        opt.step(w, r.grads.at("W"));
    }

    Tape<double> t;
    const int w_id = t.constant(detail::column_from<double>(w));
    const int x = t.constant_cast(full.x);
    const int h = t.tanh_(t.add_rowvec(t.matmul(x, mlp.layout.view(t, w_id, "w1")),
                                       mlp.layout.view(t, w_id, "b1")));
    const int logits = t.add_rowvec(t.matmul(h, mlp.layout.view(t, w_id, "w2")),
                                    mlp.layout.view(t, w_id, "b2"));
    const Mat<double>& z = t.val(logits);
    int correct = 0;
    for (int i = 0; i < z.rows; ++i) {
        const int pred = z.at(i, 0) >= z.at(i, 1) ? 0 : 1;
        if (pred == full.labels[i]) ++correct;
    }
    CHECK(static_cast<double>(correct) / z.rows >= 0.99);
}

TEST_CASE("batch_order: sizes, determinism, epoch reshuffle") {
    const auto batches = batch_order(10, 4, 1, 0);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);

    CHECK(batch_order(10, 4, 1, 0) == batches);

    int differing = 0;
    for (int epoch = 1; epoch <= 100; ++epoch)
        if (batch_order(10, 4, 1, epoch) != batches) ++differing;
    CHECK(differing >= 95);

    CHECK_THROWS_AS((void)batch_order(10, 0, 1, 0), BadArgument);
}

TEST_CASE("batches draw only from their source split") {
    const Dataset src = toy_dataset(40);
    SplitSpec spec;
    spec.seed = 11;
    const Splits s = make_splits(src, spec);
    const std::set<int> bank_ids = ids_of(s.bank);
    for (const auto& idx : batch_order(s.bank.size(), 3, 2, 0)) {
        const Batch b = make_batch(s.bank, idx);
        for (int id : b.ids) CHECK(bank_ids.count(id) == 1);
    }
}

TEST_CASE("lptd round trip") {
    Dataset d = synth_two_class(20, 0.05, 0.0, 13);
    const std::string path = std::string(LPT_TEST_TMP) + "/roundtrip.lptd";
    std::filesystem::create_directories(LPT_TEST_TMP);
    write_lptd(path, d);
    const Dataset back = read_lptd(path);
    REQUIRE(back.size() == d.size());
    CHECK(back.dim == d.dim);
    CHECK(back.num_classes == d.num_classes);
    for (int i = 0; i < d.size(); ++i) {
        CHECK(back.examples[i].label == d.examples[i].label);
        for (int j = 0; j < d.dim; ++j)
            CHECK(back.examples[i].input[j] ==
                  doctest::Approx(d.examples[i].input[j]).epsilon(1e-6));
    }
    CHECK_THROWS_AS((void)read_lptd(std::string(LPT_TEST_TMP) + "/missing.lptd"), IoError);
}

TEST_CASE("split csv export") {
    const Dataset src = toy_dataset(16);
    SplitSpec spec;
    spec.seed = 4;
    const Splits s = make_splits(src, spec);
    const std::string path = std::string(LPT_TEST_TMP) + "/splits.csv";
    std::filesystem::create_directories(LPT_TEST_TMP);
    write_split_csv(path, s);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "id,split,corrupted");
    int rows = 0;
    for (std::string line; std::getline(f, line);) ++rows;
    CHECK(rows == 16);
}
