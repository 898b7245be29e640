#include "lpt/data_bank.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lpt/rng.hpp"

namespace lpt {

namespace {

Dataset subset(const Dataset& src, const std::vector<int>& idx) {
    Dataset out;
    out.dim = src.dim;
    out.num_classes = src.num_classes;
    out.examples.reserve(idx.size());
    for (int i : idx) out.examples.push_back(src.examples[i]);
    return out;
}

} // namespace

Splits make_splits(const Dataset& source, const SplitSpec& spec) {
    if (source.empty()) throw BadArgument("make_splits: empty source dataset");
    const double fr[4] = {spec.learner_train, spec.tester_train, spec.tester_val, spec.bank};
    double sum = 0.0;
    for (double f : fr) {
        if (f <= 0.0) throw DegenerateSplit("make_splits: all split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw BadArgument("make_splits: fractions must sum to 1");

    const int n = source.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(order);

    // Boundaries from rounded cumulative fractions; the last split absorbs
    // the remainder.
    auto boundary = [n](double cum) { return static_cast<int>(std::llround(cum * n)); };
    Splits out;
    if (spec.alias_bank_val) {
        const int b1 = boundary(fr[0]);
        const int b2 = boundary(fr[0] + fr[1]);
        std::vector<int> ln(order.begin(), order.begin() + b1);
        std::vector<int> tt(order.begin() + b1, order.begin() + b2);
        std::vector<int> shared(order.begin() + b2, order.end());
        out.learner_train = subset(source, ln);
        out.tester_train = subset(source, tt);
        out.tester_val = subset(source, shared);
        out.bank = subset(source, shared);
    } else {
        const int b1 = boundary(fr[0]);
        const int b2 = boundary(fr[0] + fr[1]);
        const int b3 = boundary(fr[0] + fr[1] + fr[2]);
        std::vector<int> ln(order.begin(), order.begin() + b1);
        std::vector<int> tt(order.begin() + b1, order.begin() + b2);
        std::vector<int> tv(order.begin() + b2, order.begin() + b3);
        std::vector<int> bk(order.begin() + b3, order.end());
        out.learner_train = subset(source, ln);
        out.tester_train = subset(source, tt);
        out.tester_val = subset(source, tv);
        out.bank = subset(source, bk);
    }
    if (out.learner_train.empty() || out.tester_train.empty() || out.tester_val.empty() ||
        out.bank.empty())
        throw DegenerateSplit("make_splits: a split came out empty");
    return out;
}

Dataset synth_two_class(int n, double noise, double corrupt_frac, std::uint64_t seed) {
    if (n < 4) throw BadArgument("synth_two_class: need at least 4 examples");
    if (corrupt_frac < 0.0 || corrupt_frac > 0.5)
        throw BadArgument("synth_two_class: corrupt_frac must be in [0, 0.5]");

    Dataset d;
    d.dim = 2;
    d.num_classes = 2;
    d.examples.reserve(n);
    Rng rng(seed);
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double t = rng.uniform(0.0, pi);
        const double nx = rng.normal();
        const double ny = rng.normal();
        double x, y;
        if (label == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        d.examples.push_back(Example{i, {x + noise * nx, y + noise * ny}, label, false});
    }

    const int flips = static_cast<int>(std::floor(corrupt_frac * n));
    if (flips > 0) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng flip_rng(Rng::mix(seed, 0x636f7272)); // independent corruption stream
        flip_rng.shuffle(order);
        for (int k = 0; k < flips; ++k) {
            Example& e = d.examples[order[k]];
            e.label = 1 - e.label;
            e.corrupted = true;
        }
    }
    return d;
}

std::vector<std::vector<int>> batch_order(int n, int batch_size, std::uint64_t seed, long epoch) {
    if (batch_size < 1) throw BadArgument("batch_order: batch_size must be >= 1");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Batch make_batch(const Dataset& d, const std::vector<int>& idx) {
    Batch b;
    b.num_classes = d.num_classes;
    b.x = Mat<double>(static_cast<int>(idx.size()), d.dim);
    b.labels.reserve(idx.size());
    b.ids.reserve(idx.size());
    b.corrupted.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Example& e = d.examples[idx[r]];
        for (int j = 0; j < d.dim; ++j) b.x.at(static_cast<int>(r), j) = e.input[j];
        b.labels.push_back(e.label);
        b.ids.push_back(e.id);
        b.corrupted.push_back(e.corrupted ? 1 : 0);
    }
    ++d.read_count;
    return b;
}

Batch full_batch(const Dataset& d) {
    std::vector<int> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    return make_batch(d, idx);
}

void write_lptd(const std::string& path, const Dataset& d) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_lptd: cannot open " + path);
    f.write("LPTD", 4);
    auto put_u32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(static_cast<std::uint32_t>(d.size()));
    put_u32(static_cast<std::uint32_t>(d.dim));
    put_u32(static_cast<std::uint32_t>(d.num_classes));
    for (const Example& e : d.examples) {
        put_u32(static_cast<std::uint32_t>(e.label));
        for (double v : e.input) {
            const float x = static_cast<float>(v);
            f.write(reinterpret_cast<const char*>(&x), 4);
        }
    }
    if (!f) throw IoError("write_lptd: write failed for " + path);
}

Dataset read_lptd(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_lptd: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "LPTD", 4) != 0)
        throw IoError("read_lptd: bad magic in " + path);
    auto get_u32 = [&f, &path]() {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        if (!f) throw IoError("read_lptd: truncated file " + path);
        return v;
    };
    const std::uint32_t n = get_u32();
    const std::uint32_t dim = get_u32();
    const std::uint32_t classes = get_u32();
    if (dim == 0 || classes < 2) throw IoError("read_lptd: invalid header in " + path);
    Dataset d;
    d.dim = static_cast<int>(dim);
    d.num_classes = static_cast<int>(classes);
    d.examples.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Example e;
        e.id = static_cast<int>(i);
        e.label = static_cast<int>(get_u32());
        if (e.label >= static_cast<int>(classes))
            throw IoError("read_lptd: label out of range in " + path);
        e.input.resize(dim);
        for (std::uint32_t j = 0; j < dim; ++j) {
            float x = 0.0f;
            f.read(reinterpret_cast<char*>(&x), 4);
            if (!f) throw IoError("read_lptd: truncated record in " + path);
            e.input[j] = static_cast<double>(x);
        }
        d.examples.push_back(std::move(e));
    }
    return d;
}

void write_split_csv(const std::string& path, const Splits& s) {
    std::ofstream f(path);
    if (!f) throw IoError("write_split_csv: cannot open " + path);
    f << "id,split,corrupted\n";
    auto dump = [&f](const Dataset& d, const char* name) {
        for (const Example& e : d.examples)
            f << e.id << ',' << name << ',' << (e.corrupted ? 1 : 0) << '\n';
    };
    dump(s.learner_train, "learner_train");
    dump(s.tester_train, "tester_train");
    dump(s.tester_val, "tester_val");
    dump(s.bank, "bank");
}

} // namespace lpt
