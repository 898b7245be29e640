#pragma once

#include <cstddef>
#include <vector>

namespace lpt {

// Dense row-major matrix of tape scalars. 1x1 matrices double as scalars,
// nx1 as column vectors.
template <class S>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<S> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, S{}) {}

    S& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const S& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    int size() const { return rows * cols; }
    bool empty() const { return a.empty(); }
};

template <class S>
Mat<S> zeros_like(const Mat<S>& m) {
    return Mat<S>(m.rows, m.cols);
}

} // namespace lpt
