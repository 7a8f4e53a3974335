#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vcs {

// Row-major dense matrix of doubles. Every heavy numeric
// path in this project runs in double precision for deterministic, testable
// arithmetic.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
    double operator()(size_t i, size_t j) const { return data[i * cols + j]; }

    std::span<double> row(size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(size_t i) const { return {data.data() + i * cols, cols}; }
};

}  // namespace vcs
