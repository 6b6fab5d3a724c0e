#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qscl {

// Plain dense row-major matrix of doubles. Used for datasets and augmented
// views; the autodiff Tensor is a separate type.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }

    std::vector<double> row(size_t r) const {
        return std::vector<double>(data.begin() + r * cols, data.begin() + (r + 1) * cols);
    }
    void set_row(size_t r, const std::vector<double>& v) {
        if (v.size() != cols) throw std::invalid_argument("Matrix::set_row: length mismatch");
        std::copy(v.begin(), v.end(), data.begin() + r * cols);
    }
};

}  // namespace qscl
