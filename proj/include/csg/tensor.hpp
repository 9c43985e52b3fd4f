#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csg/errors.hpp"

namespace csg {

using Shape4 = std::array<std::int64_t, 4>;

inline std::string shape_to_string(const Shape4& s) {
    return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," +
           std::to_string(s[2]) + "," + std::to_string(s[3]) + ")";
}

inline std::int64_t shape_volume(const Shape4& s) {
    return s[0] * s[1] * s[2] * s[3];
}

/// Dense rank-4 tensor, row-major with the last index fastest. Carrier for
/// filter sets, slices, spectra, and image batches.
class Tensor4 {
public:
    Tensor4() : shape_{0, 0, 0, 0} {}

    /// Zero-filled tensor of the given shape.
    explicit Tensor4(const Shape4& shape) : shape_(shape) {
        check_shape(shape);
        data_.assign(static_cast<std::size_t>(shape_volume(shape)), 0.0);
    }

    Tensor4(const Shape4& shape, std::vector<double> data)
        : shape_(shape), data_(std::move(data)) {
        check_shape(shape);
        if (static_cast<std::int64_t>(data_.size()) != shape_volume(shape)) {
            throw shape_error("Tensor4: data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_to_string(shape));
        }
        for (double v : data_) {
            if (!std::isfinite(v)) {
                throw value_error("Tensor4: non-finite value on construction");
            }
        }
    }

    const Shape4& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
        return data_[index(i, j, k, l)];
    }
    double operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return data_[index(i, j, k, l)];
    }

    std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return static_cast<std::size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l);
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor4& other) const { return shape_ == other.shape_; }

private:
    static void check_shape(const Shape4& s) {
        for (auto d : s) {
            if (d <= 0) {
                throw value_error("Tensor4: non-positive dimension in " + shape_to_string(s));
            }
        }
    }

    Shape4 shape_;
    std::vector<double> data_;
};

/// Row-major dense matrix; carrier for the generator weights and code stacks.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}

    Matrix(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {
        check_dims(rows, cols);
        data_.assign(static_cast<std::size_t>(rows * cols), 0.0);
    }

    Matrix(std::int64_t rows, std::int64_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        check_dims(rows, cols);
        if (static_cast<std::int64_t>(data_.size()) != rows * cols) {
            throw shape_error("Matrix: data length does not match " + std::to_string(rows) +
                              "x" + std::to_string(cols));
        }
        for (double v : data_) {
            if (!std::isfinite(v)) {
                throw value_error("Matrix: non-finite value on construction");
            }
        }
    }

    std::int64_t rows() const { return rows_; }
    std::int64_t cols() const { return cols_; }

    double& operator()(std::int64_t r, std::int64_t c) {
        return data_[static_cast<std::size_t>(r * cols_ + c)];
    }
    double operator()(std::int64_t r, std::int64_t c) const {
        return data_[static_cast<std::size_t>(r * cols_ + c)];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    static void check_dims(std::int64_t rows, std::int64_t cols) {
        if (rows <= 0 || cols <= 0) {
            throw value_error("Matrix: non-positive dimension " + std::to_string(rows) + "x" +
                              std::to_string(cols));
        }
    }

    std::int64_t rows_, cols_;
    std::vector<double> data_;
};

/// Row-major flattening, last index fastest. The single vec() convention
/// shared by every module.
inline std::vector<double> vectorize(const Tensor4& t) { return t.data(); }

/// Inverse of vectorize for a given shape.
inline Tensor4 devectorize(std::vector<double> values, const Shape4& shape) {
    return Tensor4(shape, std::move(values));
}

/// Standard matrix-vector product.
inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    if (a.cols() != static_cast<std::int64_t>(x.size())) {
        throw shape_error("matvec: matrix has " + std::to_string(a.cols()) +
                          " columns, vector has length " + std::to_string(x.size()));
    }
    std::vector<double> y(static_cast<std::size_t>(a.rows()), 0.0);
    const double* ad = a.data().data();
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const double* row = ad + r * a.cols();
        double sum = 0.0;
        for (std::int64_t c = 0; c < a.cols(); ++c) {
            sum += row[c] * x[static_cast<std::size_t>(c)];
        }
        y[static_cast<std::size_t>(r)] = sum;
    }
    return y;
}

/// y = A^T x.
inline std::vector<double> matvec_transposed(const Matrix& a, const std::vector<double>& x) {
    if (a.rows() != static_cast<std::int64_t>(x.size())) {
        throw shape_error("matvec_transposed: matrix has " + std::to_string(a.rows()) +
                          " rows, vector has length " + std::to_string(x.size()));
    }
    std::vector<double> y(static_cast<std::size_t>(a.cols()), 0.0);
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const double xr = x[static_cast<std::size_t>(r)];
        for (std::int64_t c = 0; c < a.cols(); ++c) {
            y[static_cast<std::size_t>(c)] += a(r, c) * xr;
        }
    }
    return y;
}

}  // namespace csg
