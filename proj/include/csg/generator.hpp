#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "csg/errors.hpp"
#include "csg/rng.hpp"
#include "csg/slicer.hpp"
#include "csg/tensor.hpp"
#include "csg/tensor_io.hpp"

namespace csg {

/// Latent representation of one slice; the trained parameter that replaces it.
struct CodeVector {
    std::vector<double> values;

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

/// The slice generator: one strictly linear map, shared by every slice of
/// every layer of a network. Rows of the weight matrix index slice elements
/// in vec() order, columns index code coordinates. There is no bias term.
struct CsgMatrix {
    Matrix weights;
    SliceShape slice_shape;

    std::int64_t rows() const { return weights.rows(); }
    std::int64_t code_size() const { return weights.cols(); }
    std::int64_t parameter_count() const { return weights.rows() * weights.cols(); }
};

/// Fresh generator with entries i.i.d. uniform on (-b, b), b = sqrt(6 / (rows + n_c)).
/// Deterministic for a given seed.
inline CsgMatrix init_csg(const SliceShape& slice_shape, std::int64_t n_c, std::uint64_t seed) {
    if (n_c < 1) throw value_error("init_csg: code size must be >= 1");
    const std::int64_t rows = slice_shape.volume();
    if (rows < 1) throw value_error("init_csg: slice shape must have positive volume");
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + n_c));
    Rng rng(seed);
    Matrix a(rows, n_c);
    for (double& v : a.data()) v = rng.uniform(-bound, bound);
    return CsgMatrix{std::move(a), slice_shape};
}

/// Code bank for training from scratch: entries i.i.d. normal with standard
/// deviation 1/sqrt(n_c), which keeps generated slices at unit scale under
/// the init_csg weight distribution.
inline std::vector<CodeVector> init_code_bank(std::int64_t n_c, std::int64_t count,
                                              std::uint64_t seed) {
    if (n_c < 1) throw value_error("init_code_bank: code size must be >= 1");
    if (count < 1) throw value_error("init_code_bank: count must be >= 1");
    Rng rng(seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(n_c));
    std::vector<CodeVector> bank(static_cast<std::size_t>(count));
    for (auto& code : bank) {
        code.values.resize(static_cast<std::size_t>(n_c));
        for (double& v : code.values) v = rng.normal(0.0, sd);
    }
    return bank;
}

/// vec(slice) = A c, devectorized to the generator's slice shape.
inline Tensor4 generate_slice(const CsgMatrix& g, const CodeVector& c) {
    if (c.size() != g.code_size()) {
        throw shape_error("generate_slice: code length " + std::to_string(c.size()) +
                          " does not match generator code size " + std::to_string(g.code_size()));
    }
    return devectorize(matvec(g.weights, c.values), g.slice_shape.as_shape());
}

/// Generate every slice of a grid and reassemble the filter set.
inline Tensor4 generate_filterset(const CsgMatrix& g, const std::vector<CodeVector>& codes,
                                  const SliceGrid& grid) {
    if (!(g.slice_shape == grid.slice_shape)) {
        throw shape_error("generate_filterset: generator and grid disagree on slice shape");
    }
    if (static_cast<std::int64_t>(codes.size()) != grid.slice_count()) {
        throw shape_error("generate_filterset: grid has " + std::to_string(grid.slice_count()) +
                          " slices, got " + std::to_string(codes.size()) + " codes");
    }
    std::vector<Tensor4> slices;
    slices.reserve(codes.size());
    for (const CodeVector& c : codes) slices.push_back(generate_slice(g, c));
    return reassemble(grid, slices);
}

struct CsgGradients {
    Matrix grad_weights;        // vec(upstream) c^T
    std::vector<double> grad_code;  // A^T vec(upstream)
};

/// Exact gradients of the linear map for one slice. Contributions to the
/// shared weight gradient sum across slices; the caller owns the accumulator.
inline CsgGradients csg_backward(const CsgMatrix& g, const CodeVector& c,
                                 const Tensor4& upstream) {
    if (c.size() != g.code_size()) {
        throw shape_error("csg_backward: code length does not match generator");
    }
    if (upstream.shape() != g.slice_shape.as_shape()) {
        throw shape_error("csg_backward: upstream shape " + shape_to_string(upstream.shape()) +
                          " does not match slice shape " +
                          shape_to_string(g.slice_shape.as_shape()));
    }
    const std::vector<double>& u = upstream.data();
    CsgGradients out;
    out.grad_code = matvec_transposed(g.weights, u);
    out.grad_weights = Matrix(g.rows(), g.code_size());
    for (std::int64_t r = 0; r < g.rows(); ++r) {
        const double ur = u[static_cast<std::size_t>(r)];
        for (std::int64_t k = 0; k < g.code_size(); ++k) {
            out.grad_weights(r, k) = ur * c.values[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

namespace lsq_detail {

/// In-place Cholesky of a symmetric positive definite matrix. Returns the
/// failing pivot index, or -1 on success. `m` holds L in its lower triangle.
inline std::int64_t cholesky(Matrix& m, double pivot_floor) {
    const std::int64_t n = m.rows();
    for (std::int64_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::int64_t k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
        if (!(d > pivot_floor)) return j;
        const double ljj = std::sqrt(d);
        m(j, j) = ljj;
        for (std::int64_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::int64_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
            m(i, j) = s / ljj;
        }
    }
    return -1;
}

/// Solve L L^T x = b given the Cholesky factor in the lower triangle.
inline std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
    const std::int64_t n = l.rows();
    for (std::int64_t i = 0; i < n; ++i) {
        double s = b[static_cast<std::size_t>(i)];
        for (std::int64_t k = 0; k < i; ++k) s -= l(i, k) * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / l(i, i);
    }
    for (std::int64_t i = n - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (std::int64_t k = i + 1; k < n; ++k) s -= l(k, i) * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / l(i, i);
    }
    return b;
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double max_eigenvalue(const Matrix& m) {
    const std::int64_t n = m.rows();
    std::vector<double> v(static_cast<std::size_t>(n), 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 64; ++it) {
        std::vector<double> w = matvec(m, v);
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : w) x /= norm;
        lambda = norm;
        v = std::move(w);
    }
    return lambda;
}

}  // namespace lsq_detail

/// Least-squares code for an existing slice: argmin_c ||A c - vec(slice)||_2,
/// solved through the normal equations. Generating from the returned code
/// gives the orthogonal projection of the slice onto the generator's column
/// space. Throws numeric_error when A is numerically rank-deficient.
inline CodeVector encode_slice(const CsgMatrix& g, const Tensor4& slice) {
    if (slice.shape() != g.slice_shape.as_shape()) {
        throw shape_error("encode_slice: slice shape " + shape_to_string(slice.shape()) +
                          " does not match generator slice shape " +
                          shape_to_string(g.slice_shape.as_shape()));
    }
    const std::int64_t n = g.code_size();
    const Matrix& a = g.weights;

    Matrix gram(n, n);
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const double* row = a.data().data() + r * n;
        for (std::int64_t i = 0; i < n; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::int64_t j = i; j < n; ++j) gram(i, j) += ri * row[j];
        }
    }
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);

    const double lambda_max = lsq_detail::max_eigenvalue(gram);
    const double pivot_floor = lambda_max * 1e-12;
    Matrix factor = gram;
    const std::int64_t bad = lsq_detail::cholesky(factor, pivot_floor);
    if (bad >= 0) {
        double pivot = gram(bad, bad);
        for (std::int64_t k = 0; k < bad; ++k) pivot -= factor(bad, k) * factor(bad, k);
        const double cond = (pivot > 0.0) ? lambda_max / pivot
                                          : std::numeric_limits<double>::infinity();
        throw numeric_error(
            "encode_slice: generator is numerically rank-deficient (normal-equations "
            "condition estimate " +
            std::to_string(cond) + " at column " + std::to_string(bad) + ")");
    }

    CodeVector c;
    c.values = lsq_detail::cholesky_solve(factor, matvec_transposed(a, slice.data()));
    return c;
}

/// Weight file adapter: the generator matrix stored as a rank-4 tensor
/// shaped (rows, n_c, 1, 1).
inline void write_csg_file(const std::string& path, const CsgMatrix& g,
                           Dtype dtype = Dtype::f64) {
    Tensor4 t({g.rows(), g.code_size(), 1, 1}, g.weights.data());
    write_tensor_file(path, t, dtype);
}

/// Load a generator from its weight file. The slice shape is not stored in
/// the container and must be supplied by the caller; its volume has to match
/// the row count.
inline CsgMatrix read_csg_file(const std::string& path, const SliceShape& slice_shape) {
    Tensor4 t = read_tensor_file(path);
    if (t.shape()[2] != 1 || t.shape()[3] != 1) {
        throw io_error(path + ": generator weights must be shaped (rows, n_c, 1, 1)");
    }
    if (t.shape()[0] != slice_shape.volume()) {
        throw shape_error(path + ": weight rows " + std::to_string(t.shape()[0]) +
                          " do not match slice shape volume " +
                          std::to_string(slice_shape.volume()));
    }
    return CsgMatrix{Matrix(t.shape()[0], t.shape()[1], t.data()), slice_shape};
}

/// Code banks travel as rank-5 stacks of (n_c, 1, 1, 1) tensors.
inline void write_code_bank_file(const std::string& path, const std::vector<CodeVector>& codes,
                                 Dtype dtype = Dtype::f64) {
    if (codes.empty()) throw value_error(path + ": refusing to write an empty code bank");
    std::vector<Tensor4> stack;
    stack.reserve(codes.size());
    for (const CodeVector& c : codes) {
        stack.emplace_back(Shape4{c.size(), 1, 1, 1}, c.values);
    }
    write_corpus_file(path, stack, dtype);
}

inline std::vector<CodeVector> read_code_bank_file(const std::string& path) {
    std::vector<Tensor4> stack = read_corpus_file(path);
    std::vector<CodeVector> codes;
    codes.reserve(stack.size());
    for (Tensor4& t : stack) {
        if (t.shape()[1] != 1 || t.shape()[2] != 1 || t.shape()[3] != 1) {
            throw io_error(path + ": code bank entries must be shaped (n_c, 1, 1, 1)");
        }
        codes.push_back(CodeVector{std::move(t.data())});
    }
    return codes;
}

}  // namespace csg
