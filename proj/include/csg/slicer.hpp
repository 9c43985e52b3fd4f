#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "csg/errors.hpp"
#include "csg/tensor.hpp"

namespace csg {

/// Fixed shape shared by every slice of a filter set.
struct SliceShape {
    std::array<std::int64_t, 4> dims;

    std::int64_t volume() const { return dims[0] * dims[1] * dims[2] * dims[3]; }
    Shape4 as_shape() const { return {dims[0], dims[1], dims[2], dims[3]}; }
    bool operator==(const SliceShape&) const = default;
};

/// Partition metadata: how a filter set tiles into fixed-shape slices.
///
/// counts[a] = ceil(filter_shape[a] / slice_shape[a]). Slices are enumerated
/// row-major over block indices, axis 1 outermost and axis 4 innermost.
/// Trailing blocks along an axis may be fractional; extents[i][a] is the
/// valid sub-block size of slice i along axis a (the remainder for trailing
/// blocks, the full slice dimension otherwise).
struct SliceGrid {
    Shape4 filter_shape;
    SliceShape slice_shape;
    std::array<std::int64_t, 4> counts;
    std::vector<std::array<std::int64_t, 4>> extents;

    std::int64_t slice_count() const {
        return counts[0] * counts[1] * counts[2] * counts[3];
    }

    /// Block index of slice i along each axis, inverse of the enumeration order.
    std::array<std::int64_t, 4> block_of(std::int64_t i) const {
        std::array<std::int64_t, 4> b;
        b[3] = i % counts[3];
        i /= counts[3];
        b[2] = i % counts[2];
        i /= counts[2];
        b[1] = i % counts[1];
        b[0] = i / counts[1];
        return b;
    }

    /// Offset of slice i's block in the filter tensor along each axis.
    std::array<std::int64_t, 4> origin_of(std::int64_t i) const {
        const auto b = block_of(i);
        return {b[0] * slice_shape.dims[0], b[1] * slice_shape.dims[1],
                b[2] * slice_shape.dims[2], b[3] * slice_shape.dims[3]};
    }
};

inline SliceGrid make_grid(const Shape4& filter_shape, const SliceShape& slice_shape) {
    for (int a = 0; a < 4; ++a) {
        if (filter_shape[a] <= 0) {
            throw value_error("make_grid: non-positive filter dimension in " +
                              shape_to_string(filter_shape));
        }
        if (slice_shape.dims[a] <= 0) {
            throw value_error("make_grid: non-positive slice dimension");
        }
    }
    SliceGrid g;
    g.filter_shape = filter_shape;
    g.slice_shape = slice_shape;
    for (int a = 0; a < 4; ++a) {
        g.counts[a] = (filter_shape[a] + slice_shape.dims[a] - 1) / slice_shape.dims[a];
    }
    const std::int64_t n = g.slice_count();
    g.extents.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto origin = g.origin_of(i);
        for (int a = 0; a < 4; ++a) {
            g.extents[static_cast<std::size_t>(i)][a] =
                std::min(slice_shape.dims[a], filter_shape[a] - origin[a]);
        }
    }
    return g;
}

/// Cut a filter set into slices. Every slice is materialized at the full
/// slice shape; positions beyond a fractional slice's extent are zero.
inline std::pair<SliceGrid, std::vector<Tensor4>> partition(const Tensor4& filters,
                                                            const SliceShape& slice_shape) {
    SliceGrid grid = make_grid(filters.shape(), slice_shape);
    std::vector<Tensor4> slices;
    const std::int64_t n = grid.slice_count();
    slices.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto origin = grid.origin_of(i);
        const auto& ext = grid.extents[static_cast<std::size_t>(i)];
        Tensor4 s(slice_shape.as_shape());
        for (std::int64_t a = 0; a < ext[0]; ++a)
            for (std::int64_t b = 0; b < ext[1]; ++b)
                for (std::int64_t c = 0; c < ext[2]; ++c)
                    for (std::int64_t d = 0; d < ext[3]; ++d)
                        s(a, b, c, d) =
                            filters(origin[0] + a, origin[1] + b, origin[2] + c, origin[3] + d);
        slices.push_back(std::move(s));
    }
    return {std::move(grid), std::move(slices)};
}

/// Rebuild the filter set from slices. Only the valid extent of each slice
/// contributes; entries beyond the extent are ignored.
inline Tensor4 reassemble(const SliceGrid& grid, const std::vector<Tensor4>& slices) {
    const std::int64_t n = grid.slice_count();
    if (static_cast<std::int64_t>(slices.size()) != n) {
        throw shape_error("reassemble: expected " + std::to_string(n) + " slices, got " +
                          std::to_string(slices.size()));
    }
    const Shape4 want = grid.slice_shape.as_shape();
    Tensor4 filters(grid.filter_shape);
    for (std::int64_t i = 0; i < n; ++i) {
        const Tensor4& s = slices[static_cast<std::size_t>(i)];
        if (s.shape() != want) {
            throw shape_error("reassemble: slice " + std::to_string(i) + " has shape " +
                              shape_to_string(s.shape()) + ", grid expects " +
                              shape_to_string(want));
        }
        const auto origin = grid.origin_of(i);
        const auto& ext = grid.extents[static_cast<std::size_t>(i)];
        for (std::int64_t a = 0; a < ext[0]; ++a)
            for (std::int64_t b = 0; b < ext[1]; ++b)
                for (std::int64_t c = 0; c < ext[2]; ++c)
                    for (std::int64_t d = 0; d < ext[3]; ++d)
                        filters(origin[0] + a, origin[1] + b, origin[2] + c, origin[3] + d) =
                            s(a, b, c, d);
    }
    return filters;
}

}  // namespace csg
