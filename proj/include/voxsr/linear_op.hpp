#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "voxsr/volume.hpp"

namespace voxsr {

// Sparse 1D linear map (CSR rows = output samples) applied along one axis
// of a 3D field. Blur, trilinear/nearest/cubic sampling and their
// compositions are all expressed this way, which gives exact adjoints for
// free (scatter with the same weights).
struct AxisOp {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::vector<std::size_t> row_start;  // size n_out + 1
    std::vector<std::size_t> col;
    std::vector<double> weight;

    static AxisOp identity(std::size_t n);
    // Row-normalised truncated Gaussian, half-width ceil(3 sigma).
    static AxisOp gaussian(std::size_t n, double sigma);
    // Two-tap linear interpolation at (clamped) source coordinates.
    static AxisOp linear(std::size_t n_in, std::span<const double> coords);
    static AxisOp nearest(std::size_t n_in, std::span<const double> coords);
    // Cubic B-spline evaluation of prefiltered coefficients, mirror boundary.
    static AxisOp cubic_bspline(std::size_t n_in, std::span<const double> coords);

    // this * rhs (apply rhs first).
    AxisOp compose(const AxisOp& rhs) const;

    bool is_identity() const;
};

// Separable operator: x, then y, then z factor.
struct SeparableOp {
    std::array<AxisOp, 3> axis;

    Dims3 in_dims() const { return {axis[0].n_in, axis[1].n_in, axis[2].n_in}; }
    Dims3 out_dims() const { return {axis[0].n_out, axis[1].n_out, axis[2].n_out}; }

    template <class T>
    std::vector<T> apply(std::span<const T> in) const;
    template <class T>
    std::vector<T> apply_adjoint(std::span<const T> in) const;
};

namespace detail {

inline std::size_t product(const Dims3& d) { return d[0] * d[1] * d[2]; }

template <class T>
void apply_axis(std::span<const T> in, const Dims3& dims, int axis, const AxisOp& op, std::vector<T>& out) {
    std::size_t inner = 1, outer = 1;
    for (int a = 0; a < axis; ++a) inner *= dims[a];
    for (int a = axis + 1; a < 3; ++a) outer *= dims[a];
    out.assign(inner * outer * op.n_out, T(0));
    for (std::size_t o = 0; o < outer; ++o) {
        const T* src = in.data() + o * op.n_in * inner;
        T* dst = out.data() + o * op.n_out * inner;
        for (std::size_t r = 0; r < op.n_out; ++r) {
            T* drow = dst + r * inner;
            for (std::size_t e = op.row_start[r]; e < op.row_start[r + 1]; ++e) {
                const T w = static_cast<T>(op.weight[e]);
                const T* srow = src + op.col[e] * inner;
                for (std::size_t i = 0; i < inner; ++i) drow[i] += w * srow[i];
            }
        }
    }
}

template <class T>
void apply_axis_adjoint(std::span<const T> in, const Dims3& dims_out, int axis, const AxisOp& op,
                        std::vector<T>& out) {
    // `in` lives on the op's output grid; result on its input grid.
    std::size_t inner = 1, outer = 1;
    for (int a = 0; a < axis; ++a) inner *= dims_out[a];
    for (int a = axis + 1; a < 3; ++a) outer *= dims_out[a];
    out.assign(inner * outer * op.n_in, T(0));
    for (std::size_t o = 0; o < outer; ++o) {
        const T* src = in.data() + o * op.n_out * inner;
        T* dst = out.data() + o * op.n_in * inner;
        for (std::size_t r = 0; r < op.n_out; ++r) {
            const T* srow = src + r * inner;
            for (std::size_t e = op.row_start[r]; e < op.row_start[r + 1]; ++e) {
                const T w = static_cast<T>(op.weight[e]);
                T* drow = dst + op.col[e] * inner;
                for (std::size_t i = 0; i < inner; ++i) drow[i] += w * srow[i];
            }
        }
    }
}

}  // namespace detail

template <class T>
std::vector<T> SeparableOp::apply(std::span<const T> in) const {
    Dims3 dims = in_dims();
    if (in.size() != detail::product(dims)) throw SizeError("separable op: input size mismatch");
    std::vector<T> cur(in.begin(), in.end()), next;
    for (int a = 0; a < 3; ++a) {
        if (axis[a].is_identity()) continue;
        detail::apply_axis<T>(cur, dims, a, axis[a], next);
        dims[a] = axis[a].n_out;
        cur.swap(next);
    }
    return cur;
}

template <class T>
std::vector<T> SeparableOp::apply_adjoint(std::span<const T> in) const {
    Dims3 dims = out_dims();
    if (in.size() != detail::product(dims)) throw SizeError("separable op adjoint: input size mismatch");
    std::vector<T> cur(in.begin(), in.end()), next;
    for (int a = 2; a >= 0; --a) {
        if (axis[a].is_identity()) continue;
        detail::apply_axis_adjoint<T>(cur, dims, a, axis[a], next);
        dims[a] = axis[a].n_in;
        cur.swap(next);
    }
    return cur;
}

}  // namespace voxsr
