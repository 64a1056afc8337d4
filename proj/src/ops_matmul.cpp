// dense 2-d matrix products and column slicing
#include <algorithm>

#include "blas_support.hpp"
#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

template <class T>
Tensor gemm_impl(const Tensor& a, bool ta, const Tensor& b, bool tb, int m, int n, int k) {
    Tensor out = Tensor::empty({m, n}, a.dtype());
    gemm_rm(ta, tb, m, n, k, T(1), a.data<T>(), a.dim(1), b.data<T>(), b.dim(1), T(0),
            out.data<T>(), n);
    return out;
}

} // namespace

Tensor gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: need rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    if (a.dtype() != b.dtype()) throw ShapeError("matmul: dtype mismatch");
    const int m = trans_a ? a.dim(1) : a.dim(0);
    const int ka = trans_a ? a.dim(0) : a.dim(1);
    const int kb = trans_b ? b.dim(1) : b.dim(0);
    const int n = trans_b ? b.dim(0) : b.dim(1);
    if (ka != kb)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                         (trans_b ? "^T" : ""));
    return a.dtype() == DType::f32 ? gemm_impl<float>(a, trans_a, b, trans_b, m, n, ka)
                                   : gemm_impl<double>(a, trans_a, b, trans_b, m, n, ka);
}

Tensor matmul(const Tensor& a, const Tensor& b) { return gemm(a, false, b, false); }

namespace {

template <class T>
Tensor transpose_impl(const Tensor& a) {
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::empty({n, m}, a.dtype());
    const T* pa = a.data<T>();
    T* po = out.data<T>();
    constexpr int kBlock = 32;
    for (int i0 = 0; i0 < m; i0 += kBlock)
        for (int j0 = 0; j0 < n; j0 += kBlock) {
            const int i1 = std::min(i0 + kBlock, m);
            const int j1 = std::min(j0 + kBlock, n);
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j) po[int64_t(j) * m + i] = pa[int64_t(i) * n + j];
        }
    return out;
}

template <class T>
Tensor slice_cols_impl(const Tensor& x, int c0, int c1) {
    const int n = x.dim(0), d = x.dim(1), w = c1 - c0;
    Tensor out = Tensor::empty({n, w}, x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int r = 0; r < n; ++r)
        std::copy_n(px + int64_t(r) * d + c0, w, po + int64_t(r) * w);
    return out;
}

template <class T>
Tensor slice_cols_bwd_impl(const Shape& in_shape, int c0, const Tensor& g) {
    const int n = in_shape[0], d = in_shape[1], w = g.dim(1);
    Tensor out = Tensor::zeros(in_shape, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int r = 0; r < n; ++r)
        std::copy_n(pg + int64_t(r) * w, w, po + int64_t(r) * d + c0);
    return out;
}

template <class T>
Tensor concat_cols_impl(const std::vector<Tensor>& xs, int n, int dtot) {
    Tensor out = Tensor::empty({n, dtot}, xs[0].dtype());
    T* po = out.data<T>();
    int col = 0;
    for (const Tensor& x : xs) {
        const int d = x.dim(1);
        const T* px = x.data<T>();
        for (int r = 0; r < n; ++r)
            std::copy_n(px + int64_t(r) * d, d, po + int64_t(r) * dtot + col);
        col += d;
    }
    return out;
}

} // namespace

Tensor transpose2d(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose2d: need rank 2, got " + shape_str(a.shape()));
    return a.dtype() == DType::f32 ? transpose_impl<float>(a) : transpose_impl<double>(a);
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
    if (x.rank() != 2) throw ShapeError("slice_cols: need rank 2, got " + shape_str(x.shape()));
    if (c0 < 0 || c1 > x.dim(1) || c0 >= c1)
        throw ShapeError("slice_cols: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + shape_str(x.shape()));
    return x.dtype() == DType::f32 ? slice_cols_impl<float>(x, c0, c1)
                                   : slice_cols_impl<double>(x, c0, c1);
}

Tensor slice_cols_backward(const Shape& in_shape, int c0, const Tensor& g) {
    if (in_shape.size() != 2 || g.rank() != 2 || g.dim(0) != in_shape[0] ||
        c0 + g.dim(1) > in_shape[1])
        throw ShapeError("slice_cols_backward: inconsistent shapes");
    return g.dtype() == DType::f32 ? slice_cols_bwd_impl<float>(in_shape, c0, g)
                                   : slice_cols_bwd_impl<double>(in_shape, c0, g);
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty list");
    const int n = xs[0].dim(0);
    int dtot = 0;
    for (const Tensor& x : xs) {
        if (x.rank() != 2 || x.dim(0) != n || x.dtype() != xs[0].dtype())
            throw ShapeError("concat_cols: operands disagree, " + shape_str(xs[0].shape()) +
                             " vs " + shape_str(x.shape()));
        dtot += x.dim(1);
    }
    return xs[0].dtype() == DType::f32 ? concat_cols_impl<float>(xs, n, dtot)
                                       : concat_cols_impl<double>(xs, n, dtot);
}

} // namespace edenvfi::ops
