// conv2d via strip-mined im2col + GEMM, and the depthwise 3x3 used in PVT MLPs
#include <algorithm>
#include <cstring>

#include "blas_support.hpp"
#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

// tiled reflect with the border excluded (period 2n-2), valid for any index
int fold101(int idx, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    int m = idx % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

int out_extent(int in, int pad, int k, int stride) {
    return (in + 2 * pad - k) / stride + 1;
}

// strip rows chosen so the column buffer stays near 16 MB
int strip_rows(int64_t k, int wo, int ho, size_t elem) {
    const int64_t target = 16ll << 20;
    int rows = static_cast<int>(target / std::max<int64_t>(1, k * wo * int64_t(elem)));
    return std::clamp(rows, 1, ho);
}

// col[kr][r*Wo + ox] = x[ci][oy*s - p + ui][ox*s - p + vi], K = Cin*kh*kw rows
template <class T>
void gather_strip(const T* x, int cin, int h, int w, int kh, int kw, int stride, int pad,
                  PadMode mode, int wo, int oy0, int rows, T* col) {
    const int64_t n = int64_t(rows) * wo;
    for (int ci = 0; ci < cin; ++ci)
        for (int ui = 0; ui < kh; ++ui)
            for (int vi = 0; vi < kw; ++vi) {
                T* krow = col + (int64_t(ci) * kh * kw + ui * kw + vi) * n;
                const int lo = std::max(0, ceil_div(pad - vi, stride));
                const int hi = std::min(wo - 1, floor_div(w - 1 + pad - vi, stride));
                for (int r = 0; r < rows; ++r) {
                    T* dst = krow + int64_t(r) * wo;
                    int iy = (oy0 + r) * stride - pad + ui;
                    if (iy < 0 || iy >= h) {
                        if (mode == PadMode::zeros) {
                            std::fill_n(dst, wo, T(0));
                            continue;
                        }
                        iy = fold101(iy, h);
                    }
                    const T* src = x + (int64_t(ci) * h + iy) * w;
                    if (mode == PadMode::zeros) {
                        for (int ox = 0; ox < lo; ++ox) dst[ox] = T(0);
                        for (int ox = hi + 1; ox < wo; ++ox) dst[ox] = T(0);
                    } else {
                        for (int ox = 0; ox < lo; ++ox)
                            dst[ox] = src[fold101(ox * stride - pad + vi, w)];
                        for (int ox = hi + 1; ox < wo; ++ox)
                            dst[ox] = src[fold101(ox * stride - pad + vi, w)];
                    }
                    if (lo > hi) continue;
                    if (stride == 1) {
                        std::memcpy(dst + lo, src + lo - pad + vi,
                                    size_t(hi - lo + 1) * sizeof(T));
                    } else {
                        int ix = lo * stride - pad + vi;
                        for (int ox = lo; ox <= hi; ++ox, ix += stride) dst[ox] = src[ix];
                    }
                }
            }
}

// scatter-add transpose of gather_strip: gx[ci][iy][ix] += col[kr][pixel]
template <class T>
void scatter_strip(T* gx, int cin, int h, int w, int kh, int kw, int stride, int pad,
                   PadMode mode, int wo, int oy0, int rows, const T* col) {
    const int64_t n = int64_t(rows) * wo;
    for (int ci = 0; ci < cin; ++ci)
        for (int ui = 0; ui < kh; ++ui)
            for (int vi = 0; vi < kw; ++vi) {
                const T* krow = col + (int64_t(ci) * kh * kw + ui * kw + vi) * n;
                for (int r = 0; r < rows; ++r) {
                    const T* src = krow + int64_t(r) * wo;
                    int iy = (oy0 + r) * stride - pad + ui;
                    if (iy < 0 || iy >= h) {
                        if (mode == PadMode::zeros) continue;
                        iy = fold101(iy, h);
                    }
                    T* dst = gx + (int64_t(ci) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride - pad + vi;
                        if (ix < 0 || ix >= w) {
                            if (mode == PadMode::zeros) continue;
                            ix = fold101(ix, w);
                        }
                        dst[ix] += src[ox];
                    }
                }
            }
}

template <class T>
Tensor conv2d_impl(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec,
                   int ho, int wo) {
    const int cin = x.dim(0), h = x.dim(1), wid = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t k = int64_t(cin) * kh * kw;
    Tensor out = Tensor::empty({cout, ho, wo}, x.dtype());
    const int rows = strip_rows(k, wo, ho, sizeof(T));
    Tensor col = Tensor::empty({int(k), rows * wo}, x.dtype());
    for (int oy0 = 0; oy0 < ho; oy0 += rows) {
        const int cur = std::min(rows, ho - oy0);
        const int64_t n = int64_t(cur) * wo;
        gather_strip<T>(x.data<T>(), cin, h, wid, kh, kw, spec.stride, spec.padding,
                        spec.pad_mode, wo, oy0, cur, col.data<T>());
        gemm_rm(false, false, cout, int(n), int(k), T(1), w.data<T>(), int(k), col.data<T>(),
                int(n), T(0), out.data<T>() + int64_t(oy0) * wo, ho * wo);
    }
    if (b.defined()) {
        const T* pb = b.data<T>();
        T* po = out.data<T>();
        const int64_t plane = int64_t(ho) * wo;
        for (int co = 0; co < cout; ++co) {
            const T bv = pb[co];
            T* dst = po + co * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] += bv;
        }
    }
    return out;
}

template <class T>
Conv2dGrads conv2d_bwd_impl(const Tensor& x, const Tensor& w, const Tensor& g,
                            const Conv2dSpec& spec, bool need_gx, bool need_gw) {
    const int cin = x.dim(0), h = x.dim(1), wid = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ho = g.dim(1), wo = g.dim(2);
    const int64_t k = int64_t(cin) * kh * kw;
    Conv2dGrads grads;
    grads.gb = channel_bias_grad(g);
    if (need_gw) grads.gw = Tensor::zeros(w.shape(), w.dtype());
    if (need_gx) grads.gx = Tensor::zeros(x.shape(), x.dtype());
    const int rows = strip_rows(k, wo, ho, sizeof(T));
    Tensor col = Tensor::empty({int(k), rows * wo}, x.dtype());
    Tensor gcol = need_gx ? Tensor::empty({int(k), rows * wo}, x.dtype()) : Tensor();
    for (int oy0 = 0; oy0 < ho; oy0 += rows) {
        const int cur = std::min(rows, ho - oy0);
        const int64_t n = int64_t(cur) * wo;
        const T* gstrip = g.data<T>() + int64_t(oy0) * wo;
        if (need_gw) {
            gather_strip<T>(x.data<T>(), cin, h, wid, kh, kw, spec.stride, spec.padding,
                            spec.pad_mode, wo, oy0, cur, col.data<T>());
            gemm_rm(false, true, cout, int(k), int(n), T(1), gstrip, ho * wo, col.data<T>(),
                    int(n), T(1), grads.gw.data<T>(), int(k));
        }
        if (need_gx) {
            gemm_rm(true, false, int(k), int(n), cout, T(1), w.data<T>(), int(k), gstrip,
                    ho * wo, T(0), gcol.data<T>(), int(n));
            scatter_strip<T>(grads.gx.data<T>(), cin, h, wid, kh, kw, spec.stride,
                             spec.padding, spec.pad_mode, wo, oy0, cur, gcol.data<T>());
        }
    }
    return grads;
}

void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b,
                     const Conv2dSpec& spec) {
    if (x.rank() != 3 || w.rank() != 4)
        throw ShapeError("conv2d: need x [Cin,H,W] and w [Cout,Cin,kh,kw], got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
    if (w.dim(1) != x.dim(0))
        throw ShapeError("conv2d: channel mismatch, x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(0)))
        throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " does not match w " +
                         shape_str(w.shape()));
    if (x.dtype() != w.dtype() || (b.defined() && b.dtype() != x.dtype()))
        throw ShapeError("conv2d: dtype mismatch");
    if (spec.stride < 1) throw ShapeError("conv2d: stride must be positive");
    if (spec.padding < 0) throw ShapeError("conv2d: padding must be non-negative");
    if (x.dim(1) + 2 * spec.padding < w.dim(2) || x.dim(2) + 2 * spec.padding < w.dim(3))
        throw ShapeError("conv2d: kernel larger than padded input, x " + shape_str(x.shape()) +
                         " vs w " + shape_str(w.shape()));
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec) {
    check_conv_args(x, w, b, spec);
    const int ho = out_extent(x.dim(1), spec.padding, w.dim(2), spec.stride);
    const int wo = out_extent(x.dim(2), spec.padding, w.dim(3), spec.stride);
    return x.dtype() == DType::f32 ? conv2d_impl<float>(x, w, b, spec, ho, wo)
                                   : conv2d_impl<double>(x, w, b, spec, ho, wo);
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                            const Conv2dSpec& spec, bool need_gx, bool need_gw) {
    check_conv_args(x, w, Tensor(), spec);
    const int ho = out_extent(x.dim(1), spec.padding, w.dim(2), spec.stride);
    const int wo = out_extent(x.dim(2), spec.padding, w.dim(3), spec.stride);
    if (g.rank() != 3 || g.dim(0) != w.dim(0) || g.dim(1) != ho || g.dim(2) != wo)
        throw ShapeError("conv2d_backward: gradient shape " + shape_str(g.shape()) +
                         " does not match output");
    return x.dtype() == DType::f32 ? conv2d_bwd_impl<float>(x, w, g, spec, need_gx, need_gw)
                                   : conv2d_bwd_impl<double>(x, w, g, spec, need_gx, need_gw);
}

namespace {

template <class T>
Tensor dw3x3_impl(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int c = x.dim(0), h = x.dim(1), wid = x.dim(2);
    Tensor out = Tensor::empty(x.shape(), x.dtype());
    const T* px = x.data<T>();
    const T* pw = w.data<T>();
    const T* pb = b.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = px + int64_t(ci) * h * wid;
        const T* wc = pw + ci * 9;
        T* oc = po + int64_t(ci) * h * wid;
        for (int y = 0; y < h; ++y)
            for (int x0 = 0; x0 < wid; ++x0) {
                double acc = pb[ci];
                for (int u = 0; u < 3; ++u) {
                    const int iy = y + u - 1;
                    if (iy < 0 || iy >= h) continue;
                    const T* row = xc + int64_t(iy) * wid;
                    for (int v = 0; v < 3; ++v) {
                        const int ix = x0 + v - 1;
                        if (ix < 0 || ix >= wid) continue;
                        acc += double(wc[u * 3 + v]) * double(row[ix]);
                    }
                }
                oc[int64_t(y) * wid + x0] = static_cast<T>(acc);
            }
    }
    return out;
}

template <class T>
DepthwiseGrads dw3x3_bwd_impl(const Tensor& x, const Tensor& w, const Tensor& g, bool need_gx) {
    const int c = x.dim(0), h = x.dim(1), wid = x.dim(2);
    DepthwiseGrads out;
    out.gw = Tensor::zeros(w.shape(), x.dtype());
    out.gb = channel_bias_grad(g);
    if (need_gx) out.gx = Tensor::zeros(x.shape(), x.dtype());
    const T* px = x.data<T>();
    const T* pw = w.data<T>();
    const T* pg = g.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = px + int64_t(ci) * h * wid;
        const T* wc = pw + ci * 9;
        const T* gc = pg + int64_t(ci) * h * wid;
        T* gwc = out.gw.data<T>() + ci * 9;
        T* gxc = need_gx ? out.gx.data<T>() + int64_t(ci) * h * wid : nullptr;
        for (int y = 0; y < h; ++y)
            for (int x0 = 0; x0 < wid; ++x0) {
                const T gv = gc[int64_t(y) * wid + x0];
                for (int u = 0; u < 3; ++u) {
                    const int iy = y + u - 1;
                    if (iy < 0 || iy >= h) continue;
                    for (int v = 0; v < 3; ++v) {
                        const int ix = x0 + v - 1;
                        if (ix < 0 || ix >= wid) continue;
                        gwc[u * 3 + v] += gv * xc[int64_t(iy) * wid + ix];
                        if (need_gx) gxc[int64_t(iy) * wid + ix] += gv * wc[u * 3 + v];
                    }
                }
            }
    }
    return out;
}

} // namespace

Tensor depthwise_conv3x3(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3 || w.rank() != 3 || w.dim(0) != x.dim(0) || w.dim(1) != 3 ||
        w.dim(2) != 3 || b.rank() != 1 || b.dim(0) != x.dim(0))
        throw ShapeError("depthwise_conv3x3: bad shapes x " + shape_str(x.shape()) + ", w " +
                         shape_str(w.shape()));
    return x.dtype() == DType::f32 ? dw3x3_impl<float>(x, w, b) : dw3x3_impl<double>(x, w, b);
}

DepthwiseGrads depthwise_conv3x3_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                                          bool need_gx) {
    if (!x.same_shape(g)) throw ShapeError("depthwise_conv3x3_backward: shape mismatch");
    return x.dtype() == DType::f32 ? dw3x3_bwd_impl<float>(x, w, g, need_gx)
                                   : dw3x3_bwd_impl<double>(x, w, g, need_gx);
}

} // namespace edenvfi::ops
