// row softmax and layer normalization
#include <cmath>

#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

template <class T>
Tensor softmax_impl(const Tensor& x) {
    const int d = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / d;
    Tensor out = Tensor::empty(x.shape(), x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int64_t r = 0; r < rows; ++r) {
        const T* src = px + r * d;
        T* dst = po + r * d;
        T m = src[0];
        for (int j = 1; j < d; ++j) m = std::max(m, src[j]);
        double denom = 0.0;
        for (int j = 0; j < d; ++j) {
            const double e = std::exp(double(src[j]) - double(m));
            dst[j] = static_cast<T>(e);
            denom += e;
        }
        const double inv = 1.0 / denom;
        for (int j = 0; j < d; ++j) dst[j] = static_cast<T>(double(dst[j]) * inv);
    }
    return out;
}

template <class T>
Tensor softmax_bwd_impl(const Tensor& y, const Tensor& g) {
    const int d = y.dim(y.rank() - 1);
    const int64_t rows = y.numel() / d;
    Tensor out = Tensor::empty(y.shape(), y.dtype());
    const T* py = y.data<T>();
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int64_t r = 0; r < rows; ++r) {
        const T* yr = py + r * d;
        const T* gr = pg + r * d;
        T* dst = po + r * d;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += double(gr[j]) * double(yr[j]);
        for (int j = 0; j < d; ++j)
            dst[j] = static_cast<T>(double(yr[j]) * (double(gr[j]) - dot));
    }
    return out;
}

template <class T>
LayerNormResult layer_norm_impl(const Tensor& x, const Tensor& gain, const Tensor& offset,
                                double eps) {
    const int n = x.dim(0), d = x.dim(1);
    LayerNormResult res{Tensor::empty(x.shape(), x.dtype()), Tensor::empty({n}, x.dtype()),
                        Tensor::empty({n}, x.dtype())};
    const T* px = x.data<T>();
    const T* pgain = gain.data<T>();
    const T* poff = offset.data<T>();
    T* py = res.y.data<T>();
    T* pm = res.mean.data<T>();
    T* ps = res.inv_std.data<T>();
    for (int r = 0; r < n; ++r) {
        const T* src = px + int64_t(r) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += src[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = double(src[j]) - mean;
            var += c * c;
        }
        var /= d;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        pm[r] = static_cast<T>(mean);
        ps[r] = static_cast<T>(inv_std);
        T* dst = py + int64_t(r) * d;
        for (int j = 0; j < d; ++j)
            dst[j] = static_cast<T>((double(src[j]) - mean) * inv_std * double(pgain[j]) +
                                    double(poff[j]));
    }
    return res;
}

template <class T>
LayerNormGrads layer_norm_bwd_impl(const Tensor& x, const Tensor& gain, const Tensor& mean,
                                   const Tensor& inv_std, const Tensor& g) {
    const int n = x.dim(0), d = x.dim(1);
    LayerNormGrads out{Tensor::empty(x.shape(), x.dtype()), Tensor::zeros(gain.shape(), x.dtype()),
                       Tensor::zeros(gain.shape(), x.dtype())};
    const T* px = x.data<T>();
    const T* pgain = gain.data<T>();
    const T* pm = mean.data<T>();
    const T* ps = inv_std.data<T>();
    const T* pg = g.data<T>();
    T* pgx = out.gx.data<T>();
    T* pgg = out.ggain.data<T>();
    T* pgo = out.goffset.data<T>();
    for (int r = 0; r < n; ++r) {
        const T* xr = px + int64_t(r) * d;
        const T* gr = pg + int64_t(r) * d;
        T* dst = pgx + int64_t(r) * d;
        const double m = pm[r], is = ps[r];
        // dy_hat = g*gain; dx = is*(dy_hat - mean(dy_hat) - x_hat*mean(dy_hat*x_hat))
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double xh = (double(xr[j]) - m) * is;
            const double dyh = double(gr[j]) * double(pgain[j]);
            s1 += dyh;
            s2 += dyh * xh;
            pgg[j] += static_cast<T>(double(gr[j]) * xh);
            pgo[j] += static_cast<T>(double(gr[j]));
        }
        s1 /= d;
        s2 /= d;
        for (int j = 0; j < d; ++j) {
            const double xh = (double(xr[j]) - m) * is;
            const double dyh = double(gr[j]) * double(pgain[j]);
            dst[j] = static_cast<T>(is * (dyh - s1 - xh * s2));
        }
    }
    return out;
}

} // namespace

Tensor softmax_lastdim(const Tensor& x) {
    return x.dtype() == DType::f32 ? softmax_impl<float>(x) : softmax_impl<double>(x);
}

Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& g) {
    if (!y.same_shape(g)) throw ShapeError("softmax_backward: shape mismatch");
    return y.dtype() == DType::f32 ? softmax_bwd_impl<float>(y, g)
                                   : softmax_bwd_impl<double>(y, g);
}

LayerNormResult layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                           double eps) {
    if (x.rank() != 2 || gain.rank() != 1 || offset.rank() != 1 || gain.dim(0) != x.dim(1) ||
        offset.dim(0) != x.dim(1))
        throw ShapeError("layer_norm: need [N,D] with [D] gain/offset, got " +
                         shape_str(x.shape()) + ", " + shape_str(gain.shape()) + ", " +
                         shape_str(offset.shape()));
    return x.dtype() == DType::f32 ? layer_norm_impl<float>(x, gain, offset, eps)
                                   : layer_norm_impl<double>(x, gain, offset, eps);
}

LayerNormGrads layer_norm_backward(const Tensor& x, const Tensor& gain, const Tensor& mean,
                                   const Tensor& inv_std, const Tensor& g) {
    if (!x.same_shape(g)) throw ShapeError("layer_norm_backward: shape mismatch");
    return x.dtype() == DType::f32 ? layer_norm_bwd_impl<float>(x, gain, mean, inv_std, g)
                                   : layer_norm_bwd_impl<double>(x, gain, mean, inv_std, g);
}

} // namespace edenvfi::ops
