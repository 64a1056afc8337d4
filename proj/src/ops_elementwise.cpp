// elementwise arithmetic, bias broadcasts, activations, reductions
#include <cmath>

#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.dtype() != b.dtype())
        throw ShapeError(std::string(what) + ": dtype mismatch");
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

template <class T, class F>
Tensor map2(const Tensor& a, const Tensor& b, F f) {
    Tensor out = Tensor::empty(a.shape(), a.dtype());
    const T* pa = a.data<T>();
    const T* pb = b.data<T>();
    T* po = out.data<T>();
    for (int64_t i = 0; i < a.numel(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
}

template <class T, class F>
Tensor map1(const Tensor& a, F f) {
    Tensor out = Tensor::empty(a.shape(), a.dtype());
    const T* pa = a.data<T>();
    T* po = out.data<T>();
    for (int64_t i = 0; i < a.numel(); ++i) po[i] = f(pa[i]);
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    return a.dtype() == DType::f32 ? map2<float>(a, b, [](float x, float y) { return x + y; })
                                   : map2<double>(a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same(a, b, "sub");
    return a.dtype() == DType::f32 ? map2<float>(a, b, [](float x, float y) { return x - y; })
                                   : map2<double>(a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same(a, b, "mul");
    return a.dtype() == DType::f32 ? map2<float>(a, b, [](float x, float y) { return x * y; })
                                   : map2<double>(a, b, [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
    return a.dtype() == DType::f32
               ? map1<float>(a, [sf = static_cast<float>(s)](float x) { return sf * x; })
               : map1<double>(a, [s](double x) { return s * x; });
}

namespace {

template <class T>
Tensor channel_bias_impl(const Tensor& x, const Tensor& bias) {
    const int c = x.dim(0);
    const int64_t plane = x.numel() / c;
    Tensor out = Tensor::empty(x.shape(), x.dtype());
    const T* px = x.data<T>();
    const T* pb = bias.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        const T bv = pb[ci];
        const T* src = px + ci * plane;
        T* dst = po + ci * plane;
        for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] + bv;
    }
    return out;
}

template <class T>
Tensor row_bias_impl(const Tensor& x, const Tensor& bias) {
    const int n = x.dim(0);
    const int d = x.dim(1);
    Tensor out = Tensor::empty(x.shape(), x.dtype());
    const T* px = x.data<T>();
    const T* pb = bias.data<T>();
    T* po = out.data<T>();
    for (int r = 0; r < n; ++r) {
        const T* src = px + int64_t(r) * d;
        T* dst = po + int64_t(r) * d;
        for (int j = 0; j < d; ++j) dst[j] = src[j] + pb[j];
    }
    return out;
}

template <class T>
Tensor channel_bias_grad_impl(const Tensor& g) {
    const int c = g.dim(0);
    const int64_t plane = g.numel() / c;
    Tensor out = Tensor::empty({c}, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        const T* src = pg + ci * plane;
        for (int64_t i = 0; i < plane; ++i) acc += src[i];
        po[ci] = static_cast<T>(acc);
    }
    return out;
}

template <class T>
Tensor row_bias_grad_impl(const Tensor& g) {
    const int n = g.dim(0);
    const int d = g.dim(1);
    Tensor out = Tensor::zeros({d}, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int r = 0; r < n; ++r) {
        const T* src = pg + int64_t(r) * d;
        for (int j = 0; j < d; ++j) po[j] += src[j];
    }
    return out;
}

} // namespace

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 3 || bias.rank() != 1 || bias.dim(0) != x.dim(0))
        throw ShapeError("add_channel_bias: need [C,H,W] + [C], got " + shape_str(x.shape()) +
                         " + " + shape_str(bias.shape()));
    if (x.dtype() != bias.dtype()) throw ShapeError("add_channel_bias: dtype mismatch");
    return x.dtype() == DType::f32 ? channel_bias_impl<float>(x, bias)
                                   : channel_bias_impl<double>(x, bias);
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
        throw ShapeError("add_row_bias: need [N,D] + [D], got " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
    if (x.dtype() != bias.dtype()) throw ShapeError("add_row_bias: dtype mismatch");
    return x.dtype() == DType::f32 ? row_bias_impl<float>(x, bias) : row_bias_impl<double>(x, bias);
}

Tensor channel_bias_grad(const Tensor& g) {
    return g.dtype() == DType::f32 ? channel_bias_grad_impl<float>(g)
                                   : channel_bias_grad_impl<double>(g);
}

Tensor row_bias_grad(const Tensor& g) {
    return g.dtype() == DType::f32 ? row_bias_grad_impl<float>(g) : row_bias_grad_impl<double>(g);
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    if (x.dtype() == DType::f32) {
        const float* p = x.data<float>();
        for (int64_t i = 0; i < x.numel(); ++i) acc += p[i];
    } else {
        const double* p = x.data<double>();
        for (int64_t i = 0; i < x.numel(); ++i) acc += p[i];
    }
    return Tensor::scalar(acc, x.dtype());
}

namespace {

template <class T>
double abs_diff_sum(const Tensor& a, const Tensor& b) {
    const T* pa = a.data<T>();
    const T* pb = b.data<T>();
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) acc += std::fabs(double(pa[i]) - double(pb[i]));
    return acc;
}

template <class T>
Tensor abs_diff_bwd(const Tensor& a, const Tensor& b, double gs) {
    Tensor out = Tensor::empty(a.shape(), a.dtype());
    const T* pa = a.data<T>();
    const T* pb = b.data<T>();
    T* po = out.data<T>();
    for (int64_t i = 0; i < a.numel(); ++i) {
        T d = pa[i] - pb[i];
        po[i] = d > T(0) ? static_cast<T>(gs) : (d < T(0) ? static_cast<T>(-gs) : T(0));
    }
    return out;
}

} // namespace

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
    check_same(a, b, "l1_loss");
    double s = a.dtype() == DType::f32 ? abs_diff_sum<float>(a, b) : abs_diff_sum<double>(a, b);
    return Tensor::scalar(s / static_cast<double>(a.numel()), a.dtype());
}

Tensor mean_abs_diff_backward_a(const Tensor& a, const Tensor& b, const Tensor& g) {
    const double gs = g.at(0) / static_cast<double>(a.numel());
    return a.dtype() == DType::f32 ? abs_diff_bwd<float>(a, b, gs) : abs_diff_bwd<double>(a, b, gs);
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return x.dtype() == DType::f32
               ? map1<float>(x, [s = static_cast<float>(slope)](float v) {
                     return v >= 0.0f ? v : s * v;
                 })
               : map1<double>(x, [slope](double v) { return v >= 0.0 ? v : slope * v; });
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& g, double slope) {
    check_same(x, g, "leaky_relu_backward");
    return x.dtype() == DType::f32
               ? map2<float>(x, g,
                             [s = static_cast<float>(slope)](float xv, float gv) {
                                 return xv >= 0.0f ? gv : s * gv;
                             })
               : map2<double>(x, g, [slope](double xv, double gv) {
                     return xv >= 0.0 ? gv : slope * gv;
                 });
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class T>
T gelu_one(T v) {
    return static_cast<T>(0.5 * double(v) * (1.0 + std::erf(double(v) * kInvSqrt2)));
}
template <class T>
T gelu_grad_one(T v, T g) {
    double cdf = 0.5 * (1.0 + std::erf(double(v) * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * double(v) * double(v));
    return static_cast<T>(double(g) * (cdf + double(v) * pdf));
}
} // namespace

Tensor gelu(const Tensor& x) {
    return x.dtype() == DType::f32 ? map1<float>(x, gelu_one<float>)
                                   : map1<double>(x, gelu_one<double>);
}

Tensor gelu_backward(const Tensor& x, const Tensor& g) {
    check_same(x, g, "gelu_backward");
    return x.dtype() == DType::f32 ? map2<float>(x, g, gelu_grad_one<float>)
                                   : map2<double>(x, g, gelu_grad_one<double>);
}

Tensor sigmoid(const Tensor& x) {
    const auto f32 = [](float v) { return static_cast<float>(1.0 / (1.0 + std::exp(-double(v)))); };
    const auto f64 = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    return x.dtype() == DType::f32 ? map1<float>(x, f32) : map1<double>(x, f64);
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& g) {
    check_same(y, g, "sigmoid_backward");
    return y.dtype() == DType::f32
               ? map2<float>(y, g, [](float yv, float gv) { return gv * yv * (1.0f - yv); })
               : map2<double>(y, g, [](double yv, double gv) { return gv * yv * (1.0 - yv); });
}

} // namespace edenvfi::ops
