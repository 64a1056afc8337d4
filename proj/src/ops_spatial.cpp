// pooling, bilinear resampling, padding/cropping and token layout changes
#include <algorithm>
#include <cmath>
#include <cstring>

#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

// mirror with the border included (period 2n), valid for any index
int fold_sym(int idx, int n) {
    const int period = 2 * n;
    int m = idx % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

struct Axis {
    int i0, i1;
    double w1; // weight of i1; i0 gets 1 - w1
};

// half-pixel-center source coordinate, clamped to the source range
Axis resize_axis(int o, int out_n, int in_n) {
    double s = (o + 0.5) * double(in_n) / double(out_n) - 0.5;
    s = std::clamp(s, 0.0, double(in_n - 1));
    const int i0 = static_cast<int>(std::floor(s));
    return {i0, std::min(i0 + 1, in_n - 1), s - i0};
}

template <class T>
Tensor pool_impl(const Tensor& x, int window, int stride, int ho, int wo) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::empty({c, ho, wo}, x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    const double inv = 1.0 / (double(window) * window);
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = px + int64_t(ci) * h * w;
        T* oc = po + int64_t(ci) * ho * wo;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (int u = 0; u < window; ++u) {
                    const T* row = xc + int64_t(oy * stride + u) * w + ox * stride;
                    for (int v = 0; v < window; ++v) acc += row[v];
                }
                oc[int64_t(oy) * wo + ox] = static_cast<T>(acc * inv);
            }
    }
    return out;
}

template <class T>
Tensor pool_bwd_impl(const Shape& in_shape, int window, int stride, const Tensor& g) {
    const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const int ho = g.dim(1), wo = g.dim(2);
    Tensor out = Tensor::zeros(in_shape, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    const double inv = 1.0 / (double(window) * window);
    for (int ci = 0; ci < c; ++ci) {
        const T* gc = pg + int64_t(ci) * ho * wo;
        T* oc = po + int64_t(ci) * h * w;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const T gv = static_cast<T>(double(gc[int64_t(oy) * wo + ox]) * inv);
                for (int u = 0; u < window; ++u) {
                    T* row = oc + int64_t(oy * stride + u) * w + ox * stride;
                    for (int v = 0; v < window; ++v) row[v] += gv;
                }
            }
    }
    return out;
}

template <class T>
Tensor resize_impl(const Tensor& x, int oh, int ow) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::empty({c, oh, ow}, x.dtype());
    std::vector<Axis> ax(static_cast<size_t>(ow));
    for (int ox = 0; ox < ow; ++ox) ax[ox] = resize_axis(ox, ow, w);
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = px + int64_t(ci) * h * w;
        T* oc = po + int64_t(ci) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const Axis ay = resize_axis(oy, oh, h);
            const T* r0 = xc + int64_t(ay.i0) * w;
            const T* r1 = xc + int64_t(ay.i1) * w;
            T* dst = oc + int64_t(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
                const Axis& a = ax[ox];
                const double top = double(r0[a.i0]) * (1.0 - a.w1) + double(r0[a.i1]) * a.w1;
                const double bot = double(r1[a.i0]) * (1.0 - a.w1) + double(r1[a.i1]) * a.w1;
                dst[ox] = static_cast<T>(top * (1.0 - ay.w1) + bot * ay.w1);
            }
        }
    }
    return out;
}

template <class T>
Tensor resize_bwd_impl(const Shape& in_shape, const Tensor& g) {
    const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const int oh = g.dim(1), ow = g.dim(2);
    Tensor out = Tensor::zeros(in_shape, g.dtype());
    std::vector<Axis> ax(static_cast<size_t>(ow));
    for (int ox = 0; ox < ow; ++ox) ax[ox] = resize_axis(ox, ow, w);
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci) {
        const T* gc = pg + int64_t(ci) * oh * ow;
        T* oc = po + int64_t(ci) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            const Axis ay = resize_axis(oy, oh, h);
            T* r0 = oc + int64_t(ay.i0) * w;
            T* r1 = oc + int64_t(ay.i1) * w;
            const T* src = gc + int64_t(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
                const Axis& a = ax[ox];
                const double gv = src[ox];
                r0[a.i0] += static_cast<T>(gv * (1.0 - ay.w1) * (1.0 - a.w1));
                r0[a.i1] += static_cast<T>(gv * (1.0 - ay.w1) * a.w1);
                r1[a.i0] += static_cast<T>(gv * ay.w1 * (1.0 - a.w1));
                r1[a.i1] += static_cast<T>(gv * ay.w1 * a.w1);
            }
        }
    }
    return out;
}

} // namespace

Tensor avg_pool2d(const Tensor& x, int window, int stride) {
    if (x.rank() != 3) throw ShapeError("avg_pool2d: need [C,H,W], got " + shape_str(x.shape()));
    if (window < 1 || window != stride)
        throw ShapeError("avg_pool2d: window must equal stride and be positive");
    if (x.dim(1) < window || x.dim(2) < window)
        throw ShapeError("avg_pool2d: input " + shape_str(x.shape()) + " smaller than window " +
                         std::to_string(window));
    const int ho = (x.dim(1) - window) / stride + 1;
    const int wo = (x.dim(2) - window) / stride + 1;
    return x.dtype() == DType::f32 ? pool_impl<float>(x, window, stride, ho, wo)
                                   : pool_impl<double>(x, window, stride, ho, wo);
}

Tensor avg_pool2d_backward(const Shape& in_shape, int window, int stride, const Tensor& g) {
    return g.dtype() == DType::f32 ? pool_bwd_impl<float>(in_shape, window, stride, g)
                                   : pool_bwd_impl<double>(in_shape, window, stride, g);
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.rank() != 3)
        throw ShapeError("bilinear_resize: need [C,H,W], got " + shape_str(x.shape()));
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output size must be >= 1");
    return x.dtype() == DType::f32 ? resize_impl<float>(x, out_h, out_w)
                                   : resize_impl<double>(x, out_h, out_w);
}

Tensor bilinear_resize_backward(const Shape& in_shape, const Tensor& g) {
    return g.dtype() == DType::f32 ? resize_bwd_impl<float>(in_shape, g)
                                   : resize_bwd_impl<double>(in_shape, g);
}

namespace {

struct SamplePos {
    int x0, x1, y0, y1;
    double wx, wy;    // weights of x1/y1
    bool frees_x, frees_y; // false when the coordinate was clamped
};

SamplePos sample_pos(double px, double py, int h, int w) {
    SamplePos s;
    s.frees_x = px > 0.0 && px < double(w - 1);
    s.frees_y = py > 0.0 && py < double(h - 1);
    const double cx = std::clamp(px, 0.0, double(w - 1));
    const double cy = std::clamp(py, 0.0, double(h - 1));
    // a NaN coordinate survives clamp; pin the index and let the NaN weight
    // poison the sample instead of indexing out of range
    s.x0 = std::isnan(cx) ? 0 : static_cast<int>(std::floor(cx));
    s.y0 = std::isnan(cy) ? 0 : static_cast<int>(std::floor(cy));
    s.x1 = std::min(s.x0 + 1, w - 1);
    s.y1 = std::min(s.y0 + 1, h - 1);
    s.wx = cx - s.x0;
    s.wy = cy - s.y0;
    return s;
}

} // namespace

Tensor bilinear_sample(const Tensor& x, double px, double py) {
    if (x.rank() != 3)
        throw ShapeError("bilinear_sample: need [C,H,W], got " + shape_str(x.shape()));
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const SamplePos s = sample_pos(px, py, h, w);
    Tensor out = Tensor::empty({c}, x.dtype());
    for (int ci = 0; ci < c; ++ci) {
        const int64_t base = int64_t(ci) * h * w;
        const double v00 = x.at(base + int64_t(s.y0) * w + s.x0);
        const double v01 = x.at(base + int64_t(s.y0) * w + s.x1);
        const double v10 = x.at(base + int64_t(s.y1) * w + s.x0);
        const double v11 = x.at(base + int64_t(s.y1) * w + s.x1);
        const double top = v00 * (1.0 - s.wx) + v01 * s.wx;
        const double bot = v10 * (1.0 - s.wx) + v11 * s.wx;
        out.set(ci, top * (1.0 - s.wy) + bot * s.wy);
    }
    return out;
}

SampleGrads bilinear_sample_backward(const Tensor& x, double px, double py, const Tensor& g) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const SamplePos s = sample_pos(px, py, h, w);
    SampleGrads out;
    out.gx = Tensor::zeros(x.shape(), x.dtype());
    for (int ci = 0; ci < c; ++ci) {
        const double gv = g.at(ci);
        const int64_t base = int64_t(ci) * h * w;
        out.gx.set(base + int64_t(s.y0) * w + s.x0,
                   out.gx.at(base + int64_t(s.y0) * w + s.x0) + gv * (1 - s.wx) * (1 - s.wy));
        out.gx.set(base + int64_t(s.y0) * w + s.x1,
                   out.gx.at(base + int64_t(s.y0) * w + s.x1) + gv * s.wx * (1 - s.wy));
        out.gx.set(base + int64_t(s.y1) * w + s.x0,
                   out.gx.at(base + int64_t(s.y1) * w + s.x0) + gv * (1 - s.wx) * s.wy);
        out.gx.set(base + int64_t(s.y1) * w + s.x1,
                   out.gx.at(base + int64_t(s.y1) * w + s.x1) + gv * s.wx * s.wy);
        const double v00 = x.at(base + int64_t(s.y0) * w + s.x0);
        const double v01 = x.at(base + int64_t(s.y0) * w + s.x1);
        const double v10 = x.at(base + int64_t(s.y1) * w + s.x0);
        const double v11 = x.at(base + int64_t(s.y1) * w + s.x1);
        if (s.frees_x)
            out.gpx += gv * ((v01 - v00) * (1.0 - s.wy) + (v11 - v10) * s.wy);
        if (s.frees_y)
            out.gpy += gv * ((v10 - v00) * (1.0 - s.wx) + (v11 - v01) * s.wx);
    }
    return out;
}

namespace {

template <class T>
Tensor concat_channels_impl(const std::vector<Tensor>& xs, int ctot) {
    const int h = xs[0].dim(1), w = xs[0].dim(2);
    Tensor out = Tensor::empty({ctot, h, w}, xs[0].dtype());
    T* po = out.data<T>();
    for (const Tensor& x : xs) {
        const int64_t n = x.numel();
        std::memcpy(po, x.data<T>(), size_t(n) * sizeof(T));
        po += n;
    }
    return out;
}

} // namespace

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty list");
    int ctot = 0;
    for (const Tensor& x : xs) {
        if (x.rank() != 3 || x.dim(1) != xs[0].dim(1) || x.dim(2) != xs[0].dim(2) ||
            x.dtype() != xs[0].dtype())
            throw ShapeError("concat_channels: operands disagree, " +
                             shape_str(xs[0].shape()) + " vs " + shape_str(x.shape()));
        ctot += x.dim(0);
    }
    return xs[0].dtype() == DType::f32 ? concat_channels_impl<float>(xs, ctot)
                                       : concat_channels_impl<double>(xs, ctot);
}

std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& channels) {
    int ctot = 0;
    for (int c : channels) ctot += c;
    if (x.rank() != 3 || ctot != x.dim(0))
        throw ShapeError("split_channels: channel list does not sum to " +
                         shape_str(x.shape()));
    std::vector<Tensor> out;
    const int h = x.dim(1), w = x.dim(2);
    int64_t off = 0;
    for (int c : channels) {
        Tensor part = Tensor::empty({c, h, w}, x.dtype());
        const int64_t n = part.numel();
        if (x.dtype() == DType::f32)
            std::memcpy(part.data<float>(), x.data<float>() + off, size_t(n) * 4);
        else
            std::memcpy(part.data<double>(), x.data<double>() + off, size_t(n) * 8);
        off += n;
        out.push_back(std::move(part));
    }
    return out;
}

namespace {

template <class T>
Tensor crop_impl(const Tensor& x, int oh, int ow) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::empty({c, oh, ow}, x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            std::memcpy(po + (int64_t(ci) * oh + y) * ow, px + (int64_t(ci) * h + y) * w,
                        size_t(ow) * sizeof(T));
    return out;
}

template <class T>
Tensor crop_bwd_impl(const Shape& in_shape, const Tensor& g) {
    const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const int oh = g.dim(1), ow = g.dim(2);
    Tensor out = Tensor::zeros(in_shape, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            std::memcpy(po + (int64_t(ci) * h + y) * w, pg + (int64_t(ci) * oh + y) * ow,
                        size_t(ow) * sizeof(T));
    return out;
}

template <class T>
Tensor pad_impl(const Tensor& x, int ph, int pw) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = h + ph, ow = w + pw;
    Tensor out = Tensor::empty({c, oh, ow}, x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y) {
            const T* src = px + (int64_t(ci) * h + fold_sym(y, h)) * w;
            T* dst = po + (int64_t(ci) * oh + y) * ow;
            std::memcpy(dst, src, size_t(w) * sizeof(T));
            for (int xq = w; xq < ow; ++xq) dst[xq] = src[fold_sym(xq, w)];
        }
    return out;
}

template <class T>
Tensor pad_bwd_impl(const Shape& in_shape, const Tensor& g) {
    const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const int oh = g.dim(1), ow = g.dim(2);
    Tensor out = Tensor::zeros(in_shape, g.dtype());
    const T* pg = g.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y) {
            const T* src = pg + (int64_t(ci) * oh + y) * ow;
            T* dst = po + (int64_t(ci) * h + fold_sym(y, h)) * w;
            for (int xq = 0; xq < ow; ++xq) dst[fold_sym(xq, w)] += src[xq];
        }
    return out;
}

template <class T>
Tensor to_tokens_impl(const Tensor& x) {
    const int c = x.dim(0);
    const int64_t hw = int64_t(x.dim(1)) * x.dim(2);
    Tensor out = Tensor::empty({int(hw), c}, x.dtype());
    const T* px = x.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int64_t i = 0; i < hw; ++i) po[i * c + ci] = px[ci * hw + i];
    return out;
}

template <class T>
Tensor to_grid_impl(const Tensor& t, int h, int w) {
    const int c = t.dim(1);
    const int64_t hw = int64_t(h) * w;
    Tensor out = Tensor::empty({c, h, w}, t.dtype());
    const T* pt = t.data<T>();
    T* po = out.data<T>();
    for (int ci = 0; ci < c; ++ci)
        for (int64_t i = 0; i < hw; ++i) po[ci * hw + i] = pt[i * c + ci];
    return out;
}

} // namespace

Tensor crop2d(const Tensor& x, int out_h, int out_w) {
    if (x.rank() != 3 || out_h > x.dim(1) || out_w > x.dim(2) || out_h < 1 || out_w < 1)
        throw ShapeError("crop2d: bad crop " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " of " + shape_str(x.shape()));
    return x.dtype() == DType::f32 ? crop_impl<float>(x, out_h, out_w)
                                   : crop_impl<double>(x, out_h, out_w);
}

Tensor crop2d_backward(const Shape& in_shape, const Tensor& g) {
    return g.dtype() == DType::f32 ? crop_bwd_impl<float>(in_shape, g)
                                   : crop_bwd_impl<double>(in_shape, g);
}

Tensor pad_bottom_right_symmetric(const Tensor& x, int pad_h, int pad_w) {
    if (x.rank() != 3 || pad_h < 0 || pad_w < 0)
        throw ShapeError("pad_bottom_right_symmetric: bad arguments for " +
                         shape_str(x.shape()));
    return x.dtype() == DType::f32 ? pad_impl<float>(x, pad_h, pad_w)
                                   : pad_impl<double>(x, pad_h, pad_w);
}

Tensor pad_bottom_right_symmetric_backward(const Shape& in_shape, const Tensor& g) {
    return g.dtype() == DType::f32 ? pad_bwd_impl<float>(in_shape, g)
                                   : pad_bwd_impl<double>(in_shape, g);
}

Tensor grid_to_tokens(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("grid_to_tokens: need [C,h,w], got " +
                                        shape_str(x.shape()));
    return x.dtype() == DType::f32 ? to_tokens_impl<float>(x) : to_tokens_impl<double>(x);
}

Tensor tokens_to_grid(const Tensor& t, int h, int w) {
    if (t.rank() != 2 || int64_t(h) * w != t.dim(0))
        throw ShapeError("tokens_to_grid: " + shape_str(t.shape()) + " does not hold " +
                         std::to_string(h) + "x" + std::to_string(w) + " tokens");
    return t.dtype() == DType::f32 ? to_grid_impl<float>(t, h, w) : to_grid_impl<double>(t, h, w);
}

} // namespace edenvfi::ops
