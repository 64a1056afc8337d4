// enhanced deformable separable convolution: fused forward and backward
#include <algorithm>
#include <cmath>

#include "edenvfi/ops.hpp"

namespace edenvfi::ops {

namespace {

struct TapSample {
    int x0, x1, y0, y1;
    double wx, wy;
    bool frees_x, frees_y;
};

TapSample tap_pos(double px, double py, int h, int w) {
    TapSample s;
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

void check_maps(const std::array<Tensor, 4>& frames, const EdscMapsT& maps, int& n, int& c,
                int& h, int& w) {
    const Tensor& f0 = frames[0];
    if (f0.rank() != 3) throw ShapeError("edsc_apply: frames must be [C,H,W]");
    c = f0.dim(0);
    h = f0.dim(1);
    w = f0.dim(2);
    n = maps.horiz[0].dim(0);
    for (int i = 0; i < 4; ++i) {
        if (!frames[i].same_shape(f0) || frames[i].dtype() != f0.dtype())
            throw ShapeError("edsc_apply: frame " + std::to_string(i) + " shape " +
                             shape_str(frames[i].shape()) + " disagrees with " +
                             shape_str(f0.shape()));
        const Shape sep{n, h, w}, full{n * n, h, w};
        if (maps.horiz[i].shape() != sep || maps.vert[i].shape() != sep)
            throw ShapeError("edsc_apply: separable kernel maps must be [n,H,W]");
        if (maps.off_x[i].shape() != full || maps.off_y[i].shape() != full ||
            maps.modulation[i].shape() != full)
            throw ShapeError("edsc_apply: offset/modulation maps must be [n*n,H,W]");
    }
    if (maps.residual.shape() != Shape{c, h, w})
        throw ShapeError("edsc_apply: residual " + shape_str(maps.residual.shape()) +
                         " does not match frames " + shape_str(f0.shape()));
}

template <class T>
Tensor edsc_fwd(const std::array<Tensor, 4>& frames, const EdscMapsT& maps, int n, int c,
                int h, int w) {
    Tensor out = maps.residual.clone();
    T* po = out.data<T>();
    const int64_t plane = int64_t(h) * w;
    const int center = n / 2;
    for (int i = 0; i < 4; ++i) {
        const T* pf = frames[i].data<T>();
        const T* ph = maps.horiz[i].data<T>();
        const T* pv = maps.vert[i].data<T>();
        const T* pox = maps.off_x[i].data<T>();
        const T* poy = maps.off_y[i].data<T>();
        const T* pm = maps.modulation[i].data<T>();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int64_t p = int64_t(y) * w + x;
                for (int u = 0; u < n; ++u) {
                    const double vu = pv[u * plane + p];
                    for (int v = 0; v < n; ++v) {
                        const int64_t tp = int64_t(u * n + v) * plane + p;
                        const double wgt = vu * double(ph[v * plane + p]) * double(pm[tp]);
                        if (wgt == 0.0) continue;
                        const double px = x + v - center + double(pox[tp]);
                        const double py = y + u - center + double(poy[tp]);
                        const TapSample s = tap_pos(px, py, h, w);
                        for (int ci = 0; ci < c; ++ci) {
                            const T* fc = pf + ci * plane;
                            const double v00 = fc[int64_t(s.y0) * w + s.x0];
                            const double v01 = fc[int64_t(s.y0) * w + s.x1];
                            const double v10 = fc[int64_t(s.y1) * w + s.x0];
                            const double v11 = fc[int64_t(s.y1) * w + s.x1];
                            const double top = v00 * (1.0 - s.wx) + v01 * s.wx;
                            const double bot = v10 * (1.0 - s.wx) + v11 * s.wx;
                            po[ci * plane + p] +=
                                static_cast<T>(wgt * (top * (1.0 - s.wy) + bot * s.wy));
                        }
                    }
                }
            }
    }
    return out;
}

template <class T>
EdscGrads edsc_bwd(const std::array<Tensor, 4>& frames, const EdscMapsT& maps, const Tensor& g,
                   int n, int c, int h, int w, bool need_frame_grads) {
    EdscGrads out;
    out.gresidual = g.clone();
    for (int i = 0; i < 4; ++i) {
        out.ghoriz[i] = Tensor::zeros(maps.horiz[i].shape(), g.dtype());
        out.gvert[i] = Tensor::zeros(maps.vert[i].shape(), g.dtype());
        out.goff_x[i] = Tensor::zeros(maps.off_x[i].shape(), g.dtype());
        out.goff_y[i] = Tensor::zeros(maps.off_y[i].shape(), g.dtype());
        out.gmodulation[i] = Tensor::zeros(maps.modulation[i].shape(), g.dtype());
        if (need_frame_grads) out.gframes[i] = Tensor::zeros(frames[i].shape(), g.dtype());
    }
    const int64_t plane = int64_t(h) * w;
    const int center = n / 2;
    const T* pg = g.data<T>();
    for (int i = 0; i < 4; ++i) {
        const T* pf = frames[i].data<T>();
        const T* ph = maps.horiz[i].data<T>();
        const T* pv = maps.vert[i].data<T>();
        const T* pox = maps.off_x[i].data<T>();
        const T* poy = maps.off_y[i].data<T>();
        const T* pm = maps.modulation[i].data<T>();
        T* gh = out.ghoriz[i].data<T>();
        T* gv = out.gvert[i].data<T>();
        T* gox = out.goff_x[i].data<T>();
        T* goy = out.goff_y[i].data<T>();
        T* gm = out.gmodulation[i].data<T>();
        T* gf = need_frame_grads ? out.gframes[i].data<T>() : nullptr;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int64_t p = int64_t(y) * w + x;
                for (int u = 0; u < n; ++u) {
                    const double vu = pv[u * plane + p];
                    for (int v = 0; v < n; ++v) {
                        const int64_t tp = int64_t(u * n + v) * plane + p;
                        const double hv = ph[v * plane + p];
                        const double mv = pm[tp];
                        const double wgt = vu * hv * mv;
                        const double px = x + v - center + double(pox[tp]);
                        const double py = y + u - center + double(poy[tp]);
                        const TapSample s = tap_pos(px, py, h, w);
                        double sum_gs = 0.0;  // sum_c g_c * sample_c
                        double sum_gdx = 0.0; // sum_c g_c * d sample_c / d px
                        double sum_gdy = 0.0;
                        for (int ci = 0; ci < c; ++ci) {
                            const T* fc = pf + ci * plane;
                            const double gc = pg[ci * plane + p];
                            const double v00 = fc[int64_t(s.y0) * w + s.x0];
                            const double v01 = fc[int64_t(s.y0) * w + s.x1];
                            const double v10 = fc[int64_t(s.y1) * w + s.x0];
                            const double v11 = fc[int64_t(s.y1) * w + s.x1];
                            const double top = v00 * (1.0 - s.wx) + v01 * s.wx;
                            const double bot = v10 * (1.0 - s.wx) + v11 * s.wx;
                            sum_gs += gc * (top * (1.0 - s.wy) + bot * s.wy);
                            if (s.frees_x)
                                sum_gdx += gc * ((v01 - v00) * (1.0 - s.wy) +
                                                 (v11 - v10) * s.wy);
                            if (s.frees_y)
                                sum_gdy += gc * ((v10 - v00) * (1.0 - s.wx) +
                                                 (v11 - v01) * s.wx);
                            if (gf && wgt != 0.0) {
                                const double gw = gc * wgt;
                                gf[ci * plane + int64_t(s.y0) * w + s.x0] +=
                                    static_cast<T>(gw * (1.0 - s.wx) * (1.0 - s.wy));
                                gf[ci * plane + int64_t(s.y0) * w + s.x1] +=
                                    static_cast<T>(gw * s.wx * (1.0 - s.wy));
                                gf[ci * plane + int64_t(s.y1) * w + s.x0] +=
                                    static_cast<T>(gw * (1.0 - s.wx) * s.wy);
                                gf[ci * plane + int64_t(s.y1) * w + s.x1] +=
                                    static_cast<T>(gw * s.wx * s.wy);
                            }
                        }
                        gv[u * plane + p] += static_cast<T>(hv * mv * sum_gs);
                        gh[v * plane + p] += static_cast<T>(vu * mv * sum_gs);
                        gm[tp] += static_cast<T>(vu * hv * sum_gs);
                        gox[tp] += static_cast<T>(wgt * sum_gdx);
                        goy[tp] += static_cast<T>(wgt * sum_gdy);
                    }
                }
            }
    }
    return out;
}

} // namespace

Tensor edsc_apply(const std::array<Tensor, 4>& frames, const EdscMapsT& maps) {
    int n, c, h, w;
    check_maps(frames, maps, n, c, h, w);
    return frames[0].dtype() == DType::f32 ? edsc_fwd<float>(frames, maps, n, c, h, w)
                                           : edsc_fwd<double>(frames, maps, n, c, h, w);
}

EdscGrads edsc_apply_backward(const std::array<Tensor, 4>& frames, const EdscMapsT& maps,
                              const Tensor& g, bool need_frame_grads) {
    int n, c, h, w;
    check_maps(frames, maps, n, c, h, w);
    if (!g.same_shape(maps.residual))
        throw ShapeError("edsc_apply_backward: gradient shape mismatch");
    return frames[0].dtype() == DType::f32
               ? edsc_bwd<float>(frames, maps, g, n, c, h, w, need_frame_grads)
               : edsc_bwd<double>(frames, maps, g, n, c, h, w, need_frame_grads);
}

} // namespace edenvfi::ops
