// shared fixtures and brute-force oracles
#ifndef TESTS_HELPERS_HPP
#define TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "edenvfi/nn.hpp"

namespace testutil {

using edenvfi::DType;
using edenvfi::Rng;
using edenvfi::Shape;
using edenvfi::Tensor;

inline Tensor randn64(const Shape& s, Rng& rng, double sd = 1.0) {
    return Tensor::randn(s, rng, sd, DType::f64);
}

inline Tensor randu64(const Shape& s, Rng& rng, double lo, double hi) {
    Tensor t = Tensor::empty(s, DType::f64);
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(lo, hi));
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, std::fabs(a.at(i) - b.at(i)));
    return worst;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

// reflect-101 (border excluded) index fold
inline int fold101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// edge-inclusive symmetric fold
inline int fold_sym(int i, int n) {
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

// triple-loop cross-correlation oracle
inline Tensor conv_ref(const Tensor& x, const Tensor& w, const Tensor& b,
                       const edenvfi::ops::Conv2dSpec& spec) {
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ho = (h + 2 * spec.padding - kh) / spec.stride + 1;
    const int wo = (wd + 2 * spec.padding - kw) / spec.stride + 1;
    Tensor out = Tensor::zeros({co, ho, wo}, DType::f64);
    for (int oc = 0; oc < co; ++oc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = b.at(oc);
                for (int ic = 0; ic < ci; ++ic)
                    for (int u = 0; u < kh; ++u)
                        for (int v = 0; v < kw; ++v) {
                            int iy = oy * spec.stride - spec.padding + u;
                            int ix = ox * spec.stride - spec.padding + v;
                            double xv;
                            if (spec.pad_mode == edenvfi::ops::PadMode::zeros) {
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                xv = x.at((int64_t(ic) * h + iy) * wd + ix);
                            } else {
                                xv = x.at((int64_t(ic) * h + fold101(iy, h)) * wd +
                                          fold101(ix, wd));
                            }
                            acc += xv * w.at(((int64_t(oc) * ci + ic) * kh + u) * kw + v);
                        }
                out.set((int64_t(oc) * ho + oy) * wo + ox, acc);
            }
    return out;
}

// clamped bilinear point sample of one channel
inline double sample_ref(const Tensor& x, int c, double px, double py) {
    const int h = x.dim(1), w = x.dim(2);
    px = std::clamp(px, 0.0, double(w - 1));
    py = std::clamp(py, 0.0, double(h - 1));
    const int x0 = std::min(int(std::floor(px)), w - 1), x1 = std::min(x0 + 1, w - 1);
    const int y0 = std::min(int(std::floor(py)), h - 1), y1 = std::min(y0 + 1, h - 1);
    const double wx = px - x0, wy = py - y0;
    auto at = [&](int yy, int xx) { return x.at((int64_t(c) * h + yy) * w + xx); };
    return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
           wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
}

// naive five-nested-loop separable deformable synthesis oracle
inline Tensor edsc_ref(const std::array<Tensor, 4>& frames,
                       const std::array<Tensor, 4>& horiz, const std::array<Tensor, 4>& vert,
                       const std::array<Tensor, 4>& offx, const std::array<Tensor, 4>& offy,
                       const std::array<Tensor, 4>& mod, const Tensor& residual) {
    const int c = frames[0].dim(0), h = frames[0].dim(1), w = frames[0].dim(2);
    const int n = horiz[0].dim(0), center = n / 2;
    Tensor out = residual.clone().astype(DType::f64);
    for (int i = 0; i < 4; ++i)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int u = 0; u < n; ++u)
                    for (int v = 0; v < n; ++v) {
                        const auto s = static_cast<size_t>(i);
                        const int64_t p = int64_t(y) * w + x;
                        const int64_t tp = int64_t(u * n + v) * h * w + p;
                        const double wgt = vert[s].at(int64_t(u) * h * w + p) *
                                           horiz[s].at(int64_t(v) * h * w + p) * mod[s].at(tp);
                        const double px = x + (v - center) + offx[s].at(tp);
                        const double py = y + (u - center) + offy[s].at(tp);
                        for (int ch = 0; ch < c; ++ch) {
                            const int64_t o = int64_t(ch) * h * w + p;
                            out.set(o, out.at(o) + wgt * sample_ref(frames[s], ch, px, py));
                        }
                    }
    return out;
}

} // namespace testutil

#endif
