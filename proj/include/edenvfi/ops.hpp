// tensor kernels: forward and backward pairs used by the autograd wrappers
#ifndef EDENVFI_OPS_HPP
#define EDENVFI_OPS_HPP

#include <array>
#include <vector>

#include "edenvfi/tensor.hpp"

namespace edenvfi::ops {

enum class PadMode { zeros, reflect };

// ---- elementwise -----------------------------------------------------------
// Binary arithmetic requires identical shapes. The only broadcasting in this
// library is the bias pattern: a per-channel vector onto a [C,H,W] map and a
// per-feature vector onto [N,D] rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_channel_bias(const Tensor& x, const Tensor& bias); // [C,H,W] + [C]
Tensor add_row_bias(const Tensor& x, const Tensor& bias);     // [N,D] + [D]
Tensor channel_bias_grad(const Tensor& g);                    // [C,H,W] -> [C]
Tensor row_bias_grad(const Tensor& g);                        // [N,D] -> [D]
Tensor sum_all(const Tensor& x);                              // -> [1]
Tensor mean_abs_diff(const Tensor& a, const Tensor& b);       // L1, -> [1]
Tensor mean_abs_diff_backward_a(const Tensor& a, const Tensor& b, const Tensor& g);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& g, double slope);
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& g);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& g);

// ---- matrix products -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);              // [M,K]x[K,N]
Tensor gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b);
Tensor transpose2d(const Tensor& a);
Tensor slice_cols(const Tensor& x, int c0, int c1);           // [N,D] -> [N,c1-c0]
Tensor slice_cols_backward(const Shape& in_shape, int c0, const Tensor& g);
Tensor concat_cols(const std::vector<Tensor>& xs);

// ---- normalization ---------------------------------------------------------
Tensor softmax_lastdim(const Tensor& x);
Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& g);

struct LayerNormResult {
    Tensor y;
    Tensor mean;    // per row
    Tensor inv_std; // per row
};
struct LayerNormGrads {
    Tensor gx, ggain, goffset;
};
// normalizes each row of [N,D] over D, then applies gain/offset per feature
LayerNormResult layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                           double eps);
LayerNormGrads layer_norm_backward(const Tensor& x, const Tensor& gain, const Tensor& mean,
                                   const Tensor& inv_std, const Tensor& g);

// ---- convolution -----------------------------------------------------------
struct Conv2dSpec {
    int stride = 1;
    int padding = 0;
    PadMode pad_mode = PadMode::zeros; // reflect excludes the border pixel
};
struct Conv2dGrads {
    Tensor gx, gw, gb;
};
// x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout]; cross-correlation, no kernel flip
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec);
Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                            const Conv2dSpec& spec, bool need_gx, bool need_gw);

struct DepthwiseGrads {
    Tensor gx, gw, gb;
};
// per-channel 3x3, stride 1, zero padding 1; w [C,3,3], b [C]
Tensor depthwise_conv3x3(const Tensor& x, const Tensor& w, const Tensor& b);
DepthwiseGrads depthwise_conv3x3_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                                          bool need_gx);

// ---- pooling / resampling --------------------------------------------------
Tensor avg_pool2d(const Tensor& x, int window, int stride);
Tensor avg_pool2d_backward(const Shape& in_shape, int window, int stride, const Tensor& g);

// half-pixel-center convention; samples are clamped to the source rectangle
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor bilinear_resize_backward(const Shape& in_shape, const Tensor& g);

// single fractional sample of [C,H,W]; coordinates clamp to the border
Tensor bilinear_sample(const Tensor& x, double px, double py);
struct SampleGrads {
    Tensor gx;
    double gpx = 0.0, gpy = 0.0;
};
SampleGrads bilinear_sample_backward(const Tensor& x, double px, double py, const Tensor& g);

// ---- layout ----------------------------------------------------------------
Tensor concat_channels(const std::vector<Tensor>& xs); // [Ci,H,W] stacked on C
std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& channels);
Tensor crop2d(const Tensor& x, int out_h, int out_w); // keep top-left corner
Tensor crop2d_backward(const Shape& in_shape, const Tensor& g);
// grow bottom/right by mirroring with the edge included, tiled for any amount
Tensor pad_bottom_right_symmetric(const Tensor& x, int pad_h, int pad_w);
Tensor pad_bottom_right_symmetric_backward(const Shape& in_shape, const Tensor& g);
Tensor grid_to_tokens(const Tensor& x);                   // [C,h,w] -> [h*w,C]
Tensor tokens_to_grid(const Tensor& t, int h, int w);     // [h*w,C] -> [C,h,w]

// ---- deformable separable synthesis ----------------------------------------
// Per input frame i and output pixel (x,y): the n x n tap weights are the
// outer product vert[u]*horiz[v]; tap (u,v) samples frame i at
// (x + v - n/2 + off_x[tap], y + u - n/2 + off_y[tap]) with border clamping,
// scaled by the modulation gate; contributions sum over taps and frames and
// the residual image is added.
struct EdscMapsT {
    std::array<Tensor, 4> horiz;      // [n,H,W]
    std::array<Tensor, 4> vert;       // [n,H,W]
    std::array<Tensor, 4> off_x;      // [n*n,H,W]
    std::array<Tensor, 4> off_y;      // [n*n,H,W]
    std::array<Tensor, 4> modulation; // [n*n,H,W]
    Tensor residual;                  // [3,H,W]
};
struct EdscGrads {
    std::array<Tensor, 4> gframes, ghoriz, gvert, goff_x, goff_y, gmodulation;
    Tensor gresidual;
};
Tensor edsc_apply(const std::array<Tensor, 4>& frames, const EdscMapsT& maps);
EdscGrads edsc_apply_backward(const std::array<Tensor, 4>& frames, const EdscMapsT& maps,
                              const Tensor& g, bool need_frame_grads);

} // namespace edenvfi::ops

#endif
