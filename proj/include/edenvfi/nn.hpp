// differentiable ops on Variables and the parameterized layers built from them
#ifndef EDENVFI_NN_HPP
#define EDENVFI_NN_HPP

#include <array>
#include <string>
#include <vector>

#include "edenvfi/autograd.hpp"
#include "edenvfi/ops.hpp"

namespace edenvfi::nn {

struct NamedParam {
    std::string name;
    Variable param;
};
using ParamList = std::vector<NamedParam>;

// ---- functional wrappers (each emits one tape node) -------------------------
Variable add(Tape& t, const Variable& a, const Variable& b);
Variable sub(Tape& t, const Variable& a, const Variable& b);
Variable mul(Tape& t, const Variable& a, const Variable& b);
Variable scale(Tape& t, const Variable& a, double s);
Variable leaky_relu(Tape& t, const Variable& x, double slope);
Variable gelu(Tape& t, const Variable& x);
Variable sigmoid(Tape& t, const Variable& x);
Variable sum(Tape& t, const Variable& x); // -> [1]

Variable matmul(Tape& t, const Variable& a, const Variable& b);    // a x b
Variable matmul_nt(Tape& t, const Variable& a, const Variable& b); // a x b^T
Variable softmax_lastdim(Tape& t, const Variable& x);
Variable layer_norm(Tape& t, const Variable& x, const Variable& gain, const Variable& offset,
                    double eps);
// y = x W + b with W [D_in, D_out]
Variable linear(Tape& t, const Variable& x, const Variable& w, const Variable& b);

Variable conv2d(Tape& t, const Variable& x, const Variable& w, const Variable& b,
                const ops::Conv2dSpec& spec);
Variable depthwise_conv3x3(Tape& t, const Variable& x, const Variable& w, const Variable& b);
Variable avg_pool2d(Tape& t, const Variable& x, int window, int stride);
Variable bilinear_resize(Tape& t, const Variable& x, int out_h, int out_w);
// pos is [2] = (px, py); output [C]
Variable bilinear_sample(Tape& t, const Variable& x, const Variable& pos);

Variable concat_channels(Tape& t, const std::vector<Variable>& xs);
Variable slice_cols(Tape& t, const Variable& x, int c0, int c1);
Variable concat_cols(Tape& t, const std::vector<Variable>& xs);
Variable grid_to_tokens(Tape& t, const Variable& x);
Variable tokens_to_grid(Tape& t, const Variable& x, int h, int w);
Variable pad_bottom_right_symmetric(Tape& t, const Variable& x, int pad_h, int pad_w);
Variable crop2d(Tape& t, const Variable& x, int out_h, int out_w);
Variable reshape(Tape& t, const Variable& x, Shape shape);

Variable l1_loss(Tape& t, const Variable& pred, const Variable& target);

struct EdscMaps {
    std::array<Variable, 4> horiz, vert, off_x, off_y, modulation;
    Variable residual;
};
Variable edsc_apply(Tape& t, const std::array<Variable, 4>& frames, const EdscMaps& maps);

// ---- layers ------------------------------------------------------------------
// Initialization: convolutions and He-mode linears draw from
// N(0, 2/fan_in); transformer projections use a fixed std of 0.02;
// biases and LayerNorm offsets start at zero, LayerNorm gains at one.

struct Conv2d {
    Variable w, b;
    ops::Conv2dSpec spec;

    static Conv2d make(int c_in, int c_out, int k, int stride, int padding, Rng& rng, DType dt,
                       ops::PadMode mode = ops::PadMode::zeros);
    Variable forward(Tape& t, const Variable& x) const { return conv2d(t, x, w, b, spec); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
    Variable w, b; // w [D_in, D_out]

    // init_std > 0 draws N(0, init_std^2); init_std <= 0 selects He init
    static Linear make(int d_in, int d_out, double init_std, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& x) const { return linear(t, x, w, b); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
    Variable gain, offset;
    double eps = 1e-5;

    static LayerNorm make(int dim, DType dt);
    Variable forward(Tape& t, const Variable& x) const {
        return layer_norm(t, x, gain, offset, eps);
    }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct DepthwiseConv3x3 {
    Variable w, b; // w [C,3,3]

    static DepthwiseConv3x3 make(int channels, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& x) const { return depthwise_conv3x3(t, x, w, b); }
    void collect(const std::string& prefix, ParamList& out) const;
};

int64_t param_count(const ParamList& params);

} // namespace edenvfi::nn

#endif
