// synthesis block: map-generating heads plus the EDSC application
#ifndef EDENVFI_SYNTHESIS_HPP
#define EDENVFI_SYNTHESIS_HPP

#include "edenvfi/nn.hpp"

namespace edenvfi {

// 3x3 conv (64->64) + leaky ReLU + bilinear x4 + 3x3 conv (64->c_out), optional sigmoid
struct SynthHead {
    nn::Conv2d c1, c2;
    bool sigmoid_out = false;
    double slope = 0.1;

    static SynthHead make(int dim, int c_out, bool sigmoid_out, double slope, Rng& rng,
                          DType dt);
    Variable forward(Tape& t, const Variable& phi, int out_h, int out_w) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct SynthesisBlock {
    // per input frame: horizontal kernel, vertical kernel, x/y offsets, modulation mask
    std::array<SynthHead, 4> k_h, k_v, off_x, off_y, mask;
    SynthHead bias;
    int kernel_size = 5;

    static SynthesisBlock make(int dim, int kernel_size, double slope, Rng& rng, DType dt);
    // phi64 [64,H/4,W/4] -> maps at (out_h, out_w) = 4x the phi grid
    nn::EdscMaps generate(Tape& t, const Variable& phi64) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

// (I1 + I2) / 2, the nearest-frames average reference predictor
Tensor blend_baseline(const std::array<Tensor, 4>& frames);

} // namespace edenvfi

#endif
