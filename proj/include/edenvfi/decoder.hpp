// convolutional decoder with the Eq.1 triple fusion
#ifndef EDENVFI_DECODER_HPP
#define EDENVFI_DECODER_HPP

#include "edenvfi/nn.hpp"

namespace edenvfi {

// two 3x3 convs, each followed by a leaky ReLU
struct ConvBlock {
    nn::Conv2d a, b;
    double slope = 0.1;

    static ConvBlock make(int c_in, int c_out, double slope, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& x) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

// bilinear x2 upsample, then 3x3 conv + leaky ReLU
struct UpsampleBlock {
    nn::Conv2d conv;
    double slope = 0.1;

    static UpsampleBlock make(int c_in, int c_out, double slope, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& x) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

// phi = alpha + beta + gamma; a shape mismatch names the offending source
Variable fuse_level(Tape& t, const Variable& alpha, const Variable& beta,
                    const Variable& gamma);

struct Decoder {
    ConvBlock block1, block2;
    UpsampleBlock up1, up2;

    static Decoder make(int c128, int c64, double slope, Rng& rng, DType dt);
    // rho [128,H/16,W/16] -> phi64 [64,H/4,W/4]
    Variable forward(Tape& t, const Variable& rho, const Variable& level128,
                     const Variable& beta128, const Variable& level64,
                     const Variable& beta64) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

} // namespace edenvfi

#endif
