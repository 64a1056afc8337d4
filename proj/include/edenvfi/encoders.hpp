// the two parallel encoders: pyramid vision transformer and the 3-level CNN
#ifndef EDENVFI_ENCODERS_HPP
#define EDENVFI_ENCODERS_HPP

#include <vector>

#include "edenvfi/nn.hpp"

namespace edenvfi {

struct PvtStageConfig {
    int embed_dim = 64;
    int depth = 9;
    int sr_ratio = 16;
    int num_heads = 1;
    int mlp_ratio = 4;
    int patch_stride = 4;
};

// strided conv patch projection (kernel == stride) + token layer norm
struct PatchEmbed {
    nn::Conv2d proj;
    nn::LayerNorm norm;
    int stride = 1;

    static PatchEmbed make(int c_in, int out_dim, int stride, Rng& rng, DType dt);
    // x [C,H,W] -> tokens [(H/stride)*(W/stride), out_dim]; writes the token grid dims
    Variable forward(Tape& t, const Variable& x, int& grid_h, int& grid_w) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

// spatial-reduction attention: Q over all tokens, K/V over a conv-reduced grid
struct SraAttention {
    nn::Linear q, k, v, proj;
    nn::Conv2d sr; // kernel = stride = sr_ratio
    nn::LayerNorm sr_norm;
    int dim = 0, num_heads = 1, sr_ratio = 1;

    static SraAttention make(int dim, int num_heads, int sr_ratio, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& tokens, int grid_h, int grid_w) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

// pre-norm transformer block; the MLP carries a depthwise 3x3 over the token grid
struct PvtBlock {
    nn::LayerNorm norm1, norm2;
    SraAttention attn;
    nn::Linear fc1, fc2;
    nn::DepthwiseConv3x3 dw;

    static PvtBlock make(const PvtStageConfig& cfg, Rng& rng, DType dt);
    Variable forward(Tape& t, const Variable& tokens, int grid_h, int grid_w) const;
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct PvtFeatures {
    Variable beta64;  // [64,  H/4, W/4]
    Variable beta128; // [128, H/8, W/8]
};

struct PvtEncoder {
    PvtStageConfig cfg1, cfg2;
    PatchEmbed embed1, embed2;
    std::vector<PvtBlock> stage1, stage2;

    static PvtEncoder make(const PvtStageConfig& cfg1, const PvtStageConfig& cfg2, Rng& rng,
                           DType dt);
    PvtFeatures forward(Tape& t, const Variable& x) const; // x [12,H,W]
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct CnnEncoderState {
    Variable level32;  // [32,  H,    W]
    Variable level64;  // [64,  H/4,  W/4]
    Variable level128; // [128, H/8,  W/8]
    Variable rho;      // [128, H/16, W/16]
};

struct CnnEncoder {
    nn::Conv2d c1a, c1b, c2a, c2b, c3a, c3b;
    double slope = 0.1;

    static CnnEncoder make(int c_in, int c32, int c64, int c128, double slope, Rng& rng,
                           DType dt);
    CnnEncoderState forward(Tape& t, const Variable& x) const; // x [12,H,W]
    void collect(const std::string& prefix, nn::ParamList& out) const;
};

} // namespace edenvfi

#endif
