// PVT and CNN encoder forward passes
#include <cmath>

#include "edenvfi/encoders.hpp"

namespace edenvfi {

namespace {
constexpr double kProjStd = 0.02; // transformer projection init
}

PatchEmbed PatchEmbed::make(int c_in, int out_dim, int stride, Rng& rng, DType dt) {
    PatchEmbed pe;
    pe.proj = nn::Conv2d::make(c_in, out_dim, stride, stride, 0, rng, dt);
    pe.norm = nn::LayerNorm::make(out_dim, dt);
    pe.stride = stride;
    return pe;
}

Variable PatchEmbed::forward(Tape& t, const Variable& x, int& grid_h, int& grid_w) const {
    const int h = x.value().dim(1), w = x.value().dim(2);
    if (h % stride != 0 || w % stride != 0)
        throw ShapeError("patch_embed: input " + shape_str(x.value().shape()) +
                         " not divisible by stride " + std::to_string(stride));
    grid_h = h / stride;
    grid_w = w / stride;
    Variable tokens = nn::grid_to_tokens(t, proj.forward(t, x));
    return norm.forward(t, tokens);
}

void PatchEmbed::collect(const std::string& prefix, nn::ParamList& out) const {
    proj.collect(prefix + ".proj", out);
    norm.collect(prefix + ".norm", out);
}

SraAttention SraAttention::make(int dim, int num_heads, int sr_ratio, Rng& rng, DType dt) {
    if (dim % num_heads != 0)
        throw ConfigError("sra_attention: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(num_heads));
    SraAttention a;
    a.q = nn::Linear::make(dim, dim, kProjStd, rng, dt);
    a.k = nn::Linear::make(dim, dim, kProjStd, rng, dt);
    a.v = nn::Linear::make(dim, dim, kProjStd, rng, dt);
    a.proj = nn::Linear::make(dim, dim, kProjStd, rng, dt);
    a.sr = nn::Conv2d::make(dim, dim, sr_ratio, sr_ratio, 0, rng, dt);
    a.sr_norm = nn::LayerNorm::make(dim, dt);
    a.dim = dim;
    a.num_heads = num_heads;
    a.sr_ratio = sr_ratio;
    return a;
}

Variable SraAttention::forward(Tape& t, const Variable& tokens, int grid_h, int grid_w) const {
    if (grid_h % sr_ratio != 0 || grid_w % sr_ratio != 0)
        throw ShapeError("sra_attention: sr_ratio " + std::to_string(sr_ratio) +
                         " does not divide token grid " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w));
    Variable qs = q.forward(t, tokens);
    Variable red = nn::grid_to_tokens(t, sr.forward(t, nn::tokens_to_grid(t, tokens, grid_h,
                                                                          grid_w)));
    red = sr_norm.forward(t, red);
    Variable ks = k.forward(t, red);
    Variable vs = v.forward(t, red);
    const int dh = dim / num_heads;
    const double att_scale = 1.0 / std::sqrt(double(dh));
    std::vector<Variable> heads;
    for (int hh = 0; hh < num_heads; ++hh) {
        Variable qh = nn::slice_cols(t, qs, hh * dh, (hh + 1) * dh);
        Variable kh = nn::slice_cols(t, ks, hh * dh, (hh + 1) * dh);
        Variable vh = nn::slice_cols(t, vs, hh * dh, (hh + 1) * dh);
        Variable attn = nn::softmax_lastdim(t, nn::scale(t, nn::matmul_nt(t, qh, kh),
                                                         att_scale));
        heads.push_back(nn::matmul(t, attn, vh));
    }
    Variable merged = num_heads == 1 ? heads[0] : nn::concat_cols(t, heads);
    return proj.forward(t, merged);
}

void SraAttention::collect(const std::string& prefix, nn::ParamList& out) const {
    q.collect(prefix + ".q", out);
    k.collect(prefix + ".k", out);
    v.collect(prefix + ".v", out);
    sr.collect(prefix + ".sr", out);
    sr_norm.collect(prefix + ".sr_norm", out);
    proj.collect(prefix + ".proj", out);
}

PvtBlock PvtBlock::make(const PvtStageConfig& cfg, Rng& rng, DType dt) {
    PvtBlock b;
    b.norm1 = nn::LayerNorm::make(cfg.embed_dim, dt);
    b.attn = SraAttention::make(cfg.embed_dim, cfg.num_heads, cfg.sr_ratio, rng, dt);
    b.norm2 = nn::LayerNorm::make(cfg.embed_dim, dt);
    b.fc1 = nn::Linear::make(cfg.embed_dim, cfg.mlp_ratio * cfg.embed_dim, kProjStd, rng, dt);
    b.dw = nn::DepthwiseConv3x3::make(cfg.mlp_ratio * cfg.embed_dim, rng, dt);
    b.fc2 = nn::Linear::make(cfg.mlp_ratio * cfg.embed_dim, cfg.embed_dim, kProjStd, rng, dt);
    return b;
}

Variable PvtBlock::forward(Tape& t, const Variable& tokens, int grid_h, int grid_w) const {
    Variable x = nn::add(t, tokens, attn.forward(t, norm1.forward(t, tokens), grid_h, grid_w));
    Variable m = nn::gelu(t, fc1.forward(t, norm2.forward(t, x)));
    m = nn::grid_to_tokens(t, dw.forward(t, nn::tokens_to_grid(t, m, grid_h, grid_w)));
    return nn::add(t, x, fc2.forward(t, m));
}

void PvtBlock::collect(const std::string& prefix, nn::ParamList& out) const {
    norm1.collect(prefix + ".norm1", out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", out);
    fc1.collect(prefix + ".fc1", out);
    dw.collect(prefix + ".dw", out);
    fc2.collect(prefix + ".fc2", out);
}

PvtEncoder PvtEncoder::make(const PvtStageConfig& cfg1, const PvtStageConfig& cfg2, Rng& rng,
                            DType dt) {
    PvtEncoder enc;
    enc.cfg1 = cfg1;
    enc.cfg2 = cfg2;
    enc.embed1 = PatchEmbed::make(12, cfg1.embed_dim, cfg1.patch_stride, rng, dt);
    enc.embed2 = PatchEmbed::make(cfg1.embed_dim, cfg2.embed_dim, cfg2.patch_stride, rng, dt);
    for (int i = 0; i < cfg1.depth; ++i) enc.stage1.push_back(PvtBlock::make(cfg1, rng, dt));
    for (int i = 0; i < cfg2.depth; ++i) enc.stage2.push_back(PvtBlock::make(cfg2, rng, dt));
    return enc;
}

PvtFeatures PvtEncoder::forward(Tape& t, const Variable& x) const {
    if (x.value().rank() != 3 || x.value().dim(0) != 12)
        throw ShapeError("pvt_encoder: expected [12,H,W] input, got " +
                         shape_str(x.value().shape()));
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    Variable tokens = embed1.forward(t, x, h1, w1);
    for (const PvtBlock& b : stage1) tokens = b.forward(t, tokens, h1, w1);
    Variable beta64 = nn::tokens_to_grid(t, tokens, h1, w1);
    tokens = embed2.forward(t, beta64, h2, w2);
    for (const PvtBlock& b : stage2) tokens = b.forward(t, tokens, h2, w2);
    Variable beta128 = nn::tokens_to_grid(t, tokens, h2, w2);
    return {beta64, beta128};
}

void PvtEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
    embed1.collect(prefix + ".embed1", out);
    for (size_t i = 0; i < stage1.size(); ++i)
        stage1[i].collect(prefix + ".stage1." + std::to_string(i), out);
    embed2.collect(prefix + ".embed2", out);
    for (size_t i = 0; i < stage2.size(); ++i)
        stage2[i].collect(prefix + ".stage2." + std::to_string(i), out);
}

CnnEncoder CnnEncoder::make(int c_in, int c32, int c64, int c128, double slope, Rng& rng,
                            DType dt) {
    CnnEncoder enc;
    enc.c1a = nn::Conv2d::make(c_in, c32, 3, 1, 1, rng, dt);
    enc.c1b = nn::Conv2d::make(c32, c32, 3, 1, 1, rng, dt);
    enc.c2a = nn::Conv2d::make(c32, c64, 3, 1, 1, rng, dt);
    enc.c2b = nn::Conv2d::make(c64, c64, 3, 1, 1, rng, dt);
    enc.c3a = nn::Conv2d::make(c64, c128, 3, 1, 1, rng, dt);
    enc.c3b = nn::Conv2d::make(c128, c128, 3, 1, 1, rng, dt);
    enc.slope = slope;
    return enc;
}

CnnEncoderState CnnEncoder::forward(Tape& t, const Variable& x) const {
    if (x.value().rank() != 3 || x.value().dim(1) % 16 != 0 || x.value().dim(2) % 16 != 0)
        throw ShapeError("cnn_encoder: input " + shape_str(x.value().shape()) +
                         " must be [C,H,W] with H, W multiples of 16");
    CnnEncoderState s;
    Variable a = nn::leaky_relu(t, c1a.forward(t, x), slope);
    s.level32 = nn::leaky_relu(t, c1b.forward(t, a), slope);
    Variable p = nn::avg_pool2d(t, s.level32, 4, 4);
    a = nn::leaky_relu(t, c2a.forward(t, p), slope);
    s.level64 = nn::leaky_relu(t, c2b.forward(t, a), slope);
    p = nn::avg_pool2d(t, s.level64, 2, 2);
    a = nn::leaky_relu(t, c3a.forward(t, p), slope);
    s.level128 = nn::leaky_relu(t, c3b.forward(t, a), slope);
    s.rho = nn::avg_pool2d(t, s.level128, 2, 2);
    return s;
}

void CnnEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
    c1a.collect(prefix + ".c1a", out);
    c1b.collect(prefix + ".c1b", out);
    c2a.collect(prefix + ".c2a", out);
    c2b.collect(prefix + ".c2b", out);
    c3a.collect(prefix + ".c3a", out);
    c3b.collect(prefix + ".c3b", out);
}

} // namespace edenvfi
