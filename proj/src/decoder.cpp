// decoder blocks and Eq.1 fusion
#include "edenvfi/decoder.hpp"

namespace edenvfi {

ConvBlock ConvBlock::make(int c_in, int c_out, double slope, Rng& rng, DType dt) {
    ConvBlock blk;
    blk.a = nn::Conv2d::make(c_in, c_out, 3, 1, 1, rng, dt);
    blk.b = nn::Conv2d::make(c_out, c_out, 3, 1, 1, rng, dt);
    blk.slope = slope;
    return blk;
}

Variable ConvBlock::forward(Tape& t, const Variable& x) const {
    Variable y = nn::leaky_relu(t, a.forward(t, x), slope);
    return nn::leaky_relu(t, b.forward(t, y), slope);
}

void ConvBlock::collect(const std::string& prefix, nn::ParamList& out) const {
    a.collect(prefix + ".a", out);
    b.collect(prefix + ".b", out);
}

UpsampleBlock UpsampleBlock::make(int c_in, int c_out, double slope, Rng& rng, DType dt) {
    UpsampleBlock blk;
    blk.conv = nn::Conv2d::make(c_in, c_out, 3, 1, 1, rng, dt);
    blk.slope = slope;
    return blk;
}

Variable UpsampleBlock::forward(Tape& t, const Variable& x) const {
    const int h = x.value().dim(1), w = x.value().dim(2);
    Variable y = nn::bilinear_resize(t, x, 2 * h, 2 * w);
    return nn::leaky_relu(t, conv.forward(t, y), slope);
}

void UpsampleBlock::collect(const std::string& prefix, nn::ParamList& out) const {
    conv.collect(prefix + ".conv", out);
}

Variable fuse_level(Tape& t, const Variable& alpha, const Variable& beta,
                    const Variable& gamma) {
    const Tensor &a = alpha.value(), &b = beta.value(), &g = gamma.value();
    if (!a.same_shape(b) || !a.same_shape(g)) {
        const char* source = "cnn";
        if (a.same_shape(g))
            source = "pvt"; // beta is the odd one out
        else if (a.same_shape(b))
            source = "decoder";
        throw ShapeError(std::string("fuse_level: ") + source + " features mismatch, cnn " +
                         shape_str(a.shape()) + " / pvt " + shape_str(b.shape()) +
                         " / decoder " + shape_str(g.shape()));
    }
    return nn::add(t, nn::add(t, alpha, beta), gamma);
}

Decoder Decoder::make(int c128, int c64, double slope, Rng& rng, DType dt) {
    Decoder dec;
    dec.block1 = ConvBlock::make(c128, c128, slope, rng, dt);
    dec.up1 = UpsampleBlock::make(c128, c128, slope, rng, dt);
    dec.block2 = ConvBlock::make(c128, c128, slope, rng, dt);
    dec.up2 = UpsampleBlock::make(c128, c64, slope, rng, dt);
    return dec;
}

Variable Decoder::forward(Tape& t, const Variable& rho, const Variable& level128,
                          const Variable& beta128, const Variable& level64,
                          const Variable& beta64) const {
    Variable gamma128 = up1.forward(t, block1.forward(t, rho));
    Variable phi128 = fuse_level(t, level128, beta128, gamma128);
    Variable gamma64 = up2.forward(t, block2.forward(t, phi128));
    return fuse_level(t, level64, beta64, gamma64);
}

void Decoder::collect(const std::string& prefix, nn::ParamList& out) const {
    block1.collect(prefix + ".block1", out);
    up1.collect(prefix + ".up1", out);
    block2.collect(prefix + ".block2", out);
    up2.collect(prefix + ".up2", out);
}

} // namespace edenvfi
