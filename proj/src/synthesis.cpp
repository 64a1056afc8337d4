// synthesis-map heads and the blend baseline
#include "edenvfi/synthesis.hpp"

#include <cmath>

namespace edenvfi {

SynthHead SynthHead::make(int dim, int c_out, bool sigmoid_out, double slope, Rng& rng,
                          DType dt) {
    SynthHead head;
    head.c1 = nn::Conv2d::make(dim, dim, 3, 1, 1, rng, dt);
    head.c2 = nn::Conv2d::make(dim, c_out, 3, 1, 1, rng, dt);
    head.sigmoid_out = sigmoid_out;
    head.slope = slope;
    return head;
}

Variable SynthHead::forward(Tape& t, const Variable& phi, int out_h, int out_w) const {
    Variable x = nn::leaky_relu(t, c1.forward(t, phi), slope);
    x = nn::bilinear_resize(t, x, out_h, out_w);
    x = c2.forward(t, x);
    return sigmoid_out ? nn::sigmoid(t, x) : x;
}

void SynthHead::collect(const std::string& prefix, nn::ParamList& out) const {
    c1.collect(prefix + ".c1", out);
    c2.collect(prefix + ".c2", out);
}

SynthesisBlock SynthesisBlock::make(int dim, int kernel_size, double slope, Rng& rng,
                                    DType dt) {
    SynthesisBlock blk;
    blk.kernel_size = kernel_size;
    const int taps = kernel_size * kernel_size;
    for (int i = 0; i < 4; ++i) {
        blk.k_h[i] = SynthHead::make(dim, kernel_size, false, slope, rng, dt);
        blk.k_v[i] = SynthHead::make(dim, kernel_size, false, slope, rng, dt);
        blk.off_x[i] = SynthHead::make(dim, taps, false, slope, rng, dt);
        blk.off_y[i] = SynthHead::make(dim, taps, false, slope, rng, dt);
        blk.mask[i] = SynthHead::make(dim, taps, true, slope, rng, dt);
    }
    blk.bias = SynthHead::make(dim, 3, false, slope, rng, dt);
    // Warm start: zero every head's output conv and bias the separable kernels
    // toward a unit centre tap so the block initially emits the plain average
    // of the four input frames (0.7071^2 * sigmoid(0) = 1/4 per frame, offsets
    // and residual flat). Training then refines a sane predictor instead of
    // first having to rediscover basic image statistics.
    const double centre = 1.0 / std::sqrt(2.0);
    auto flatten = [](SynthHead& h) {
        h.c2.w.value().fill_(0.0);
        h.c2.b.value().fill_(0.0);
    };
    for (int i = 0; i < 4; ++i) {
        flatten(blk.k_h[i]);
        flatten(blk.k_v[i]);
        flatten(blk.off_x[i]);
        flatten(blk.off_y[i]);
        flatten(blk.mask[i]);
        blk.k_h[i].c2.b.value().set(kernel_size / 2, centre);
        blk.k_v[i].c2.b.value().set(kernel_size / 2, centre);
    }
    flatten(blk.bias);
    return blk;
}

nn::EdscMaps SynthesisBlock::generate(Tape& t, const Variable& phi64) const {
    const int out_h = 4 * phi64.value().dim(1);
    const int out_w = 4 * phi64.value().dim(2);
    nn::EdscMaps maps;
    for (int i = 0; i < 4; ++i) {
        maps.horiz[i] = k_h[i].forward(t, phi64, out_h, out_w);
        maps.vert[i] = k_v[i].forward(t, phi64, out_h, out_w);
        maps.off_x[i] = off_x[i].forward(t, phi64, out_h, out_w);
        maps.off_y[i] = off_y[i].forward(t, phi64, out_h, out_w);
        maps.modulation[i] = mask[i].forward(t, phi64, out_h, out_w);
    }
    maps.residual = bias.forward(t, phi64, out_h, out_w);
    return maps;
}

void SynthesisBlock::collect(const std::string& prefix, nn::ParamList& out) const {
    static const char* names[5] = {"k_h", "k_v", "off_x", "off_y", "mask"};
    for (int i = 0; i < 4; ++i) {
        const std::string frame = prefix + ".frame" + std::to_string(i);
        const std::array<const SynthHead*, 5> heads = {&k_h[i], &k_v[i], &off_x[i], &off_y[i],
                                                       &mask[i]};
        for (int j = 0; j < 5; ++j) heads[j]->collect(frame + "." + names[j], out);
    }
    bias.collect(prefix + ".bias", out);
}

Tensor blend_baseline(const std::array<Tensor, 4>& frames) {
    if (!frames[1].same_shape(frames[2]))
        throw ShapeError("blend_baseline: frame shapes disagree, " +
                         shape_str(frames[1].shape()) + " vs " + shape_str(frames[2].shape()));
    return ops::scale(ops::add(frames[1], frames[2]), 0.5);
}

} // namespace edenvfi
