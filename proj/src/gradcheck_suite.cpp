#include <algorithm>
#include <functional>

#include "edenvfi/decoder.hpp"
#include "edenvfi/encoders.hpp"
#include "edenvfi/gradcheck_suite.hpp"
#include "edenvfi/model.hpp"
#include "edenvfi/synthesis.hpp"

namespace edenvfi {

namespace {

constexpr DType F64 = DType::f64;

Tensor randn64(const Shape& s, Rng& rng, double sd) { return Tensor::randn(s, rng, sd, F64); }

Tensor randu64(const Shape& s, Rng& rng, double lo, double hi) {
    Tensor t = Tensor::empty(s, F64);
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(lo, hi));
    return t;
}

// normal draws nudged away from 0 so central differences never straddle a kink
Tensor randn_off_zero(const Shape& s, Rng& rng, double sd) {
    Tensor t = randn64(s, rng, sd);
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double v = t.at(i);
        t.set(i, v + (v >= 0.0 ? 0.3 : -0.3));
    }
    return t;
}

// fixed-weight projection to a scalar keeps every output coordinate relevant
Variable proj(Tape& t, const Variable& y, const Tensor& w) {
    return nn::sum(t, nn::mul(t, y, Variable::leaf(w, false)));
}

using Scalarize = std::function<Variable(Tape&, const Variable&)>;

double check(const Scalarize& f, const Tensor& x0, int max_coords = 0) {
    return grad_check(f, x0, 1e-5, max_coords);
}

double gc_leaky_relu() {
    Rng rng(101);
    const Tensor x = randn_off_zero({2, 3, 5}, rng, 1.0);
    const Tensor w = randn64({2, 3, 5}, rng, 1.0);
    return check([w](Tape& t, const Variable& v) {
        return proj(t, nn::leaky_relu(t, v, 0.1), w);
    }, x);
}

double gc_gelu() {
    Rng rng(102);
    const Tensor x = randn64({3, 7}, rng, 1.2);
    const Tensor w = randn64({3, 7}, rng, 1.0);
    return check([w](Tape& t, const Variable& v) { return proj(t, nn::gelu(t, v), w); }, x);
}

double gc_sigmoid() {
    Rng rng(103);
    const Tensor x = randn64({4, 5}, rng, 1.5);
    const Tensor w = randn64({4, 5}, rng, 1.0);
    return check([w](Tape& t, const Variable& v) { return proj(t, nn::sigmoid(t, v), w); }, x);
}

double gc_softmax() {
    Rng rng(104);
    const Tensor x = randn64({4, 7}, rng, 1.5);
    const Tensor w = randn64({4, 7}, rng, 1.0);
    return check([w](Tape& t, const Variable& v) {
        return proj(t, nn::softmax_lastdim(t, v), w);
    }, x);
}

double gc_linear() {
    Rng rng(105);
    const Tensor x = randn64({5, 4}, rng, 1.0);
    const Tensor wt = randn64({4, 6}, rng, 0.5);
    const Tensor b = randn64({6}, rng, 0.5);
    const Tensor pw = randn64({5, 6}, rng, 1.0);
    auto wrt_x = [wt, b, pw](Tape& t, const Variable& v) {
        return proj(t, nn::linear(t, v, Variable::leaf(wt, false), Variable::leaf(b, false)), pw);
    };
    auto wrt_w = [x, b, pw](Tape& t, const Variable& v) {
        return proj(t, nn::linear(t, Variable::leaf(x, false), v, Variable::leaf(b, false)), pw);
    };
    auto wrt_b = [x, wt, pw](Tape& t, const Variable& v) {
        return proj(t, nn::linear(t, Variable::leaf(x, false), Variable::leaf(wt, false), v), pw);
    };
    return std::max({check(wrt_x, x), check(wrt_w, wt), check(wrt_b, b)});
}

double gc_layer_norm() {
    Rng rng(106);
    const Tensor x = randn64({6, 8}, rng, 1.0);
    const Tensor gain = randu64({8}, rng, 0.6, 1.4);
    const Tensor offset = randn64({8}, rng, 0.3);
    const Tensor pw = randn64({6, 8}, rng, 1.0);
    auto wrt_x = [gain, offset, pw](Tape& t, const Variable& v) {
        return proj(t, nn::layer_norm(t, v, Variable::leaf(gain, false),
                                      Variable::leaf(offset, false), 1e-5), pw);
    };
    auto wrt_gain = [x, offset, pw](Tape& t, const Variable& v) {
        return proj(t, nn::layer_norm(t, Variable::leaf(x, false), v,
                                      Variable::leaf(offset, false), 1e-5), pw);
    };
    auto wrt_off = [x, gain, pw](Tape& t, const Variable& v) {
        return proj(t, nn::layer_norm(t, Variable::leaf(x, false),
                                      Variable::leaf(gain, false), v, 1e-5), pw);
    };
    return std::max({check(wrt_x, x), check(wrt_gain, gain), check(wrt_off, offset)});
}

double gc_conv2d() {
    Rng rng(107);
    const Tensor x = randn64({3, 6, 7}, rng, 1.0);
    const Tensor wt = randn64({4, 3, 3, 3}, rng, 0.4);
    const Tensor b = randn64({4}, rng, 0.3);
    const ops::Conv2dSpec zeros{1, 1, ops::PadMode::zeros};
    const ops::Conv2dSpec refl{2, 1, ops::PadMode::reflect};
    const Tensor pw1 = randn64({4, 6, 7}, rng, 1.0);
    const Tensor pw2 = randn64({4, 3, 4}, rng, 1.0);
    auto conv = [](Tape& t, const Variable& vx, const Variable& vw, const Variable& vb,
                   const ops::Conv2dSpec& s) { return nn::conv2d(t, vx, vw, vb, s); };
    double worst = check([&](Tape& t, const Variable& v) {
        return proj(t, conv(t, v, Variable::leaf(wt, false), Variable::leaf(b, false), zeros), pw1);
    }, x);
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        return proj(t, conv(t, Variable::leaf(x, false), v, Variable::leaf(b, false), zeros), pw1);
    }, wt));
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        return proj(t, conv(t, Variable::leaf(x, false), Variable::leaf(wt, false), v, zeros), pw1);
    }, b));
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        return proj(t, conv(t, v, Variable::leaf(wt, false), Variable::leaf(b, false), refl), pw2);
    }, x));
    return worst;
}

double gc_depthwise() {
    Rng rng(108);
    const Tensor x = randn64({3, 5, 6}, rng, 1.0);
    const Tensor wt = randn64({3, 3, 3}, rng, 0.4);
    const Tensor b = randn64({3}, rng, 0.3);
    const Tensor pw = randn64({3, 5, 6}, rng, 1.0);
    auto wrt = [&](int which) {
        return check([&, which](Tape& t, const Variable& v) {
            Variable vx = which == 0 ? v : Variable::leaf(x, false);
            Variable vw = which == 1 ? v : Variable::leaf(wt, false);
            Variable vb = which == 2 ? v : Variable::leaf(b, false);
            return proj(t, nn::depthwise_conv3x3(t, vx, vw, vb), pw);
        }, which == 0 ? x : which == 1 ? wt : b);
    };
    return std::max({wrt(0), wrt(1), wrt(2)});
}

double gc_avg_pool2d() {
    Rng rng(109);
    const Tensor x = randn64({2, 8, 8}, rng, 1.0);
    const Tensor pw2 = randn64({2, 4, 4}, rng, 1.0);
    const Tensor pw4 = randn64({2, 2, 2}, rng, 1.0);
    double worst = check([pw2](Tape& t, const Variable& v) {
        return proj(t, nn::avg_pool2d(t, v, 2, 2), pw2);
    }, x);
    return std::max(worst, check([pw4](Tape& t, const Variable& v) {
        return proj(t, nn::avg_pool2d(t, v, 4, 4), pw4);
    }, x));
}

double gc_bilinear_resize() {
    Rng rng(110);
    const Tensor x = randn64({2, 5, 6}, rng, 1.0);
    const Tensor up = randn64({2, 10, 12}, rng, 1.0);
    const Tensor dn = randn64({2, 3, 4}, rng, 1.0);
    double worst = check([up](Tape& t, const Variable& v) {
        return proj(t, nn::bilinear_resize(t, v, 10, 12), up);
    }, x);
    return std::max(worst, check([dn](Tape& t, const Variable& v) {
        return proj(t, nn::bilinear_resize(t, v, 3, 4), dn);
    }, x));
}

double gc_bilinear_sample() {
    Rng rng(111);
    const Tensor x = randn64({2, 6, 6}, rng, 1.0);
    const Tensor pos = Tensor::from({2}, {2.37, 3.81}, F64);
    const Tensor pw = randn64({2}, rng, 1.0);
    double worst = check([pos, pw](Tape& t, const Variable& v) {
        return proj(t, nn::bilinear_sample(t, v, Variable::leaf(pos, false)), pw);
    }, x);
    return std::max(worst, check([x, pw](Tape& t, const Variable& v) {
        return proj(t, nn::bilinear_sample(t, Variable::leaf(x, false), v), pw);
    }, pos));
}

double gc_pad_crop() {
    Rng rng(112);
    const Tensor x = randn64({2, 5, 6}, rng, 1.0);
    const Tensor pwp = randn64({2, 8, 8}, rng, 1.0);
    const Tensor pwc = randn64({2, 3, 4}, rng, 1.0);
    double worst = check([pwp](Tape& t, const Variable& v) {
        return proj(t, nn::pad_bottom_right_symmetric(t, v, 3, 2), pwp);
    }, x);
    return std::max(worst, check([pwc](Tape& t, const Variable& v) {
        return proj(t, nn::crop2d(t, v, 3, 4), pwc);
    }, x));
}

double gc_sra_attention() {
    Rng rng(113);
    SraAttention attn = SraAttention::make(8, 2, 2, rng, F64);
    const Tensor tokens = randn64({16, 8}, rng, 1.0);
    const Tensor pw = randn64({16, 8}, rng, 1.0);
    double worst = check([attn, pw](Tape& t, const Variable& v) {
        return proj(t, attn.forward(t, v, 4, 4), pw);
    }, tokens);
    worst = std::max(worst, check([attn, tokens, pw](Tape& t, const Variable& v) {
        SraAttention a2 = attn;
        a2.q.w = v;
        return proj(t, a2.forward(t, Variable::leaf(tokens, false), 4, 4), pw);
    }, attn.q.w.value()));
    worst = std::max(worst, check([attn, tokens, pw](Tape& t, const Variable& v) {
        SraAttention a2 = attn;
        a2.sr.w = v;
        return proj(t, a2.forward(t, Variable::leaf(tokens, false), 4, 4), pw);
    }, attn.sr.w.value(), 60));
    return worst;
}

double gc_pvt_block() {
    Rng rng(114);
    PvtStageConfig cfg;
    cfg.embed_dim = 8;
    cfg.depth = 1;
    cfg.sr_ratio = 2;
    cfg.num_heads = 2;
    cfg.mlp_ratio = 2;
    PvtBlock block = PvtBlock::make(cfg, rng, F64);
    const Tensor tokens = randn64({16, 8}, rng, 1.0);
    const Tensor pw = randn64({16, 8}, rng, 1.0);
    double worst = check([block, pw](Tape& t, const Variable& v) {
        return proj(t, block.forward(t, v, 4, 4), pw);
    }, tokens);
    worst = std::max(worst, check([block, tokens, pw](Tape& t, const Variable& v) {
        PvtBlock b2 = block;
        b2.fc1.w = v;
        return proj(t, b2.forward(t, Variable::leaf(tokens, false), 4, 4), pw);
    }, block.fc1.w.value(), 60));
    return worst;
}

double gc_patch_embed() {
    Rng rng(115);
    PatchEmbed pe = PatchEmbed::make(12, 8, 4, rng, F64);
    const Tensor x = randn64({12, 8, 8}, rng, 1.0);
    const Tensor pw = randn64({4, 8}, rng, 1.0);
    double worst = check([pe, pw](Tape& t, const Variable& v) {
        int gh = 0, gw = 0;
        return proj(t, pe.forward(t, v, gh, gw), pw);
    }, x);
    worst = std::max(worst, check([pe, x, pw](Tape& t, const Variable& v) {
        PatchEmbed p2 = pe;
        p2.proj.w = v;
        int gh = 0, gw = 0;
        return proj(t, p2.forward(t, Variable::leaf(x, false), gh, gw), pw);
    }, pe.proj.w.value(), 80));
    return worst;
}

double gc_fuse_level() {
    Rng rng(116);
    const Tensor a = randn64({3, 4, 5}, rng, 1.0);
    const Tensor b = randn64({3, 4, 5}, rng, 1.0);
    const Tensor c = randn64({3, 4, 5}, rng, 1.0);
    const Tensor pw = randn64({3, 4, 5}, rng, 1.0);
    auto wrt = [&](int which, const Tensor& x0) {
        return check([&, which](Tape& t, const Variable& v) {
            Variable va = which == 0 ? v : Variable::leaf(a, false);
            Variable vb = which == 1 ? v : Variable::leaf(b, false);
            Variable vc = which == 2 ? v : Variable::leaf(c, false);
            return proj(t, fuse_level(t, va, vb, vc), pw);
        }, x0);
    };
    return std::max({wrt(0, a), wrt(1, b), wrt(2, c)});
}

double gc_edsc_apply() {
    Rng rng(117);
    const int n = 3, C = 2, H = 4, W = 5;
    std::array<Tensor, 4> frames;
    for (auto& f : frames) f = randu64({C, H, W}, rng, 0.0, 1.0);
    std::array<Tensor, 4> horiz, vert, offx, offy, mod;
    for (int i = 0; i < 4; ++i) {
        horiz[static_cast<size_t>(i)] = randn64({n, H, W}, rng, 0.5);
        vert[static_cast<size_t>(i)] = randn64({n, H, W}, rng, 0.5);
        offx[static_cast<size_t>(i)] = randu64({n * n, H, W}, rng, -1.3, 1.3);
        offy[static_cast<size_t>(i)] = randu64({n * n, H, W}, rng, -1.3, 1.3);
        mod[static_cast<size_t>(i)] = randu64({n * n, H, W}, rng, 0.1, 1.0);
    }
    const Tensor residual = randn64({C, H, W}, rng, 0.2);
    const Tensor pw = randn64({C, H, W}, rng, 1.0);

    // rebuilds the maps with the probe substituted at one slot
    auto run = [&](int slot, const Tensor& x0) {
        return check([&, slot](Tape& t, const Variable& v) {
            std::array<Variable, 4> fr;
            nn::EdscMaps maps;
            for (int i = 0; i < 4; ++i) {
                const auto s = static_cast<size_t>(i);
                fr[s] = (slot == 0 && i == 1) ? v : Variable::leaf(frames[s], false);
                maps.horiz[s] = (slot == 1 && i == 0) ? v : Variable::leaf(horiz[s], false);
                maps.vert[s] = (slot == 2 && i == 2) ? v : Variable::leaf(vert[s], false);
                maps.off_x[s] = (slot == 3 && i == 1) ? v : Variable::leaf(offx[s], false);
                maps.off_y[s] = (slot == 4 && i == 3) ? v : Variable::leaf(offy[s], false);
                maps.modulation[s] = (slot == 5 && i == 0) ? v : Variable::leaf(mod[s], false);
            }
            maps.residual = slot == 6 ? v : Variable::leaf(residual, false);
            return proj(t, nn::edsc_apply(t, fr, maps), pw);
        }, x0);
    };
    double worst = 0.0;
    worst = std::max(worst, run(0, frames[1]));
    worst = std::max(worst, run(1, horiz[0]));
    worst = std::max(worst, run(2, vert[2]));
    worst = std::max(worst, run(3, offx[1]));
    worst = std::max(worst, run(4, offy[3]));
    worst = std::max(worst, run(5, mod[0]));
    worst = std::max(worst, run(6, residual));
    return worst;
}

double gc_l1_loss() {
    Rng rng(118);
    const Tensor pred = randn64({3, 4, 5}, rng, 1.0);
    Tensor target = pred.clone();
    for (int64_t i = 0; i < target.numel(); ++i) {
        const double off = rng.uniform(0.2, 0.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        target.set(i, target.at(i) + off);
    }
    double worst = check([target](Tape& t, const Variable& v) {
        return nn::l1_loss(t, v, Variable::leaf(target, false));
    }, pred);
    return std::max(worst, check([pred](Tape& t, const Variable& v) {
        return nn::l1_loss(t, Variable::leaf(pred, false), v);
    }, target));
}

double gc_end_to_end() {
    Rng rng(119);
    ModelConfig cfg;
    cfg.depth1 = 1;
    cfg.depth2 = 1;
    cfg.dim1 = 8;
    cfg.dim2 = 16;
    cfg.sr1 = 4;
    cfg.sr2 = 2;
    cfg.heads1 = 1;
    cfg.heads2 = 2;
    cfg.mlp_ratio = 2;
    cfg.cnn32 = 8;
    cfg.cnn64 = 8;
    cfg.cnn128 = 16;
    cfg.kernel_size = 3;
    Model model = build_model(cfg, 2024, F64);
    // the warm-start zeros in the synthesis output convs would stall every
    // gradient upstream of the heads, so displace them to a generic point
    auto scatter = [&](SynthHead& h) {
        h.c2.w = Variable::leaf(randn64(h.c2.w.value().shape(), rng, 0.05), true);
        h.c2.b = Variable::leaf(randn64(h.c2.b.value().shape(), rng, 0.05), true);
    };
    for (auto heads : {&model.synth.k_h, &model.synth.k_v, &model.synth.off_x,
                       &model.synth.off_y, &model.synth.mask})
        for (auto& h : *heads) scatter(h);
    scatter(model.synth.bias);

    std::array<Tensor, 4> frames;
    for (auto& f : frames) f = randu64({3, 16, 16}, rng, 0.0, 1.0);
    const Tensor pw = randn64({3, 16, 16}, rng, 1.0);

    auto with_frame = [&](Tape& t, const Variable& v) {
        std::array<Variable, 4> fr;
        for (int i = 0; i < 4; ++i)
            fr[static_cast<size_t>(i)] =
                i == 1 ? v : Variable::leaf(frames[static_cast<size_t>(i)], false);
        return proj(t, model.forward(t, fr), pw);
    };
    double worst = check(with_frame, frames[1], 48);

    auto frame_leaves = [&] {
        std::array<Variable, 4> fr;
        for (int i = 0; i < 4; ++i)
            fr[static_cast<size_t>(i)] = Variable::leaf(frames[static_cast<size_t>(i)], false);
        return fr;
    };
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        Model m2 = model;
        m2.decoder.block1.a.w = v;
        return proj(t, m2.forward(t, frame_leaves()), pw);
    }, model.decoder.block1.a.w.value(), 40));
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        Model m2 = model;
        m2.pvt->stage1[0].attn.q.w = v;
        return proj(t, m2.forward(t, frame_leaves()), pw);
    }, model.pvt->stage1[0].attn.q.w.value(), 40));
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        Model m2 = model;
        m2.synth.mask[0].c2.w = v;
        return proj(t, m2.forward(t, frame_leaves()), pw);
    }, model.synth.mask[0].c2.w.value(), 40));
    worst = std::max(worst, check([&](Tape& t, const Variable& v) {
        Model m2 = model;
        m2.cnn->c1a.w = v;
        return proj(t, m2.forward(t, frame_leaves()), pw);
    }, model.cnn->c1a.w.value(), 40));
    return worst;
}

struct Entry {
    const char* name;
    double (*fn)();
};

const Entry kEntries[] = {
    {"conv2d", gc_conv2d},
    {"avg_pool2d", gc_avg_pool2d},
    {"bilinear_resize", gc_bilinear_resize},
    {"bilinear_sample", gc_bilinear_sample},
    {"leaky_relu", gc_leaky_relu},
    {"softmax", gc_softmax},
    {"linear", gc_linear},
    {"layer_norm", gc_layer_norm},
    {"sra_attention", gc_sra_attention},
    {"pvt_block", gc_pvt_block},
    {"fuse_level", gc_fuse_level},
    {"edsc_apply", gc_edsc_apply},
    {"l1_loss", gc_l1_loss},
    {"end_to_end", gc_end_to_end},
    {"gelu", gc_gelu},
    {"sigmoid", gc_sigmoid},
    {"depthwise_conv3x3", gc_depthwise},
    {"patch_embed", gc_patch_embed},
    {"pad_crop", gc_pad_crop},
};

} // namespace

const std::vector<std::string>& gradcheck_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const Entry& e : kEntries) v.push_back(e.name);
        return v;
    }();
    return names;
}

double run_gradcheck(const std::string& name) {
    std::string key = name;
    if (key == "edsc") key = "edsc_apply";
    if (key == "model") key = "end_to_end";
    for (const Entry& e : kEntries)
        if (key == e.name) return e.fn();
    std::string known;
    for (const Entry& e : kEntries) known += std::string(known.empty() ? "" : ", ") + e.name;
    throw ConfigError("unknown gradcheck op '" + name + "' (known: " + known + ")");
}

} // namespace edenvfi
