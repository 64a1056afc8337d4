// autograd wrappers around the raw kernels, plus layer construction
#include <cmath>

#include "edenvfi/nn.hpp"

namespace edenvfi::nn {

namespace {

bool wants(const std::shared_ptr<VarNode>& n) { return n->requires_grad; }

} // namespace

Variable add(Tape& t, const Variable& a, const Variable& b) {
    auto an = a.node(), bn = b.node();
    return t.emit("add", ops::add(an->value, bn->value), wants(an) || wants(bn),
                  [an, bn](const Tensor& g) {
                      if (wants(an)) an->accumulate(g);
                      if (wants(bn)) bn->accumulate(g);
                  });
}

Variable sub(Tape& t, const Variable& a, const Variable& b) {
    auto an = a.node(), bn = b.node();
    return t.emit("sub", ops::sub(an->value, bn->value), wants(an) || wants(bn),
                  [an, bn](const Tensor& g) {
                      if (wants(an)) an->accumulate(g);
                      if (wants(bn)) bn->accumulate(ops::scale(g, -1.0));
                  });
}

Variable mul(Tape& t, const Variable& a, const Variable& b) {
    auto an = a.node(), bn = b.node();
    return t.emit("mul", ops::mul(an->value, bn->value), wants(an) || wants(bn),
                  [an, bn](const Tensor& g) {
                      if (wants(an)) an->accumulate(ops::mul(g, bn->value));
                      if (wants(bn)) bn->accumulate(ops::mul(g, an->value));
                  });
}

Variable scale(Tape& t, const Variable& a, double s) {
    auto an = a.node();
    return t.emit("scale", ops::scale(an->value, s), wants(an), [an, s](const Tensor& g) {
        an->accumulate(ops::scale(g, s));
    });
}

Variable leaky_relu(Tape& t, const Variable& x, double slope) {
    auto xn = x.node();
    return t.emit("leaky_relu", ops::leaky_relu(xn->value, slope), wants(xn),
                  [xn, slope](const Tensor& g) {
                      xn->accumulate(ops::leaky_relu_backward(xn->value, g, slope));
                  });
}

Variable gelu(Tape& t, const Variable& x) {
    auto xn = x.node();
    return t.emit("gelu", ops::gelu(xn->value), wants(xn), [xn](const Tensor& g) {
        xn->accumulate(ops::gelu_backward(xn->value, g));
    });
}

Variable sigmoid(Tape& t, const Variable& x) {
    auto xn = x.node();
    Tensor y = ops::sigmoid(xn->value);
    Tensor ycap = y; // shares storage
    return t.emit("sigmoid", std::move(y), wants(xn), [xn, ycap](const Tensor& g) {
        xn->accumulate(ops::sigmoid_backward(ycap, g));
    });
}

Variable sum(Tape& t, const Variable& x) {
    auto xn = x.node();
    return t.emit("sum", ops::sum_all(xn->value), wants(xn), [xn](const Tensor& g) {
        xn->accumulate(Tensor::full(xn->value.shape(), g.at(0), xn->value.dtype()));
    });
}

Variable matmul(Tape& t, const Variable& a, const Variable& b) {
    auto an = a.node(), bn = b.node();
    return t.emit("matmul", ops::gemm(an->value, false, bn->value, false),
                  wants(an) || wants(bn), [an, bn](const Tensor& g) {
                      if (wants(an)) an->accumulate(ops::gemm(g, false, bn->value, true));
                      if (wants(bn)) bn->accumulate(ops::gemm(an->value, true, g, false));
                  });
}

Variable matmul_nt(Tape& t, const Variable& a, const Variable& b) {
    auto an = a.node(), bn = b.node();
    return t.emit("matmul_nt", ops::gemm(an->value, false, bn->value, true),
                  wants(an) || wants(bn), [an, bn](const Tensor& g) {
                      if (wants(an)) an->accumulate(ops::gemm(g, false, bn->value, false));
                      if (wants(bn)) bn->accumulate(ops::gemm(g, true, an->value, false));
                  });
}

Variable softmax_lastdim(Tape& t, const Variable& x) {
    auto xn = x.node();
    Tensor y = ops::softmax_lastdim(xn->value);
    Tensor ycap = y;
    return t.emit("softmax", std::move(y), wants(xn), [xn, ycap](const Tensor& g) {
        xn->accumulate(ops::softmax_lastdim_backward(ycap, g));
    });
}

Variable layer_norm(Tape& t, const Variable& x, const Variable& gain, const Variable& offset,
                    double eps) {
    auto xn = x.node(), gn = gain.node(), on = offset.node();
    ops::LayerNormResult res = ops::layer_norm(xn->value, gn->value, on->value, eps);
    Tensor mean = res.mean, inv_std = res.inv_std;
    return t.emit("layer_norm", std::move(res.y), wants(xn) || wants(gn) || wants(on),
                  [xn, gn, on, mean, inv_std](const Tensor& g) {
                      ops::LayerNormGrads lg =
                          ops::layer_norm_backward(xn->value, gn->value, mean, inv_std, g);
                      if (wants(xn)) xn->accumulate(lg.gx);
                      if (wants(gn)) gn->accumulate(lg.ggain);
                      if (wants(on)) on->accumulate(lg.goffset);
                  });
}

Variable linear(Tape& t, const Variable& x, const Variable& w, const Variable& b) {
    auto xn = x.node(), wn = w.node(), bn = b.node();
    Tensor y = ops::add_row_bias(ops::gemm(xn->value, false, wn->value, false), bn->value);
    return t.emit("linear", std::move(y), wants(xn) || wants(wn) || wants(bn),
                  [xn, wn, bn](const Tensor& g) {
                      if (wants(xn)) xn->accumulate(ops::gemm(g, false, wn->value, true));
                      if (wants(wn)) wn->accumulate(ops::gemm(xn->value, true, g, false));
                      if (wants(bn)) bn->accumulate(ops::row_bias_grad(g));
                  });
}

Variable conv2d(Tape& t, const Variable& x, const Variable& w, const Variable& b,
                const ops::Conv2dSpec& spec) {
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return t.emit("conv2d", ops::conv2d(xn->value, wn->value, bn->value, spec),
                  wants(xn) || wants(wn) || wants(bn), [xn, wn, bn, spec](const Tensor& g) {
                      ops::Conv2dGrads cg = ops::conv2d_backward(xn->value, wn->value, g, spec,
                                                                 wants(xn), wants(wn));
                      if (wants(xn)) xn->accumulate(cg.gx);
                      if (wants(wn)) wn->accumulate(cg.gw);
                      if (wants(bn)) bn->accumulate(cg.gb);
                  });
}

Variable depthwise_conv3x3(Tape& t, const Variable& x, const Variable& w, const Variable& b) {
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return t.emit("dwconv3x3", ops::depthwise_conv3x3(xn->value, wn->value, bn->value),
                  wants(xn) || wants(wn) || wants(bn), [xn, wn, bn](const Tensor& g) {
                      ops::DepthwiseGrads dg =
                          ops::depthwise_conv3x3_backward(xn->value, wn->value, g, wants(xn));
                      if (wants(xn)) xn->accumulate(dg.gx);
                      if (wants(wn)) wn->accumulate(dg.gw);
                      if (wants(bn)) bn->accumulate(dg.gb);
                  });
}

Variable avg_pool2d(Tape& t, const Variable& x, int window, int stride) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("avg_pool2d", ops::avg_pool2d(xn->value, window, stride), wants(xn),
                  [xn, in_shape, window, stride](const Tensor& g) {
                      xn->accumulate(ops::avg_pool2d_backward(in_shape, window, stride, g));
                  });
}

Variable bilinear_resize(Tape& t, const Variable& x, int out_h, int out_w) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("bilinear_resize", ops::bilinear_resize(xn->value, out_h, out_w), wants(xn),
                  [xn, in_shape](const Tensor& g) {
                      xn->accumulate(ops::bilinear_resize_backward(in_shape, g));
                  });
}

Variable bilinear_sample(Tape& t, const Variable& x, const Variable& pos) {
    auto xn = x.node(), pn = pos.node();
    if (pn->value.numel() != 2)
        throw ShapeError("bilinear_sample: pos must be [2], got " + shape_str(pn->value.shape()));
    const double px = pn->value.at(0), py = pn->value.at(1);
    return t.emit("bilinear_sample", ops::bilinear_sample(xn->value, px, py),
                  wants(xn) || wants(pn), [xn, pn, px, py](const Tensor& g) {
                      ops::SampleGrads sg = ops::bilinear_sample_backward(xn->value, px, py, g);
                      if (wants(xn)) xn->accumulate(sg.gx);
                      if (wants(pn))
                          pn->accumulate(Tensor::from({2}, {sg.gpx, sg.gpy}, pn->value.dtype()));
                  });
}

Variable concat_channels(Tape& t, const std::vector<Variable>& xs) {
    std::vector<Tensor> vals;
    std::vector<std::shared_ptr<VarNode>> nodes;
    std::vector<int> channels;
    bool need = false;
    for (const Variable& x : xs) {
        nodes.push_back(x.node());
        vals.push_back(x.value());
        channels.push_back(x.value().dim(0));
        need = need || x.requires_grad();
    }
    return t.emit("concat_channels", ops::concat_channels(vals), need,
                  [nodes, channels](const Tensor& g) {
                      std::vector<Tensor> parts = ops::split_channels(g, channels);
                      for (size_t i = 0; i < nodes.size(); ++i)
                          if (wants(nodes[i])) nodes[i]->accumulate(parts[i]);
                  });
}

Variable slice_cols(Tape& t, const Variable& x, int c0, int c1) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("slice_cols", ops::slice_cols(xn->value, c0, c1), wants(xn),
                  [xn, in_shape, c0](const Tensor& g) {
                      xn->accumulate(ops::slice_cols_backward(in_shape, c0, g));
                  });
}

Variable concat_cols(Tape& t, const std::vector<Variable>& xs) {
    std::vector<Tensor> vals;
    std::vector<std::shared_ptr<VarNode>> nodes;
    std::vector<int> widths;
    bool need = false;
    for (const Variable& x : xs) {
        nodes.push_back(x.node());
        vals.push_back(x.value());
        widths.push_back(x.value().dim(1));
        need = need || x.requires_grad();
    }
    return t.emit("concat_cols", ops::concat_cols(vals), need,
                  [nodes, widths](const Tensor& g) {
                      int off = 0;
                      for (size_t i = 0; i < nodes.size(); ++i) {
                          if (wants(nodes[i]))
                              nodes[i]->accumulate(ops::slice_cols(g, off, off + widths[i]));
                          off += widths[i];
                      }
                  });
}

Variable grid_to_tokens(Tape& t, const Variable& x) {
    auto xn = x.node();
    const int h = xn->value.dim(1), w = xn->value.dim(2);
    return t.emit("grid_to_tokens", ops::grid_to_tokens(xn->value), wants(xn),
                  [xn, h, w](const Tensor& g) {
                      xn->accumulate(ops::tokens_to_grid(g, h, w));
                  });
}

Variable tokens_to_grid(Tape& t, const Variable& x, int h, int w) {
    auto xn = x.node();
    return t.emit("tokens_to_grid", ops::tokens_to_grid(xn->value, h, w), wants(xn),
                  [xn](const Tensor& g) { xn->accumulate(ops::grid_to_tokens(g)); });
}

Variable pad_bottom_right_symmetric(Tape& t, const Variable& x, int pad_h, int pad_w) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("pad_symmetric", ops::pad_bottom_right_symmetric(xn->value, pad_h, pad_w),
                  wants(xn), [xn, in_shape](const Tensor& g) {
                      xn->accumulate(ops::pad_bottom_right_symmetric_backward(in_shape, g));
                  });
}

Variable crop2d(Tape& t, const Variable& x, int out_h, int out_w) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("crop2d", ops::crop2d(xn->value, out_h, out_w), wants(xn),
                  [xn, in_shape](const Tensor& g) {
                      xn->accumulate(ops::crop2d_backward(in_shape, g));
                  });
}

Variable reshape(Tape& t, const Variable& x, Shape shape) {
    auto xn = x.node();
    const Shape in_shape = xn->value.shape();
    return t.emit("reshape", xn->value.reshaped(std::move(shape)), wants(xn),
                  [xn, in_shape](const Tensor& g) { xn->accumulate(g.reshaped(in_shape)); });
}

Variable l1_loss(Tape& t, const Variable& pred, const Variable& target) {
    auto pn = pred.node(), tn = target.node();
    return t.emit("l1_loss", ops::mean_abs_diff(pn->value, tn->value), wants(pn) || wants(tn),
                  [pn, tn](const Tensor& g) {
                      Tensor ga = ops::mean_abs_diff_backward_a(pn->value, tn->value, g);
                      if (wants(pn)) pn->accumulate(ga);
                      if (wants(tn)) tn->accumulate(ops::scale(ga, -1.0));
                  });
}

Variable edsc_apply(Tape& t, const std::array<Variable, 4>& frames, const EdscMaps& maps) {
    std::array<std::shared_ptr<VarNode>, 4> fn, hn, vn, oxn, oyn, mn;
    std::array<Tensor, 4> fvals;
    ops::EdscMapsT raw;
    bool need = maps.residual.requires_grad();
    for (int i = 0; i < 4; ++i) {
        fn[i] = frames[i].node();
        hn[i] = maps.horiz[i].node();
        vn[i] = maps.vert[i].node();
        oxn[i] = maps.off_x[i].node();
        oyn[i] = maps.off_y[i].node();
        mn[i] = maps.modulation[i].node();
        fvals[i] = fn[i]->value;
        raw.horiz[i] = hn[i]->value;
        raw.vert[i] = vn[i]->value;
        raw.off_x[i] = oxn[i]->value;
        raw.off_y[i] = oyn[i]->value;
        raw.modulation[i] = mn[i]->value;
        need = need || wants(fn[i]) || wants(hn[i]) || wants(vn[i]) || wants(oxn[i]) ||
               wants(oyn[i]) || wants(mn[i]);
    }
    raw.residual = maps.residual.value();
    auto rn = maps.residual.node();
    return t.emit("edsc_apply", ops::edsc_apply(fvals, raw), need,
                  [fn, hn, vn, oxn, oyn, mn, rn, fvals, raw](const Tensor& g) {
                      bool frame_grads = false;
                      for (int i = 0; i < 4; ++i) frame_grads = frame_grads || wants(fn[i]);
                      ops::EdscGrads eg = ops::edsc_apply_backward(fvals, raw, g, frame_grads);
                      for (int i = 0; i < 4; ++i) {
                          if (wants(fn[i])) fn[i]->accumulate(eg.gframes[i]);
                          if (wants(hn[i])) hn[i]->accumulate(eg.ghoriz[i]);
                          if (wants(vn[i])) vn[i]->accumulate(eg.gvert[i]);
                          if (wants(oxn[i])) oxn[i]->accumulate(eg.goff_x[i]);
                          if (wants(oyn[i])) oyn[i]->accumulate(eg.goff_y[i]);
                          if (wants(mn[i])) mn[i]->accumulate(eg.gmodulation[i]);
                      }
                      if (wants(rn)) rn->accumulate(eg.gresidual);
                  });
}

// ---- layers ------------------------------------------------------------------

Conv2d Conv2d::make(int c_in, int c_out, int k, int stride, int padding, Rng& rng, DType dt,
                    ops::PadMode mode) {
    const double std = std::sqrt(2.0 / (double(c_in) * k * k));
    Conv2d layer;
    layer.w = Variable::leaf(Tensor::randn({c_out, c_in, k, k}, rng, std, dt), true);
    layer.b = Variable::leaf(Tensor::zeros({c_out}, dt), true);
    layer.spec = ops::Conv2dSpec{stride, padding, mode};
    return layer;
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

Linear Linear::make(int d_in, int d_out, double init_std, Rng& rng, DType dt) {
    const double std = init_std > 0.0 ? init_std : std::sqrt(2.0 / double(d_in));
    Linear layer;
    layer.w = Variable::leaf(Tensor::randn({d_in, d_out}, rng, std, dt), true);
    layer.b = Variable::leaf(Tensor::zeros({d_out}, dt), true);
    return layer;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

LayerNorm LayerNorm::make(int dim, DType dt) {
    LayerNorm layer;
    layer.gain = Variable::leaf(Tensor::full({dim}, 1.0, dt), true);
    layer.offset = Variable::leaf(Tensor::zeros({dim}, dt), true);
    return layer;
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".offset", offset});
}

DepthwiseConv3x3 DepthwiseConv3x3::make(int channels, Rng& rng, DType dt) {
    DepthwiseConv3x3 layer;
    layer.w = Variable::leaf(Tensor::randn({channels, 3, 3}, rng, std::sqrt(2.0 / 9.0), dt), true);
    layer.b = Variable::leaf(Tensor::zeros({channels}, dt), true);
    return layer;
}

void DepthwiseConv3x3::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

int64_t param_count(const ParamList& params) {
    int64_t n = 0;
    for (const NamedParam& p : params) n += p.param.value().numel();
    return n;
}

} // namespace edenvfi::nn
