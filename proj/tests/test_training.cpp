#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "edenvfi/training.hpp"
#include "helpers.hpp"

using namespace edenvfi;
using namespace testutil;

namespace {

ModelConfig tiny_config() {
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
    return cfg;
}

nn::ParamList single_param(const std::string& name, Variable v) {
    nn::ParamList out;
    out.push_back({name, v});
    return out;
}

} // namespace

TEST_CASE("adamax matches the scalar recurrence to 1e-12") {
    Rng rng(81);
    const int n = 5, steps = 20;
    Tensor theta0 = randn64({n}, rng);
    std::vector<double> theta(static_cast<size_t>(n));
    std::vector<double> m(static_cast<size_t>(n), 0.0), u(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) theta[size_t(i)] = theta0.at(i);

    Variable p = Variable::leaf(theta0.clone(), true);
    Adamax opt(single_param("w", p));

    const double lr = 0.0005, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= steps; ++t) {
        Tensor g = randn64({n}, rng);
        p.node()->accumulate(g);
        opt.step();
        for (int i = 0; i < n; ++i) {
            const double gi = g.at(i);
            m[size_t(i)] = b1 * m[size_t(i)] + (1.0 - b1) * gi;
            u[size_t(i)] = std::max(b2 * u[size_t(i)], std::fabs(gi));
            theta[size_t(i)] -= (lr / (1.0 - std::pow(b1, t))) * m[size_t(i)] /
                                (u[size_t(i)] + eps);
            CHECK(std::fabs(p.value().at(i) - theta[size_t(i)]) < 1e-12);
        }
        // step() consumed the gradient
        CHECK(p.grad().at(0) == 0.0);
    }
}

TEST_CASE("adamax first step moves theta by almost exactly -lr") {
    Variable p = Variable::leaf(Tensor::zeros({1}, DType::f64), true);
    Adamax opt(single_param("w", p));
    p.node()->accumulate(Tensor::from({1}, {1.0}, DType::f64));
    opt.step();
    CHECK(std::fabs(p.value().at(0) + 0.0005) < 1e-11);
}

TEST_CASE("adamax leaves parameters alone on zero gradient") {
    Tensor init = Tensor::from({3}, {1.0, -2.0, 0.5}, DType::f64);
    Variable p = Variable::leaf(init.clone(), true);
    Adamax opt(single_param("w", p));
    p.node()->accumulate(Tensor::zeros({3}, DType::f64));
    opt.step();
    CHECK(bit_equal(p.value(), init));
}

TEST_CASE("adamax applies identical updates to identical gradients") {
    Variable p = Variable::leaf(Tensor::full({4}, 0.25, DType::f64), true);
    Adamax opt(single_param("w", p));
    p.node()->accumulate(Tensor::full({4}, -0.7, DType::f64));
    opt.step();
    for (int i = 1; i < 4; ++i) CHECK(p.value().at(i) == p.value().at(0));
}

TEST_CASE("adamax rejects NaN gradients by parameter name") {
    Variable p = Variable::leaf(Tensor::zeros({2}, DType::f64), true);
    Adamax opt(single_param("decoder.block1.a.w", p));
    Tensor bad = Tensor::from({2}, {0.1, std::nan("")}, DType::f64);
    p.node()->accumulate(bad);
    try {
        opt.step();
        CHECK(false);
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("decoder.block1.a.w") != std::string::npos);
    }
}

TEST_CASE("plateau schedule halves after five non-improving epochs") {
    PlateauSchedule s;
    double lr = 0.0005;
    lr = s.update(10.0, lr); // establishes best
    for (int i = 0; i < 4; ++i) {
        lr = s.update(10.0, lr); // equal is not an improvement
        CHECK(lr == doctest::Approx(0.0005));
    }
    lr = s.update(10.0, lr); // fifth flat epoch
    CHECK(lr == doctest::Approx(0.00025));
    // counter was reset by the halving: four more flats keep lr, the fifth halves
    for (int i = 0; i < 4; ++i) lr = s.update(10.0, lr);
    CHECK(lr == doctest::Approx(0.00025));
    lr = s.update(10.0, lr);
    CHECK(lr == doctest::Approx(0.000125));
}

TEST_CASE("plateau schedule resets on improvement and never raises lr") {
    PlateauSchedule s;
    double lr = 0.0005;
    lr = s.update(10.0, lr);
    for (int i = 0; i < 4; ++i) lr = s.update(9.5, lr); // four bad epochs
    CHECK(lr == doctest::Approx(0.0005));
    lr = s.update(10.5, lr); // improvement on the fifth
    CHECK(lr == doctest::Approx(0.0005));
    for (int i = 0; i < 4; ++i) {
        lr = s.update(10.0, lr);
        CHECK(lr == doctest::Approx(0.0005)); // counter restarted
    }
    lr = s.update(10.0, lr);
    CHECK(lr == doctest::Approx(0.00025));
    lr = s.update(99.0, lr); // large improvement never raises lr back
    CHECK(lr == doctest::Approx(0.00025));
}

TEST_CASE("synthetic batches are deterministic in the seed") {
    auto a = synth_batch(123, 3, 24);
    auto b = synth_batch(123, 3, 24);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].dx == b[i].dx);
        CHECK(a[i].dy == b[i].dy);
        CHECK(bit_equal(a[i].gt, b[i].gt));
        for (int f = 0; f < 4; ++f)
            CHECK(bit_equal(a[i].frames[size_t(f)], b[i].frames[size_t(f)]));
    }
    auto c = synth_batch(124, 3, 24);
    CHECK(!bit_equal(a[0].gt, c[0].gt));
}

TEST_CASE("synthetic samples render the pattern closed form") {
    // replaying the rng reproduces the pattern behind the sample, so the
    // ground truth must equal the pattern at t = 1.5 bit for bit
    Rng r1(5150);
    Rng r2 = r1;
    SyntheticSample s = synth_sample(r1, 24);
    Pattern p = make_pattern(r2, 24);
    CHECK(p.dx == s.dx);
    CHECK(p.dy == s.dy);
    CHECK(bit_equal(s.gt, p.frame(1.5)));
    for (int f = 0; f < 4; ++f) CHECK(bit_equal(s.frames[size_t(f)], p.frame(double(f))));
}

TEST_CASE("zero velocity freezes the scene") {
    Rng rng(5151);
    Pattern p = make_pattern(rng, 24);
    p.dx = 0.0;
    p.dy = 0.0;
    Tensor f0 = p.frame(0.0);
    CHECK(bit_equal(f0, p.frame(1.0)));
    CHECK(bit_equal(f0, p.frame(3.0)));
    CHECK(bit_equal(f0, p.frame(1.5)));
}

TEST_CASE("integer velocity translates the grid exactly") {
    Rng rng(5152);
    Pattern p = make_pattern(rng, 24);
    p.dx = 1.0;
    p.dy = 0.0;
    // frame(1) at pixel x samples the pattern at x-1, i.e. frame(0) at x-1
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 1; x < 8; ++x)
                CHECK(p.eval(c, x, y, 1.0) == doctest::Approx(p.eval(c, x - 1, y, 0.0)));
}

TEST_CASE("synthetic values stay inside the displayable range") {
    auto batch = synth_batch(321, 4, 16);
    for (const auto& s : batch)
        for (int64_t i = 0; i < s.gt.numel(); ++i) {
            CHECK(s.gt.at(i) > 0.0);
            CHECK(s.gt.at(i) < 1.0);
        }
    CHECK_THROWS_AS(synth_batch(1, 1, 8), ContractError);
}

TEST_CASE("history csv carries the documented header and rows") {
    std::vector<TrainRecord> h = {{1, 0.5, 0.0005}, {2, 0.25, 0.0005}};
    std::ostringstream out;
    write_history_csv(h, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,loss,lr");
    std::getline(in, line);
    CHECK(line.rfind("1,0.5,", 0) == 0);
}

TEST_CASE("zero steps of training leave the model at its seed init") {
    TrainResult r = train_toy(tiny_config(), 0, 99, 16);
    Model fresh = build_model(tiny_config(), 99, DType::f32);
    auto pa = r.model.params(), pb = fresh.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i)
        CHECK(bit_equal(pa[i].param.value(), pb[i].param.value()));
    CHECK(r.history.empty());
}

TEST_CASE("short training runs are reproducible and recorded") {
    TrainResult a = train_toy(tiny_config(), 3, 42, 16);
    TrainResult b = train_toy(tiny_config(), 3, 42, 16);
    REQUIRE(a.history.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(a.history[i].step == int(i) + 1);
        CHECK(a.history[i].loss == b.history[i].loss);
        CHECK(a.history[i].lr == 0.0005);
        CHECK(std::isfinite(a.history[i].loss));
    }
    auto pa = a.model.params(), pb = b.model.params();
    for (size_t i = 0; i < pa.size(); ++i)
        CHECK(bit_equal(pa[i].param.value(), pb[i].param.value()));
}

TEST_CASE("training reports divergence with the step index") {
    Model m = build_model(tiny_config(), 13, DType::f32);
    // poison one weight so the very first forward pass goes non-finite
    auto params = m.params();
    Tensor& w = params[0].param.value();
    w.set(0, std::nan(""));
    std::vector<TrainRecord> hist;
    try {
        run_training(m, 2, 13, 16, hist);
        CHECK(false);
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}
