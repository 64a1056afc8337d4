#include "doctest.h"

#include <string>

#include "edenvfi/decoder.hpp"
#include "edenvfi/synthesis.hpp"
#include "helpers.hpp"

using namespace edenvfi;
using namespace testutil;

TEST_CASE("fuse_level sums three aligned feature maps") {
    Rng rng(61);
    Tape t;
    Tensor a = randn64({4, 3, 3}, rng), b = randn64({4, 3, 3}, rng), c = randn64({4, 3, 3}, rng);
    Variable out = fuse_level(t, Variable::leaf(a, false), Variable::leaf(b, false),
                              Variable::leaf(c, false));
    for (int64_t i = 0; i < 36; ++i)
        CHECK(out.value().at(i) == doctest::Approx(a.at(i) + b.at(i) + c.at(i)));
}

TEST_CASE("fuse_level names the offending source") {
    Rng rng(62);
    Tape t;
    Variable ok = Variable::leaf(randn64({4, 3, 3}, rng), false);
    Variable odd = Variable::leaf(randn64({4, 5, 3}, rng), false);

    auto message = [&](const Variable& a, const Variable& b, const Variable& g) {
        try {
            fuse_level(t, a, b, g);
        } catch (const ShapeError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message(ok, odd, ok).find("pvt features mismatch") != std::string::npos);
    CHECK(message(ok, ok, odd).find("decoder features mismatch") != std::string::npos);
    CHECK(message(odd, ok, ok).find("cnn features mismatch") != std::string::npos);
}

TEST_CASE("decoder produces the quarter-resolution fusion map") {
    Rng rng(63);
    Decoder dec = Decoder::make(128, 64, 0.1, rng, DType::f64);
    nn::ParamList params;
    dec.collect("decoder", params);
    CHECK(nn::param_count(params) == 811712);

    Tape t;
    const int h = 64, w = 96;
    Variable rho = Variable::leaf(randn64({128, h / 16, w / 16}, rng), false);
    Variable l128 = Variable::leaf(randn64({128, h / 8, w / 8}, rng), false);
    Variable b128 = Variable::leaf(randn64({128, h / 8, w / 8}, rng), false);
    Variable l64 = Variable::leaf(randn64({64, h / 4, w / 4}, rng), false);
    Variable b64 = Variable::leaf(randn64({64, h / 4, w / 4}, rng), false);
    Variable phi = dec.forward(t, rho, l128, b128, l64, b64);
    CHECK(phi.value().shape() == Shape{64, h / 4, w / 4});
}

TEST_CASE("synth head upsamples to the requested full resolution") {
    Rng rng(64);
    SynthHead head = SynthHead::make(64, 25, false, 0.1, rng, DType::f64);
    Tape t;
    Variable phi = Variable::leaf(randn64({64, 4, 6}, rng), false);
    Variable m = head.forward(t, phi, 16, 24);
    CHECK(m.value().shape() == Shape{25, 16, 24});

    SynthHead sig = SynthHead::make(64, 25, true, 0.1, rng, DType::f64);
    Variable sm = sig.forward(t, phi, 16, 24);
    for (int64_t i = 0; i < sm.value().numel(); ++i) {
        CHECK(sm.value().at(i) > 0.0);
        CHECK(sm.value().at(i) < 1.0);
    }
}

TEST_CASE("synthesis block emits a full EDSC map set") {
    Rng rng(65);
    SynthesisBlock synth = SynthesisBlock::make(64, 5, 0.1, rng, DType::f64);
    nn::ParamList params;
    synth.collect("synth", params);
    CHECK(nn::param_count(params) == 973399);

    Tape t;
    Variable phi = Variable::leaf(randn64({64, 4, 4}, rng), false);
    nn::EdscMaps maps = synth.generate(t, phi);
    for (int f = 0; f < 4; ++f) {
        const auto s = static_cast<size_t>(f);
        CHECK(maps.horiz[s].value().shape() == Shape{5, 16, 16});
        CHECK(maps.vert[s].value().shape() == Shape{5, 16, 16});
        CHECK(maps.off_x[s].value().shape() == Shape{25, 16, 16});
        CHECK(maps.off_y[s].value().shape() == Shape{25, 16, 16});
        CHECK(maps.modulation[s].value().shape() == Shape{25, 16, 16});
        for (int64_t i = 0; i < maps.modulation[s].value().numel(); ++i) {
            CHECK(maps.modulation[s].value().at(i) > 0.0);
            CHECK(maps.modulation[s].value().at(i) < 1.0);
        }
    }
    CHECK(maps.residual.value().shape() == Shape{3, 16, 16});
}

TEST_CASE("blend baseline averages the two nearest frames") {
    Rng rng(66);
    std::array<Tensor, 4> frames;
    for (int i = 0; i < 4; ++i) frames[static_cast<size_t>(i)] = randn64({3, 4, 4}, rng);
    Tensor blend = blend_baseline(frames);
    for (int64_t i = 0; i < blend.numel(); ++i)
        CHECK(blend.at(i) == doctest::Approx(0.5 * (frames[1].at(i) + frames[2].at(i))));

    frames[2] = randn64({3, 5, 4}, rng);
    CHECK_THROWS_AS(blend_baseline(frames), ShapeError);
}
