#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "edenvfi/model.hpp"
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

std::array<Tensor, 4> random_frames(Rng& rng, int h, int w, DType dt) {
    std::array<Tensor, 4> frames;
    for (int i = 0; i < 4; ++i) {
        Tensor f = Tensor::empty({3, h, w}, dt);
        for (int64_t j = 0; j < f.numel(); ++j) f.set(j, rng.uniform());
        frames[static_cast<size_t>(i)] = f;
    }
    return frames;
}

} // namespace

TEST_CASE("reference configurations hit the published parameter counts") {
    ModelConfig cfg;
    Model full = build_model(cfg, 0);
    CHECK(count_parameters(full) == 27060375);

    cfg.depth1 = 3;
    cfg.depth2 = 4;
    Model small = build_model(cfg, 0);
    CHECK(count_parameters(small) == 10433687);
    CHECK(count_parameters(small) < count_parameters(full));

    ModelConfig conv_only;
    conv_only.use_pvt = false;
    Model cnn_only = build_model(conv_only, 0);
    CHECK(count_parameters(cnn_only) == 2074711);
    for (const auto& p : cnn_only.params())
        CHECK(p.name.rfind("pvt", 0) == std::string::npos);
}

TEST_CASE("parameter count is independent of the seed") {
    ModelConfig cfg = tiny_config();
    CHECK(count_parameters(build_model(cfg, 1)) == count_parameters(build_model(cfg, 999)));
}

TEST_CASE("parameter names are unique and stable across builds") {
    Model a = build_model(tiny_config(), 5);
    Model b = build_model(tiny_config(), 6);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        for (size_t j = i + 1; j < pa.size(); ++j) CHECK(pa[i].name != pa[j].name);
    }
}

TEST_CASE("identical seeds build identical weights") {
    Model a = build_model(tiny_config(), 77);
    Model b = build_model(tiny_config(), 77);
    auto pa = a.params(), pb = b.params();
    for (size_t i = 0; i < pa.size(); ++i)
        CHECK(bit_equal(pa[i].param.value(), pb[i].param.value()));
}

TEST_CASE("forward preserves frame geometry across sizes") {
    Model m = build_model(tiny_config(), 3);
    Rng rng(71);
    for (int h : {32, 48}) {
        const int w = h == 32 ? 48 : 48;
        auto frames = random_frames(rng, h, w, DType::f32);
        Tensor out = m.infer(frames);
        CHECK(out.shape() == Shape{3, h, w});
    }
    // non-multiple of the alignment exercises pad + crop
    auto odd = random_frames(rng, 50, 70, DType::f32);
    CHECK(m.infer(odd).shape() == Shape{3, 50, 70});
}

TEST_CASE("inference is deterministic") {
    Model m = build_model(tiny_config(), 9);
    Rng rng(72);
    auto frames = random_frames(rng, 32, 32, DType::f32);
    CHECK(bit_equal(m.infer(frames), m.infer(frames)));
}

TEST_CASE("ablated encoders still produce frames") {
    Rng rng(73);
    ModelConfig cfg = tiny_config();
    cfg.use_pvt = false;
    Model cnn_only = build_model(cfg, 4);
    auto frames = random_frames(rng, 32, 32, DType::f32);
    CHECK(cnn_only.infer(frames).shape() == Shape{3, 32, 32});

    ModelConfig cfg2 = tiny_config();
    cfg2.use_cnn = false;
    Model pvt_only = build_model(cfg2, 4);
    CHECK(pvt_only.infer(frames).shape() == Shape{3, 32, 32});
}

TEST_CASE("config validation rejects contradictions") {
    ModelConfig cfg = tiny_config();
    cfg.use_pvt = false;
    cfg.use_cnn = false;
    CHECK_THROWS_AS(build_model(cfg, 0), ConfigError);

    ModelConfig bad_kernel = tiny_config();
    bad_kernel.kernel_size = 4;
    CHECK_THROWS_AS(build_model(bad_kernel, 0), ConfigError);

    ModelConfig bad_frames = tiny_config();
    bad_frames.input_frames = 2;
    CHECK_THROWS_AS(build_model(bad_frames, 0), ConfigError);
}

TEST_CASE("forward rejects malformed frames by index") {
    Model m = build_model(tiny_config(), 8);
    Rng rng(74);
    auto frames = random_frames(rng, 32, 32, DType::f32);
    frames[2] = Tensor::zeros({3, 32, 16}, DType::f32);
    try {
        m.infer(frames);
        CHECK(false);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
}

TEST_CASE("config text round-trips") {
    ModelConfig cfg = tiny_config();
    cfg.leaky_slope = 0.05;
    cfg.use_pvt = false;
    ModelConfig back = config_from_text(config_to_text(cfg));
    CHECK(back == cfg);

    CHECK_THROWS_AS(config_from_text("depths = 1\nbogus_key = 3\n"), FormatError);
    CHECK_THROWS_AS(config_from_text("depths = one,two\n"), FormatError);
}

TEST_CASE("weights round-trip bit-exactly") {
    Model m = build_model(tiny_config(), 2024);
    const std::string path = "/tmp/edenvfi_test_weights.bin";
    save_weights(m, path);
    Model back = load_weights(path);
    CHECK(back.cfg == m.cfg);
    auto pa = m.params(), pb = back.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(bit_equal(pa[i].param.value(), pb[i].param.value()));
    }
    std::remove(path.c_str());
}

TEST_CASE("weights loader rejects corruption") {
    Model m = build_model(tiny_config(), 11);
    const std::string path = "/tmp/edenvfi_test_corrupt.bin";
    save_weights(m, path);

    // corrupt the magic
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    try {
        load_weights(path);
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
    }

    // truncate mid-entry
    save_weights(m, path);
    {
        std::ifstream f(path, std::ios::binary | std::ios::ate);
        const auto full = f.tellg();
        std::ifstream in(path, std::ios::binary);
        std::string buf(static_cast<size_t>(full) / 2, '\0');
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    CHECK_THROWS_AS(load_weights(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("loading weights from a different architecture fails") {
    // serialize a tiny model, then rewrite its embedded config to claim a
    // different depth; the loader must flag the missing stage-2 entries
    Model m = build_model(tiny_config(), 12);
    const std::string path = "/tmp/edenvfi_test_mismatch.bin";
    save_weights(m, path);

    ModelConfig deeper = tiny_config();
    deeper.depth2 = 2;
    const std::string old_text = config_to_text(tiny_config());
    const std::string new_text = config_to_text(deeper);

    std::string blob;
    {
        std::ifstream f(path, std::ios::binary);
        blob.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    const size_t at = blob.find(old_text);
    REQUIRE(at != std::string::npos);
    REQUIRE(old_text.size() == new_text.size()); // same byte length, swap in place
    blob.replace(at, new_text.size(), new_text);
    // patch the stored config length if it changed (it did not)
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }
    CHECK_THROWS_AS(load_weights(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("alignment reflects the coarsest stage the encoders need") {
    ModelConfig cfg = tiny_config(); // sr1 4 at /4, sr2 2 at /8 -> lcm(16,16,16)
    Model m = build_model(cfg, 0);
    CHECK(m.alignment() == 16);

    ModelConfig cnn_only = tiny_config();
    cnn_only.use_pvt = false;
    CHECK(build_model(cnn_only, 0).alignment() == 16);

    ModelConfig full; // sr1 16 at /4 -> 64
    CHECK(build_model(full, 0).alignment() == 64);
}
