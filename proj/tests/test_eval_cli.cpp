#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "edenvfi/cli.hpp"
#include "edenvfi/eval.hpp"
#include "edenvfi/image_io.hpp"
#include "edenvfi/training.hpp"
#include "helpers.hpp"

using namespace edenvfi;
using namespace testutil;
namespace fs = std::filesystem;

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

Tensor random_image(Rng& rng, int h, int w) {
    Tensor t = Tensor::empty({3, h, w}, DType::f32);
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform());
    return t;
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::path("/tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int rc = run_cli(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return rc;
}

} // namespace

TEST_CASE("psnr closed forms") {
    // f64 keeps the 0.1 difference exact enough for the 1e-9 window; f32
    // rounding of 0.5/0.6 alone would cost ~2e-6 dB
    Tensor a = Tensor::full({3, 4, 4}, 0.5, DType::f64);
    Tensor b = Tensor::full({3, 4, 4}, 0.6, DType::f64);
    CHECK(std::fabs(psnr(a, b) - 20.0) < 1e-9); // MSE 0.01
    CHECK(std::fabs(psnr(b, a) - 20.0) < 1e-9);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0.0);

    // out-of-range values are clamped before comparison
    Tensor hot = Tensor::full({3, 4, 4}, 7.0, DType::f32);
    Tensor one = Tensor::full({3, 4, 4}, 1.0, DType::f32);
    CHECK(std::isinf(psnr(hot, one)));

    CHECK_THROWS_AS(psnr(a, Tensor::full({3, 4, 5}, 0.5, DType::f32)), ShapeError);
}

TEST_CASE("ppm files round-trip bit-exactly") {
    TmpDir dir("edenvfi_ppm_rt");
    Rng rng(91);
    Tensor img = random_image(rng, 13, 17);
    const std::string path = dir.file("img.ppm");
    save_image(img, path);
    Tensor back = load_image(path);
    REQUIRE(back.shape() == img.shape());
    // quantization is lossy; a second trip through disk must be exact
    save_image(back, dir.file("img2.ppm"));
    Tensor again = load_image(dir.file("img2.ppm"));
    CHECK(bit_equal(back, again));
    CHECK(max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-7);
}

TEST_CASE("png files round-trip bit-exactly") {
    TmpDir dir("edenvfi_png_rt");
    Rng rng(92);
    Tensor img = random_image(rng, 9, 11);
    save_image(img, dir.file("img.png"));
    Tensor back = load_image(dir.file("img.png"));
    REQUIRE(back.shape() == img.shape());
    save_image(back, dir.file("img2.png"));
    CHECK(bit_equal(load_image(dir.file("img2.png")), back));
}

TEST_CASE("image io rejects junk") {
    TmpDir dir("edenvfi_img_junk");
    {
        std::FILE* f = std::fopen(dir.file("junk.ppm").c_str(), "wb");
        std::fputs("P6 2 2 255", f); // header ends before any pixel bytes
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_image(dir.file("junk.ppm")), FormatError);
    CHECK_THROWS_AS(load_image(dir.file("absent.png")), IoError);
    Rng rng(93);
    CHECK_THROWS_AS(save_image(random_image(rng, 2, 2), dir.file("img.bmp")), IoError);
}

TEST_CASE("quadruplet loader reads both formats and validates dims") {
    TmpDir dir("edenvfi_quad");
    Rng rng(94);
    for (const char* name : {"in0", "in1", "in2", "in3"})
        save_image(random_image(rng, 8, 10), dir.file(std::string(name) + ".png"));
    save_image(random_image(rng, 8, 10), dir.file("gt.ppm")); // mixed formats are fine
    QuadrupletRecord rec = load_quadruplet(dir.path.string());
    CHECK(rec.gt.shape() == Shape{3, 8, 10});
    for (const auto& f : rec.frames) CHECK(f.shape() == Shape{3, 8, 10});

    fs::remove(dir.file("gt.ppm"));
    try {
        load_quadruplet(dir.path.string());
        CHECK(false);
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("gt.png not found") != std::string::npos);
    }

    save_image(random_image(rng, 4, 10), dir.file("gt.png"));
    CHECK_THROWS_AS(load_quadruplet(dir.path.string()), FormatError);
}

TEST_CASE("benchmark times exactly the requested runs") {
    Model m = build_model(tiny_config(), 1, DType::f32);
    int timed = 0, untimed = 0;
    BenchReport r = benchmark(m, 32, 32, 3, [&](bool is_timed) {
        if (is_timed)
            ++timed;
        else
            ++untimed;
    });
    CHECK(timed == 3);
    CHECK(untimed == 1); // the warm-up forward stays out of the statistics
    CHECK(r.runs == 3);
    CHECK(r.mean_s > 0.0);
    CHECK(r.std_s >= 0.0);
    CHECK(r.peak_bytes > 0);
    CHECK(r.width == 32);
    CHECK(r.height == 32);

    CHECK_THROWS_AS(benchmark(m, 32, 32, 2), ContractError);

    std::string csv = bench_csv(r);
    CHECK(csv.rfind("32,32,3,", 0) == 0);
}

TEST_CASE("cli help and usage errors") {
    std::string out, err;
    CHECK(cli({"--help"}, &out, &err) == 0);
    CHECK(out.find("interpolate") != std::string::npos);
    CHECK(cli({"no-such-command"}, &out, &err) == 1);
    CHECK(cli({}, &out, &err) == 1);
    CHECK(cli({"interpolate"}, &out, &err) == 1); // missing required options
}

TEST_CASE("cli params reports reference counts") {
    std::string out;
    CHECK(cli({"params", "--depths", "9,12"}, &out) == 0);
    CHECK(out.find("27060375") != std::string::npos);
    CHECK(cli({"params", "--depths", "3,4"}, &out) == 0);
    CHECK(out.find("10433687") != std::string::npos);
    CHECK(cli({"params", "--depths", "9,12", "--no-pvt"}, &out) == 0);
    CHECK(out.find("2074711") != std::string::npos);
    std::string err;
    CHECK(cli({"params", "--depths", "nine"}, &out, &err) == 3);
}

TEST_CASE("cli gradcheck exits by tolerance") {
    std::string out;
    CHECK(cli({"gradcheck", "--op", "leaky_relu"}, &out) == 0);
    CHECK(out.find("leaky_relu") != std::string::npos);
    CHECK(out.find("ok") != std::string::npos);
    CHECK(cli({"gradcheck", "--op", "edsc"}, &out) == 0); // spec alias
    std::string err;
    CHECK(cli({"gradcheck", "--op", "l1_loss", "--tolerance", "1e-30"}, &out, &err) == 3);
    CHECK(cli({"gradcheck", "--op", "warp_everything"}, &out, &err) == 3);
}

TEST_CASE("cli interpolate round trip through weights and images") {
    TmpDir dir("edenvfi_cli_interp");
    Model m = build_model(tiny_config(), 21, DType::f32);
    save_weights(m, dir.file("w.bin"));
    Rng rng(95);
    std::vector<std::string> args = {"interpolate", "--weights", dir.file("w.bin"),
                                     "--output", dir.file("out.png"), "--inputs"};
    for (int i = 0; i < 4; ++i) {
        const std::string p = dir.file("f" + std::to_string(i) + ".png");
        save_image(random_image(rng, 24, 32), p);
        args.push_back(p);
    }
    std::string out;
    CHECK(cli(args, &out) == 0);
    Tensor result = load_image(dir.file("out.png"));
    CHECK(result.shape() == Shape{3, 24, 32});

    // a missing input is an IO failure naming the file
    args[6] = dir.file("nope.png");
    std::string err;
    CHECK(cli(args, &out, &err) == 2);
    CHECK(err.find("nope.png") != std::string::npos);
}

TEST_CASE("cli train-toy writes weights interpolate can consume") {
    TmpDir dir("edenvfi_cli_train");
    std::string out;
    CHECK(cli({"train-toy", "--steps", "2", "--seed", "3", "--size", "16", "--out",
               dir.file("toy.bin"), "--history", dir.file("h.csv")},
              &out) == 0);
    CHECK(fs::exists(dir.file("toy.bin")));
    std::ifstream h(dir.file("h.csv"));
    std::string line;
    std::getline(h, line);
    CHECK(line == "step,loss,lr");

    Rng rng(96);
    std::vector<std::string> args = {"interpolate", "--weights", dir.file("toy.bin"),
                                     "--output", dir.file("mid.ppm"), "--inputs"};
    for (int i = 0; i < 4; ++i) {
        const std::string p = dir.file("g" + std::to_string(i) + ".ppm");
        save_image(random_image(rng, 16, 16), p);
        args.push_back(p);
    }
    CHECK(cli(args, &out) == 0);
    CHECK(load_image(dir.file("mid.ppm")).shape() == Shape{3, 16, 16});
}

TEST_CASE("cli eval walks a dataset directory") {
    TmpDir dir("edenvfi_cli_eval");
    Model m = build_model(tiny_config(), 33, DType::f32);
    save_weights(m, dir.file("w.bin"));
    Rng rng(97);
    for (const char* sub : {"a", "b"}) {
        fs::create_directories(dir.path / sub);
        for (const char* name : {"in0", "in1", "in2", "in3", "gt"})
            save_image(random_image(rng, 16, 16),
                       (dir.path / sub / (std::string(name) + ".png")).string());
    }
    std::string out;
    CHECK(cli({"eval", "--dataset", dir.path.string(), "--weights", dir.file("w.bin")}, &out) ==
          0);
    CHECK(out.find("a") != std::string::npos);
    CHECK(out.find("b") != std::string::npos);
    CHECK(out.find("mean") != std::string::npos);
    CHECK(out.find("dB") != std::string::npos);

    std::string err;
    CHECK(cli({"eval", "--dataset", (dir.path / "empty").string(), "--weights",
               dir.file("w.bin")},
              &out, &err) == 2);
}

TEST_CASE("cli bench prints a csv row") {
    TmpDir dir("edenvfi_cli_bench");
    Model m = build_model(tiny_config(), 44, DType::f32);
    save_weights(m, dir.file("w.bin"));
    std::string out;
    CHECK(cli({"bench", "--width", "32", "--height", "32", "--runs", "3", "--weights",
               dir.file("w.bin")},
              &out) == 0);
    CHECK(out.find("32,32,3,") != std::string::npos);
}
