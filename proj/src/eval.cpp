#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "edenvfi/eval.hpp"
#include "edenvfi/image_io.hpp"

namespace edenvfi {

double psnr(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("psnr: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
    auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    double sq = 0.0;
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double d = clamp01(a.at(i)) - clamp01(b.at(i));
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

QuadrupletRecord load_quadruplet(const std::string& dir) {
    auto pick = [&](const std::string& base) {
        const std::string png = dir + "/" + base + ".png";
        const std::string ppm = dir + "/" + base + ".ppm";
        if (std::filesystem::exists(png)) return load_image(png);
        if (std::filesystem::exists(ppm)) return load_image(ppm);
        throw IoError(base + ".png not found in '" + dir + "'");
    };
    QuadrupletRecord rec;
    for (int i = 0; i < 4; ++i) rec.frames[static_cast<size_t>(i)] = pick("in" + std::to_string(i));
    rec.gt = pick("gt");
    for (int i = 0; i < 4; ++i)
        if (rec.frames[static_cast<size_t>(i)].shape() != rec.gt.shape())
            throw FormatError("in" + std::to_string(i) + " is " +
                              shape_str(rec.frames[static_cast<size_t>(i)].shape()) +
                              " but gt is " + shape_str(rec.gt.shape()));
    return rec;
}

std::string bench_csv(const BenchReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.6g,%.6g,%lld", r.width, r.height, r.runs,
                  r.mean_s, r.std_s, static_cast<long long>(r.peak_bytes));
    return buf;
}

std::string bench_text(const BenchReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "resolution   %dx%d\n"
                  "runs         %d\n"
                  "mean time    %.4f s\n"
                  "std dev      %.4f s\n"
                  "peak memory  %.1f MB (%lld bytes)\n",
                  r.width, r.height, r.runs, r.mean_s, r.std_s,
                  static_cast<double>(r.peak_bytes) / (1024.0 * 1024.0),
                  static_cast<long long>(r.peak_bytes));
    return buf;
}

BenchReport benchmark(const Model& model, int width, int height, int runs,
                      const std::function<void(bool timed)>& hook) {
    if (runs < 3) throw ContractError("benchmark needs runs >= 3, got " + std::to_string(runs));
    Rng rng(42);
    std::array<Tensor, 4> frames;
    for (auto& f : frames) {
        f = Tensor::empty({3, height, width}, model.dtype);
        for (int64_t i = 0; i < f.numel(); ++i) f.set(i, rng.uniform());
    }

    if (hook) hook(false);
    (void)model.infer(frames); // warm-up, untimed

    BenchReport rep;
    rep.width = width;
    rep.height = height;
    rep.runs = runs;
    std::vector<double> times(static_cast<size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        if (r == 0) memstat::reset_peak();
        if (hook) hook(true);
        const auto t0 = std::chrono::steady_clock::now();
        (void)model.infer(frames);
        const auto t1 = std::chrono::steady_clock::now();
        if (r == 0) rep.peak_bytes = memstat::peak_bytes();
        times[static_cast<size_t>(r)] = std::chrono::duration<double>(t1 - t0).count();
    }
    double sum = 0.0;
    for (double t : times) sum += t;
    rep.mean_s = sum / runs;
    double var = 0.0;
    for (double t : times) var += (t - rep.mean_s) * (t - rep.mean_s);
    rep.std_s = std::sqrt(var / (runs > 1 ? runs - 1 : 1));
    return rep;
}

} // namespace edenvfi
