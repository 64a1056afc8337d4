// PSNR, evaluation-set loading, and the runtime / peak-memory benchmark
#ifndef EDENVFI_EVAL_HPP
#define EDENVFI_EVAL_HPP

#include <array>
#include <functional>
#include <string>

#include "edenvfi/model.hpp"

namespace edenvfi {

// 10*log10(1/MSE) over all channels and pixels, both images clamped to [0,1]
// first; identical images give +infinity
double psnr(const Tensor& a, const Tensor& b);

struct QuadrupletRecord {
    std::array<Tensor, 4> frames; // I0..I3 in temporal order
    Tensor gt;                    // midpoint frame I_1.5
};

// reads in0..in3 and gt from dir, each as .png or .ppm
QuadrupletRecord load_quadruplet(const std::string& dir);

struct BenchReport {
    int width = 0, height = 0, runs = 0;
    double mean_s = 0.0, std_s = 0.0;
    int64_t peak_bytes = 0;
};

std::string bench_csv(const BenchReport& r);  // width,height,runs,mean_s,std_s,peak_bytes
std::string bench_text(const BenchReport& r); // aligned human-readable block

// 1 warm-up forward + `runs` timed forwards on random frames synthesized
// once; peak_bytes is the tensor-allocator high-water mark over one timed
// forward. The hook, when set, fires per forward with timed=false for the
// warm-up, so tests can assert the statistics cover exactly `runs` samples.
BenchReport benchmark(const Model& model, int width, int height, int runs,
                      const std::function<void(bool timed)>& hook = {});

} // namespace edenvfi

#endif
