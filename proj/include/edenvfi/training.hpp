// toy-scale training: L1 + AdaMAX + plateau halving on synthetic motion
#ifndef EDENVFI_TRAINING_HPP
#define EDENVFI_TRAINING_HPP

#include <limits>
#include <ostream>
#include <vector>

#include "edenvfi/model.hpp"

namespace edenvfi {

// infinity-norm Adam; math in double, state stored at parameter precision
struct Adamax {
    nn::ParamList params;
    std::vector<Tensor> m, u; // first moment, exponentially-decayed max |g|
    int64_t t = 0;
    double lr = 0.0005;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    explicit Adamax(nn::ParamList params, double lr = 0.0005);
    // consumes and clears accumulated gradients; a NaN gradient raises a
    // numeric error naming the parameter
    void step();
};

// halves lr after `patience` epochs without metric improvement (higher is better)
struct PlateauSchedule {
    double best = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    int patience = 5;
    double factor = 0.5;

    double update(double epoch_metric, double lr);
};

struct Sinusoid {
    double fx = 0.0, fy = 0.0, amp = 0.0, phase = 0.0;
};

// sum of seeded sinusoids per channel, translated rigidly over time; frames
// are closed-form point samples, so any t (including 1.5) is exact
struct Pattern {
    static constexpr int kComponents = 2;

    std::array<std::array<Sinusoid, kComponents>, 3> comp{};
    double dx = 0.0, dy = 0.0;
    int size = 0;

    double eval(int c, int x, int y, double t) const;
    Tensor frame(double t) const; // [3,size,size] f32
};

Pattern make_pattern(Rng& rng, int size);

struct SyntheticSample {
    std::array<Tensor, 4> frames; // [3,size,size] at t = 0,1,2,3
    Tensor gt;                    // closed-form pattern at t = 1.5
    double dx = 0.0, dy = 0.0;    // pixels per frame step
};

SyntheticSample synth_sample(Rng& rng, int size);
std::vector<SyntheticSample> synth_batch(uint64_t seed, int n, int size);

struct TrainRecord {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

// step,loss,lr lines with a header row
void write_history_csv(const std::vector<TrainRecord>& history, std::ostream& out);

// one synthetic sample per step, batch size 1; plateau update on held-out
// PSNR every 50 steps; a non-finite loss raises a training error with the
// step index
void run_training(Model& model, int steps, uint64_t seed, int size,
                  std::vector<TrainRecord>& history);

struct TrainResult {
    Model model;
    std::vector<TrainRecord> history;
};

TrainResult train_toy(const ModelConfig& cfg, int steps, uint64_t seed, int size = 48);

} // namespace edenvfi

#endif
