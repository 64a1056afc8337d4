#include <cmath>
#include <cstdio>

#include "edenvfi/eval.hpp"
#include "edenvfi/training.hpp"

namespace edenvfi {

Adamax::Adamax(nn::ParamList p, double lr_) : params(std::move(p)), lr(lr_) {
    m.reserve(params.size());
    u.reserve(params.size());
    for (const nn::NamedParam& np : params) {
        m.push_back(Tensor::zeros(np.param.value().shape(), np.param.value().dtype()));
        u.push_back(Tensor::zeros(np.param.value().shape(), np.param.value().dtype()));
    }
}

namespace {

template <typename T>
void adamax_update(T* th, T* mi, T* ui, const T* g, int64_t n, double b1, double b2,
                   double eps, double corr, const std::string& name) {
    for (int64_t j = 0; j < n; ++j) {
        const double gv = static_cast<double>(g[j]);
        if (std::isnan(gv))
            throw NumericError("NaN gradient in parameter '" + name + "'");
        const double mv = b1 * static_cast<double>(mi[j]) + (1.0 - b1) * gv;
        const double uv = std::max(b2 * static_cast<double>(ui[j]), std::abs(gv));
        mi[j] = static_cast<T>(mv);
        ui[j] = static_cast<T>(uv);
        th[j] = static_cast<T>(static_cast<double>(th[j]) - corr * mv / (uv + eps));
    }
}

} // namespace

void Adamax::step() {
    ++t;
    const double corr = lr / (1.0 - std::pow(beta1, static_cast<double>(t)));
    for (size_t i = 0; i < params.size(); ++i) {
        nn::NamedParam& np = params[i];
        Tensor& v = np.param.value();
        const Tensor g = np.param.grad();
        const int64_t n = v.numel();
        if (v.dtype() == DType::f32)
            adamax_update(v.data<float>(), m[i].data<float>(), u[i].data<float>(),
                          g.data<float>(), n, beta1, beta2, epsilon, corr, np.name);
        else
            adamax_update(v.data<double>(), m[i].data<double>(), u[i].data<double>(),
                          g.data<double>(), n, beta1, beta2, epsilon, corr, np.name);
        np.param.zero_grad();
    }
}

double PlateauSchedule::update(double epoch_metric, double lr) {
    if (epoch_metric > best) {
        best = epoch_metric;
        epochs_since_improvement = 0;
    } else if (++epochs_since_improvement >= patience) {
        lr *= factor;
        epochs_since_improvement = 0;
    }
    return lr;
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kEpochSteps = 50;
constexpr int kValSamples = 6;

} // namespace

double Pattern::eval(int c, int x, int y, double t) const {
    const double px = x - dx * t, py = y - dy * t;
    double v = 0.5;
    for (const Sinusoid& s : comp[static_cast<size_t>(c)])
        v += s.amp * std::sin(kTwoPi * (s.fx * px + s.fy * py) / size + s.phase);
    return v;
}

Tensor Pattern::frame(double t) const {
    Tensor out = Tensor::empty({3, size, size}, DType::f32);
    float* d = out.data<float>();
    const int64_t plane = static_cast<int64_t>(size) * size;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                d[c * plane + y * size + x] = static_cast<float>(eval(c, x, y, t));
    return out;
}

Pattern make_pattern(Rng& rng, int size) {
    Pattern p;
    p.size = size;
    p.dx = rng.uniform(-2.0, 2.0);
    p.dy = rng.uniform(-2.0, 2.0);
    // moderate spatial frequencies: blending translating content at this band
    // ghosts visibly, so motion-compensated synthesis has measurable headroom
    double raw[Pattern::kComponents], total = 0.0;
    for (int k = 0; k < Pattern::kComponents; ++k) {
        const double r = rng.uniform(6.0, 12.0);     // cycles per image
        const double theta = rng.uniform(0.0, kTwoPi);
        auto& s = p.comp[0][static_cast<size_t>(k)];
        s.fx = r * std::cos(theta);
        s.fy = r * std::sin(theta);
        s.phase = rng.uniform(0.0, kTwoPi);
        raw[k] = rng.uniform(0.2, 1.0);
        total += raw[k];
    }
    // amplitudes sum to 0.45 so values stay inside [0.05, 0.95]
    for (int k = 0; k < Pattern::kComponents; ++k)
        p.comp[0][static_cast<size_t>(k)].amp = 0.45 * raw[k] / total;
    for (int c = 1; c < 3; ++c) p.comp[static_cast<size_t>(c)] = p.comp[0];
    return p;
}

SyntheticSample synth_sample(Rng& rng, int size) {
    if (size < 16) throw ContractError("synth_sample needs size >= 16, got " + std::to_string(size));
    const Pattern p = make_pattern(rng, size);
    SyntheticSample s;
    s.dx = p.dx;
    s.dy = p.dy;
    for (int i = 0; i < 4; ++i) s.frames[static_cast<size_t>(i)] = p.frame(i);
    s.gt = p.frame(1.5);
    return s;
}

std::vector<SyntheticSample> synth_batch(uint64_t seed, int n, int size) {
    Rng rng(seed);
    std::vector<SyntheticSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(synth_sample(rng, size));
    return out;
}

void write_history_csv(const std::vector<TrainRecord>& history, std::ostream& out) {
    out << "step,loss,lr\n";
    char line[96];
    for (const TrainRecord& r : history) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", r.step, r.loss, r.lr);
        out << line;
    }
}

void run_training(Model& model, int steps, uint64_t seed, int size,
                  std::vector<TrainRecord>& history) {
    Adamax opt(model.params());
    PlateauSchedule sched;
    Rng data_rng(seed ^ 0x5deece66dULL);
    const std::vector<SyntheticSample> val = synth_batch(seed ^ 0xb5026f5aa96619e9ULL,
                                                         kValSamples, size);
    for (int step = 1; step <= steps; ++step) {
        const SyntheticSample s = synth_sample(data_rng, size);
        Tape tape;
        std::array<Variable, 4> frames;
        for (int i = 0; i < 4; ++i)
            frames[static_cast<size_t>(i)] = Variable::leaf(s.frames[static_cast<size_t>(i)], false);
        const Variable out = model.forward(tape, frames);
        const Variable loss = nn::l1_loss(tape, out, Variable::leaf(s.gt, false));
        const double lval = loss.value().at(0);
        if (std::isnan(lval))
            throw TrainingError("loss diverged to NaN at step " + std::to_string(step));
        if (std::isinf(lval))
            throw TrainingError("loss diverged to infinity at step " + std::to_string(step));
        tape.backward(loss);
        opt.step();
        history.push_back({step, lval, opt.lr});
        if (step % kEpochSteps == 0) {
            double total = 0.0;
            for (const SyntheticSample& v : val)
                total += psnr(model.infer(v.frames), v.gt);
            opt.lr = sched.update(total / kValSamples, opt.lr);
        }
    }
}

TrainResult train_toy(const ModelConfig& cfg, int steps, uint64_t seed, int size) {
    TrainResult res{build_model(cfg, seed, DType::f32), {}};
    run_training(res.model, steps, seed, size, res.history);
    return res;
}

} // namespace edenvfi
