// EDENVFI assembly: configuration, construction, forward, serialization
#ifndef EDENVFI_MODEL_HPP
#define EDENVFI_MODEL_HPP

#include <optional>
#include <string>

#include "edenvfi/decoder.hpp"
#include "edenvfi/encoders.hpp"
#include "edenvfi/synthesis.hpp"

namespace edenvfi {

struct ModelConfig {
    int depth1 = 9, depth2 = 12;     // transformer depths per stage
    int dim1 = 64, dim2 = 128;       // stage embedding dims
    int sr1 = 16, sr2 = 8;           // spatial reduction ratios
    int heads1 = 1, heads2 = 2;
    int mlp_ratio = 4;
    int cnn32 = 32, cnn64 = 64, cnn128 = 128;
    int kernel_size = 5;             // EDSC separable kernel size
    int input_frames = 4;
    double leaky_slope = 0.1;
    bool use_pvt = true, use_cnn = true;

    bool operator==(const ModelConfig&) const = default;
};

// `key = value` lines, ASCII, order-insensitive
std::string config_to_text(const ModelConfig& cfg);
ModelConfig config_from_text(const std::string& text);

struct Model {
    ModelConfig cfg;
    DType dtype = DType::f32;
    std::optional<PvtEncoder> pvt;
    std::optional<CnnEncoder> cnn;
    Decoder decoder;
    SynthesisBlock synth;

    // trainable parameters in a stable order with stable names
    nn::ParamList params() const;
    // input sizes are padded up to a multiple of this before the forward pass
    int alignment() const;
    // frames I0..I3 each [3,H,W] -> I_out [3,H,W]; output is not clamped
    Variable forward(Tape& t, const std::array<Variable, 4>& frames) const;
    // recording-off forward on plain tensors
    Tensor infer(const std::array<Tensor, 4>& frames) const;
};

Model build_model(const ModelConfig& cfg, uint64_t seed, DType dt = DType::f32);
int64_t count_parameters(const Model& model);

// binary weights format: magic "EDVF", version, config text, named f32 entries
void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

} // namespace edenvfi

#endif
