// model assembly, config text, and the EDVF weights format
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "edenvfi/model.hpp"

namespace edenvfi {

namespace {

std::string int_pair(int a, int b) { return std::to_string(a) + "," + std::to_string(b); }

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_ints(const std::string& v, size_t count, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stoi(trim(part)));
        } catch (const std::exception&) {
            throw FormatError("config: bad integer in '" + key + " = " + v + "'");
        }
    }
    if (out.size() != count)
        throw FormatError("config: '" + key + "' expects " + std::to_string(count) +
                          " comma-separated integers, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw FormatError("config: '" + key + "' must be true or false, got '" + v + "'");
}

} // namespace

std::string config_to_text(const ModelConfig& cfg) {
    char slope[64];
    std::snprintf(slope, sizeof(slope), "%.17g", cfg.leaky_slope);
    std::string out;
    out += "depths = " + int_pair(cfg.depth1, cfg.depth2) + "\n";
    out += "dims = " + int_pair(cfg.dim1, cfg.dim2) + "\n";
    out += "sr_ratios = " + int_pair(cfg.sr1, cfg.sr2) + "\n";
    out += "num_heads = " + int_pair(cfg.heads1, cfg.heads2) + "\n";
    out += "mlp_ratio = " + std::to_string(cfg.mlp_ratio) + "\n";
    out += "cnn_channels = " + std::to_string(cfg.cnn32) + "," + std::to_string(cfg.cnn64) +
           "," + std::to_string(cfg.cnn128) + "\n";
    out += "kernel_size = " + std::to_string(cfg.kernel_size) + "\n";
    out += "input_frames = " + std::to_string(cfg.input_frames) + "\n";
    out += std::string("leaky_slope = ") + slope + "\n";
    out += std::string("use_pvt = ") + (cfg.use_pvt ? "true" : "false") + "\n";
    out += std::string("use_cnn = ") + (cfg.use_cnn ? "true" : "false") + "\n";
    return out;
}

ModelConfig config_from_text(const std::string& text) {
    ModelConfig cfg;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "depths") {
            auto v = parse_ints(val, 2, key);
            cfg.depth1 = v[0];
            cfg.depth2 = v[1];
        } else if (key == "dims") {
            auto v = parse_ints(val, 2, key);
            cfg.dim1 = v[0];
            cfg.dim2 = v[1];
        } else if (key == "sr_ratios") {
            auto v = parse_ints(val, 2, key);
            cfg.sr1 = v[0];
            cfg.sr2 = v[1];
        } else if (key == "num_heads") {
            auto v = parse_ints(val, 2, key);
            cfg.heads1 = v[0];
            cfg.heads2 = v[1];
        } else if (key == "mlp_ratio") {
            cfg.mlp_ratio = parse_ints(val, 1, key)[0];
        } else if (key == "cnn_channels") {
            auto v = parse_ints(val, 3, key);
            cfg.cnn32 = v[0];
            cfg.cnn64 = v[1];
            cfg.cnn128 = v[2];
        } else if (key == "kernel_size") {
            cfg.kernel_size = parse_ints(val, 1, key)[0];
        } else if (key == "input_frames") {
            cfg.input_frames = parse_ints(val, 1, key)[0];
        } else if (key == "leaky_slope") {
            char* end = nullptr;
            cfg.leaky_slope = std::strtod(val.c_str(), &end);
            if (end == val.c_str()) throw FormatError("config: bad real in 'leaky_slope'");
        } else if (key == "use_pvt") {
            cfg.use_pvt = parse_bool(val, key);
        } else if (key == "use_cnn") {
            cfg.use_cnn = parse_bool(val, key);
        } else {
            throw FormatError("config: unknown key '" + key + "'");
        }
    }
    return cfg;
}

namespace {

void validate_config(const ModelConfig& cfg) {
    if (!cfg.use_pvt && !cfg.use_cnn)
        throw ConfigError("model config disables both encoders");
    if (cfg.input_frames != 4)
        throw ConfigError("input_frames must be 4, got " + std::to_string(cfg.input_frames));
    if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0)
        throw ConfigError("kernel_size must be odd and positive, got " +
                          std::to_string(cfg.kernel_size));
    if (cfg.depth1 < 0 || cfg.depth2 < 0) throw ConfigError("depths must be non-negative");
    if (cfg.sr1 < 1 || cfg.sr2 < 1) throw ConfigError("sr_ratios must be positive");
    if (cfg.use_pvt && cfg.use_cnn && (cfg.dim1 != cfg.cnn64 || cfg.dim2 != cfg.cnn128))
        throw ConfigError("fusion requires dims " + int_pair(cfg.dim1, cfg.dim2) +
                          " to match cnn channels " + int_pair(cfg.cnn64, cfg.cnn128));
}

} // namespace

Model build_model(const ModelConfig& cfg, uint64_t seed, DType dt) {
    validate_config(cfg);
    Rng rng(seed);
    Model m;
    m.cfg = cfg;
    m.dtype = dt;
    if (cfg.use_pvt) {
        PvtStageConfig s1{cfg.dim1, cfg.depth1, cfg.sr1, cfg.heads1, cfg.mlp_ratio, 4};
        PvtStageConfig s2{cfg.dim2, cfg.depth2, cfg.sr2, cfg.heads2, cfg.mlp_ratio, 2};
        m.pvt = PvtEncoder::make(s1, s2, rng, dt);
    }
    if (cfg.use_cnn)
        m.cnn = CnnEncoder::make(3 * cfg.input_frames, cfg.cnn32, cfg.cnn64, cfg.cnn128,
                                 cfg.leaky_slope, rng, dt);
    const int l128 = cfg.use_cnn ? cfg.cnn128 : cfg.dim2;
    const int l64 = cfg.use_cnn ? cfg.cnn64 : cfg.dim1;
    m.decoder = Decoder::make(l128, l64, cfg.leaky_slope, rng, dt);
    m.synth = SynthesisBlock::make(l64, cfg.kernel_size, cfg.leaky_slope, rng, dt);
    return m;
}

nn::ParamList Model::params() const {
    nn::ParamList out;
    if (pvt) pvt->collect("pvt", out);
    if (cnn) cnn->collect("cnn", out);
    decoder.collect("decoder", out);
    synth.collect("synth", out);
    return out;
}

int Model::alignment() const {
    int a = 16;
    if (cfg.use_pvt) a = std::lcm(a, std::lcm(4 * cfg.sr1, 8 * cfg.sr2));
    return a;
}

Variable Model::forward(Tape& t, const std::array<Variable, 4>& frames) const {
    const Tensor& f0 = frames[0].value();
    if (f0.rank() != 3 || f0.dim(0) != 3)
        throw ShapeError("forward: frames must be [3,H,W], got " + shape_str(f0.shape()));
    for (int i = 1; i < 4; ++i)
        if (!frames[i].value().same_shape(f0))
            throw ShapeError("forward: frame " + std::to_string(i) + " shape " +
                             shape_str(frames[i].value().shape()) + " differs from frame 0 " +
                             shape_str(f0.shape()));
    const int h = f0.dim(1), w = f0.dim(2);
    const int a = alignment();
    const int ph = (a - h % a) % a, pw = (a - w % a) % a;

    std::array<Variable, 4> padded = frames;
    if (ph || pw)
        for (int i = 0; i < 4; ++i)
            padded[i] = nn::pad_bottom_right_symmetric(t, frames[i], ph, pw);
    const int hp = h + ph, wp = w + pw;

    Variable cat = nn::concat_channels(t, {padded[0], padded[1], padded[2], padded[3]});

    const int l128 = cfg.use_cnn ? cfg.cnn128 : cfg.dim2;
    const int l64 = cfg.use_cnn ? cfg.cnn64 : cfg.dim1;
    auto zeros = [&](int c, int div) {
        return Variable::leaf(Tensor::zeros({c, hp / div, wp / div}, dtype), false);
    };

    Variable rho, level64, level128;
    if (cnn) {
        CnnEncoderState s = cnn->forward(t, cat);
        rho = s.rho;
        level64 = s.level64;
        level128 = s.level128;
    } else {
        rho = zeros(l128, 16);
        level64 = zeros(l64, 4);
        level128 = zeros(l128, 8);
    }

    Variable beta64, beta128;
    if (pvt) {
        PvtFeatures f = pvt->forward(t, cat);
        beta64 = f.beta64;
        beta128 = f.beta128;
    } else {
        beta64 = zeros(l64, 4);
        beta128 = zeros(l128, 8);
    }

    Variable phi64 = decoder.forward(t, rho, level128, beta128, level64, beta64);
    nn::EdscMaps maps = synth.generate(t, phi64);
    Variable out = nn::edsc_apply(t, padded, maps);
    return (ph || pw) ? nn::crop2d(t, out, h, w) : out;
}

Tensor Model::infer(const std::array<Tensor, 4>& frames) const {
    Tape tape;
    tape.set_recording(false);
    std::array<Variable, 4> vars;
    for (int i = 0; i < 4; ++i) vars[i] = Variable::leaf(frames[i], false);
    return forward(tape, vars).value();
}

int64_t count_parameters(const Model& model) { return nn::param_count(model.params()); }

namespace {

constexpr char kMagic[4] = {'E', 'D', 'V', 'F'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& f, const char* what) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw FormatError(std::string("weights file truncated reading ") + what);
    return v;
}

} // namespace

void save_weights(const Model& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    const std::string cfg = config_to_text(model.cfg);
    write_u32(f, static_cast<uint32_t>(cfg.size()));
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    for (const nn::NamedParam& p : model.params()) {
        write_u32(f, static_cast<uint32_t>(p.name.size()));
        f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const Tensor v = p.param.value().dtype() == DType::f32 ? p.param.value()
                                                               : p.param.value().astype(DType::f32);
        write_u32(f, static_cast<uint32_t>(v.rank()));
        for (int i = 0; i < v.rank(); ++i) write_u32(f, static_cast<uint32_t>(v.dim(i)));
        f.write(reinterpret_cast<const char*>(v.data<float>()),
                static_cast<std::streamsize>(v.numel() * 4));
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

Model load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    char magic[4] = {};
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic in '" + path + "'");
    const uint32_t version = read_u32(f, "version");
    if (version != kVersion)
        throw FormatError("unknown weights version " + std::to_string(version));
    const uint32_t cfg_len = read_u32(f, "config length");
    std::string cfg_text(cfg_len, '\0');
    f.read(cfg_text.data(), cfg_len);
    if (!f) throw FormatError("weights file truncated reading config");

    Model model = build_model(config_from_text(cfg_text), 0, DType::f32);

    std::map<std::string, Tensor> entries;
    while (true) {
        uint32_t name_len = 0;
        f.read(reinterpret_cast<char*>(&name_len), 4);
        if (f.eof()) break;
        if (!f) throw FormatError("weights file truncated reading entry name length");
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (!f) throw FormatError("weights file truncated reading entry name");
        const uint32_t rank = read_u32(f, ("rank of '" + name + "'").c_str());
        Shape shape;
        int64_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            shape.push_back(static_cast<int>(read_u32(f, ("shape of '" + name + "'").c_str())));
            numel *= shape.back();
        }
        Tensor v = Tensor::empty(shape, DType::f32);
        f.read(reinterpret_cast<char*>(v.data<float>()),
               static_cast<std::streamsize>(numel * 4));
        if (!f) throw FormatError("weights file truncated reading data of '" + name + "'");
        if (!entries.emplace(name, std::move(v)).second)
            throw FormatError("duplicate entry '" + name + "'");
    }

    for (nn::NamedParam& p : model.params()) {
        auto it = entries.find(p.name);
        if (it == entries.end()) throw FormatError("missing entry '" + p.name + "'");
        if (it->second.shape() != p.param.value().shape())
            throw FormatError("entry '" + p.name + "' has shape " +
                              shape_str(it->second.shape()) + ", config expects " +
                              shape_str(p.param.value().shape()));
        p.param.value() = it->second;
        entries.erase(it);
    }
    if (!entries.empty())
        throw FormatError("unexpected entry '" + entries.begin()->first + "'");
    return model;
}

} // namespace edenvfi
