#include <algorithm>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"

#include "edenvfi/cli.hpp"
#include "edenvfi/eval.hpp"
#include "edenvfi/gradcheck_suite.hpp"
#include "edenvfi/image_io.hpp"
#include "edenvfi/training.hpp"

namespace edenvfi {

namespace {

std::pair<int, int> parse_depths(const std::string& s) {
    const size_t comma = s.find(',');
    if (comma == std::string::npos)
        throw ConfigError("--depths expects D1,D2, got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ConfigError("--depths expects D1,D2, got '" + s + "'");
    }
}

std::string psnr_str(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

int cmd_interpolate(const std::string& weights, const std::vector<std::string>& inputs,
                    const std::string& output, std::ostream& out) {
    const Model model = load_weights(weights);
    std::array<Tensor, 4> frames;
    for (int i = 0; i < 4; ++i)
        frames[static_cast<size_t>(i)] = load_image(inputs[static_cast<size_t>(i)]);
    save_image(model.infer(frames), output);
    out << "wrote " << output << "\n";
    return 0;
}

int cmd_train_toy(int steps, uint64_t seed, int size, const std::string& out_path,
                  const std::string& history_path, std::ostream& out) {
    ModelConfig cfg;
    cfg.depth1 = 1;
    cfg.depth2 = 1;
    const TrainResult res = train_toy(cfg, steps, seed, size);
    save_weights(res.model, out_path);
    if (!history_path.empty()) {
        std::ofstream f(history_path);
        if (!f) throw IoError("cannot open '" + history_path + "' for writing");
        write_history_csv(res.history, f);
    }
    if (!res.history.empty())
        out << "final loss " << res.history.back().loss << " after " << steps << " steps\n";
    out << "wrote " << out_path << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& op, double tolerance, std::ostream& out) {
    std::vector<std::string> names;
    if (op == "all")
        names = gradcheck_names();
    else
        names.push_back(op);
    bool ok = true;
    for (const std::string& name : names) {
        const double err = run_gradcheck(name);
        const bool pass = err <= tolerance;
        ok = ok && pass;
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s %.3e  %s\n", name.c_str(), err,
                      pass ? "ok" : "FAIL");
        out << line;
    }
    if (!ok) throw NumericError("gradient check exceeded tolerance");
    return 0;
}

int cmd_params(const std::string& depths, bool no_pvt, bool no_cnn, std::ostream& out) {
    ModelConfig cfg;
    std::tie(cfg.depth1, cfg.depth2) = parse_depths(depths);
    cfg.use_pvt = !no_pvt;
    cfg.use_cnn = !no_cnn;
    out << count_parameters(build_model(cfg, 0)) << "\n";
    return 0;
}

int cmd_eval(const std::string& dataset, const std::string& weights, std::ostream& out) {
    const Model model = load_weights(weights);
    namespace fs = std::filesystem;
    std::vector<std::string> dirs;
    if (fs::exists(fs::path(dataset) / "in0.png") || fs::exists(fs::path(dataset) / "in0.ppm")) {
        dirs.push_back(dataset);
    } else {
        if (!fs::is_directory(dataset)) throw IoError("dataset '" + dataset + "' not found");
        for (const auto& e : fs::directory_iterator(dataset))
            if (e.is_directory()) dirs.push_back(e.path().string());
        std::sort(dirs.begin(), dirs.end());
    }
    if (dirs.empty()) throw IoError("no quadruplet records under '" + dataset + "'");
    double total = 0.0;
    for (const std::string& d : dirs) {
        const QuadrupletRecord rec = load_quadruplet(d);
        const double p = psnr(model.infer(rec.frames), rec.gt);
        total += p;
        out << fs::path(d).filename().string() << "  " << psnr_str(p) << " dB\n";
    }
    out << "mean  " << psnr_str(total / static_cast<double>(dirs.size())) << " dB\n";
    return 0;
}

int cmd_bench(int width, int height, int runs, const std::string& weights, std::ostream& out) {
    Model model = weights.empty() ? build_model(ModelConfig{}, 0) : load_weights(weights);
    const BenchReport rep = benchmark(model, width, height, runs);
    out << bench_text(rep) << bench_csv(rep) << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"EDENVFI dual-encoder video frame interpolation", "edenvfi"};
    app.require_subcommand(1);

    auto* interp = app.add_subcommand("interpolate", "synthesize the midpoint frame");
    std::string weights, output;
    std::vector<std::string> inputs;
    interp->add_option("--weights", weights, "weights file")->required();
    interp->add_option("--inputs", inputs, "four frames in temporal order")
        ->expected(4)
        ->required();
    interp->add_option("--output", output, "output image (.png or .ppm)")->required();

    auto* train = app.add_subcommand("train-toy", "train a tiny model on synthetic motion");
    int steps = 500, size = 48;
    uint64_t seed = 7;
    std::string train_out, history;
    train->add_option("--steps", steps, "training steps")->required();
    train->add_option("--seed", seed, "rng seed");
    train->add_option("--size", size, "synthetic frame size");
    train->add_option("--out", train_out, "weights file to write")->required();
    train->add_option("--history", history, "loss history CSV path");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::string op = "all";
    double tolerance = 1e-4;
    gc->add_option("--op", op, "scenario name or 'all'");
    gc->add_option("--tolerance", tolerance, "max relative error");

    auto* params = app.add_subcommand("params", "print the parameter count");
    std::string depths = "9,12";
    bool no_pvt = false, no_cnn = false;
    params->add_option("--depths", depths, "stage depths D1,D2");
    params->add_flag("--no-pvt", no_pvt, "drop the transformer encoder");
    params->add_flag("--no-cnn", no_cnn, "drop the CNN encoder");

    auto* ev = app.add_subcommand("eval", "PSNR over a quadruplet dataset");
    std::string dataset, eval_weights;
    ev->add_option("--dataset", dataset, "record directory or directory of records")->required();
    ev->add_option("--weights", eval_weights, "weights file")->required();

    auto* bench = app.add_subcommand("bench", "runtime and peak-memory benchmark");
    int width = 0, height = 0, runs = 3;
    std::string bench_weights;
    bench->add_option("--width", width, "frame width")->required();
    bench->add_option("--height", height, "frame height")->required();
    bench->add_option("--runs", runs, "timed runs (>= 3)");
    bench->add_option("--weights", bench_weights, "weights file (default: fresh model)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        // collapse CLI11's per-error codes onto the documented usage code
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    try {
        if (interp->parsed()) return cmd_interpolate(weights, inputs, output, out);
        if (train->parsed()) return cmd_train_toy(steps, seed, size, train_out, history, out);
        if (gc->parsed()) return cmd_gradcheck(op, tolerance, out);
        if (params->parsed()) return cmd_params(depths, no_pvt, no_cnn, out);
        if (ev->parsed()) return cmd_eval(dataset, eval_weights, out);
        if (bench->parsed()) return cmd_bench(width, height, runs, bench_weights, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

} // namespace edenvfi
