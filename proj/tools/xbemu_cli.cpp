// xbemu: crossbar non-ideality experiments from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "xbemu/experiment.hpp"

namespace fs = std::filesystem;
using namespace xbemu;

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

ExperimentSpec load(const CommonArgs& args) {
    auto kv = KeyValueConfig::load(args.config);
    if (args.seed) kv.set("seed", std::to_string(*args.seed));
    return spec_from_config(kv);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct Corpora {
    CrossbarDataset train, validation;
    LabelStats train_stats, validation_stats;
};

Corpora make_corpora(const ExperimentSpec& spec) {
    Corpora c;
    auto train_spec = spec.datagen;
    auto val_spec = spec.datagen;
    val_spec.samples_per_level = spec.validation_per_level;
    val_spec.seed = spec.datagen.seed + 0x5bd1e995ull;
    std::cerr << "labeling " << train_spec.total() << " training and " << val_spec.total() << " validation samples ("
              << to_string(spec.label_solver) << " solver)\n";
    c.train = label_with_fr(generate_samples(train_spec, spec.crossbar), spec.crossbar, spec.label_solver, nullptr,
                            &c.train_stats, spec.threads);
    c.validation = label_with_fr(generate_samples(val_spec, spec.crossbar), spec.crossbar, spec.label_solver,
                                 &c.train.scalers, &c.validation_stats, spec.threads);
    return c;
}

Corpora load_or_make_corpora(const ExperimentSpec& spec, const fs::path& data_dir) {
    const auto train_path = data_dir / "train.xbds";
    const auto val_path = data_dir / "validation.xbds";
    if (fs::exists(train_path) && fs::exists(val_path)) {
        Corpora c;
        c.train = read_dataset(train_path.string());
        c.validation = read_dataset(val_path.string());
        if (c.train.fingerprint != spec.crossbar.fingerprint())
            throw ConfigError("datasets in " + data_dir.string() + " belong to a different crossbar configuration");
        return c;
    }
    return make_corpora(spec);
}

int gen_dataset(const CommonArgs& args) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    const auto c = make_corpora(spec);
    write_dataset(c.train, (fs::path(args.out) / "train.xbds").string());
    write_dataset(c.validation, (fs::path(args.out) / "validation.xbds").string());
    auto out = open_out(fs::path(args.out) / "dataset_summary.csv");
    out << "split,records,failures,masked_columns,solver,fingerprint,v_min,v_max,g_min,g_max,fr_min,fr_max\n";
    auto row = [&](const char* name, const CrossbarDataset& ds, const LabelStats& st) {
        const auto& s = ds.scalers;
        out << name << ',' << ds.size() << ',' << st.failures << ',' << st.masked_columns << ',' << to_string(ds.solver)
            << ',' << to_hex(ds.fingerprint) << ',' << num(s.v_min) << ',' << num(s.v_max) << ',' << num(s.g_min)
            << ',' << num(s.g_max) << ',' << num(s.fr_min) << ',' << num(s.fr_max) << '\n';
    };
    row("train", c.train, c.train_stats);
    row("validation", c.validation, c.validation_stats);
    std::cerr << "wrote " << c.train.size() << " training and " << c.validation.size() << " validation records to "
              << args.out << "\n";
    return 0;
}

int train_surrogate(const CommonArgs& args, const std::string& data_dir) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    const auto c = load_or_make_corpora(spec, data_dir.empty() ? fs::path(args.out) : fs::path(data_dir));
    std::cerr << "training " << spec.train.hidden << " hidden units for " << spec.train.epochs << " epochs\n";
    const auto result = train(c.train, &c.validation, spec.train);
    const auto model_path = fs::path(args.out) / surrogate_file_name(spec.crossbar);
    save_model(result.model, model_path.string());
    auto loss = open_out(fs::path(args.out) / "loss.csv");
    write_loss_csv(loss, result.history);
    const auto report = benchmark_rmse(result.model, c.validation, spec.crossbar, spec.threads);
    auto rmse = open_out(fs::path(args.out) / "rmse.csv");
    rmse << "columns,surrogate_rmse,analytical_rmse,ratio,validation_mse\n"
         << report.columns << ',' << num(report.surrogate_rmse) << ',' << num(report.analytical_rmse) << ','
         << num(report.ratio()) << ',' << num(result.final_validation_mse) << '\n';
    std::cerr << "saved " << model_path.string() << " (NF RMSE " << report.surrogate_rmse << " vs analytical "
              << report.analytical_rmse << ")\n";
    return 0;
}

int bench_surrogate(const CommonArgs& args, const std::string& data_dir, const std::string& model_override) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    const std::string model_path = model_override.empty() ? surrogate_path(spec, spec.crossbar) : model_override;
    if (!fs::exists(model_path))
        throw ConfigError("no surrogate at " + model_path + "; run `xbemu train-surrogate --config " + args.config +
                          " --out " + spec.surrogate_dir + "` first");
    const auto model = load_model(model_path);
    Corpora c;
    const fs::path dir = data_dir.empty() ? fs::path(args.out) : fs::path(data_dir);
    if (fs::exists(dir / "validation.xbds")) {
        c.validation = read_dataset((dir / "validation.xbds").string());
    } else {
        auto val_spec = spec.datagen;
        val_spec.samples_per_level = spec.validation_per_level;
        val_spec.seed = spec.datagen.seed + 0x5bd1e995ull;
        c.validation = label_with_fr(generate_samples(val_spec, spec.crossbar), spec.crossbar, SolverKind::nonlinear,
                                     &model.scalers, nullptr, spec.threads);
    }
    const auto report = benchmark_rmse(model, c.validation, spec.crossbar, spec.threads);
    auto out = open_out(fs::path(args.out) / "rmse.csv");
    out << "columns,surrogate_rmse,analytical_rmse,ratio\n"
        << report.columns << ',' << num(report.surrogate_rmse) << ',' << num(report.analytical_rmse) << ','
        << num(report.ratio()) << '\n';
    std::cout << "surrogate NF RMSE " << report.surrogate_rmse << ", analytical " << report.analytical_rmse << " ("
              << report.ratio() << "x)\n";
    return 0;
}

int write_report(const CommonArgs& args, const SweepReport& report, const std::string& stem) {
    auto csv = open_out(fs::path(args.out) / (stem + ".csv"));
    write_sweep_csv(csv, report);
    auto summary = open_out(fs::path(args.out) / (stem + "_summary.txt"));
    write_summary(summary, report);
    write_summary(std::cout, report);
    return report.failures() ? 1 : 0;
}

int eval(const CommonArgs& args) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    return write_report(args, evaluate_accuracy(spec, &std::cerr), "eval");
}

int sweep(const CommonArgs& args, bool fresh) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    const auto csv_path = fs::path(args.out) / "sweep.csv";
    const auto previous = fresh ? std::map<std::string, std::vector<std::string>>{} : read_sweep_csv(csv_path.string());
    const auto points = expand_sweep(spec);
    std::cerr << "sweeping " << points.size() << " points\n";
    return write_report(args, run_sweep(spec, points, &previous, &std::cerr), "sweep");
}

int import(const CommonArgs& args, const std::string& model_override) {
    const auto spec = load(args);
    fs::create_directories(args.out);
    const std::string path = model_override.empty() ? spec.model_path : model_override;
    const auto bundle = import_model(path);
    export_model(bundle, (fs::path(args.out) / "model.xbmt").string());
    auto blocks = open_out(fs::path(args.out) / "model_blocks.csv");
    blocks << "name,dtype,shape,elements\n";
    for (const auto& b : bundle.tensors.blocks) {
        std::string shape;
        for (std::size_t i = 0; i < b.shape.size(); ++i) shape += (i ? "x" : "") + std::to_string(b.shape[i]);
        blocks << b.name << ',' << to_string(b.dtype) << ',' << shape << ',' << b.elements() << '\n';
    }
    auto graph = open_out(fs::path(args.out) / "model_graph.txt");
    graph << bundle.graph_text();
    std::cout << bundle.graph_text();
    return 0;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "Experiment config file (key = value)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "Override the config seed");
    cmd->add_option("--out", args.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crossbar non-ideality emulation: circuit oracle, surrogate and functional simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string data_dir, model_override;
    bool fresh = false;

    auto* gen = app.add_subcommand("gen-dataset", "Sample and label surrogate training/validation corpora");
    add_common(gen, args);
    auto* trn = app.add_subcommand("train-surrogate", "Train the surrogate for the configured crossbar");
    add_common(trn, args);
    trn->add_option("--data", data_dir, "Directory holding train.xbds/validation.xbds (generated when absent)");
    auto* bench = app.add_subcommand("bench-surrogate", "NF RMSE of the surrogate and the analytical model");
    add_common(bench, args);
    bench->add_option("--data", data_dir, "Directory holding validation.xbds");
    bench->add_option("--model", model_override, "Surrogate file (default: surrogate_dir lookup)");
    auto* ev = app.add_subcommand("eval", "Accuracy of the workload at the configured point");
    add_common(ev, args);
    auto* sw = app.add_subcommand("sweep", "Cartesian sweep over the sweep.* axes (resumable)");
    add_common(sw, args);
    sw->add_flag("--fresh", fresh, "Ignore results of a previous run in --out");
    auto* imp = app.add_subcommand("import-model", "Validate a model container and export it canonically");
    add_common(imp, args);
    imp->add_option("--model", model_override, "Model file (default: the config's model)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return gen_dataset(args);
        if (*trn) return train_surrogate(args, data_dir);
        if (*bench) return bench_surrogate(args, data_dir, model_override);
        if (*ev) return eval(args);
        if (*sw) return sweep(args, fresh);
        if (*imp) return import(args, model_override);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
