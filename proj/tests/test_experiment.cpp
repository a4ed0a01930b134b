#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "xbemu/experiment.hpp"

using namespace xbemu;
namespace fs = std::filesystem;

namespace {

// Tiny model and image set on disk, removed at scope exit.
struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() / ("xbemu_experiment_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                           "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n(0.0, 0.4);
        auto draw = [&](std::size_t count) {
            std::vector<double> v(count);
            for (auto& x : v) x = n(rng);
            return v;
        };
        TensorFile model;
        model.put(TensorBlock::from_text("graph",
                                         "input 1 4 4\nconv2d c in=1 out=2 kernel=3 padding=1\nrelu\nmaxpool 2\n"
                                         "flatten\nlinear fc in=8 out=3\n"));
        model.put(TensorBlock::from_doubles("c.weight", DType::f32, {2, 1, 3, 3}, draw(18)));
        model.put(TensorBlock::from_doubles("c.bias", DType::f32, {2}, draw(2)));
        model.put(TensorBlock::from_doubles("fc.weight", DType::f32, {3, 8}, draw(24)));
        model.put(TensorBlock::from_doubles("fc.bias", DType::f32, {3}, draw(3)));
        write_tensor_file(model, (dir / "model.xbmt").string());
        TensorFile data;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> pixels(20 * 16), labels(20);
        for (auto& p : pixels) p = u(rng);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(i % 3);
        data.put(TensorBlock::from_doubles("images", DType::f32, {20, 1, 4, 4}, pixels));
        data.put(TensorBlock::from_doubles("labels", DType::i64, {20}, labels));
        write_tensor_file(data, (dir / "data.xbmt").string());
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string config(const std::string& extra) const {
        return "model = " + (dir / "model.xbmt").string() + "\ndataset = " + (dir / "data.xbmt").string() +
               "\nsamples = 12\nthreads = 1\nxbar.size = 8\narch.weight_bits = 8\narch.weight_frac = 5\n"
               "arch.act_bits = 8\narch.act_frac = 5\nsurrogate_dir = " + (dir / "sur").string() + "\n" + extra;
    }
};

ExperimentSpec parse(const std::string& text) { return spec_from_config(KeyValueConfig::parse(text)); }

}  // namespace

TEST(Config, ParsesValuesListsAndComments) {
    const auto kv = KeyValueConfig::parse("a = 1  # note\n\n b.c=x, y ,z\n");
    EXPECT_EQ(kv.get("a", ""), "1");
    EXPECT_EQ(kv.get_list("b.c"), (std::vector<std::string>{"x", "y", "z"}));
    EXPECT_EQ(kv.get_int("a", 0), 1);
    EXPECT_EQ(kv.get_double("missing", 2.5), 2.5);
    EXPECT_THROW(kv.get_double("b.c", 0), ConfigError);
    EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(KeyValueConfig::parse("just words\n"), ConfigError);
}

TEST(Config, SpecDefaultsAndErrors) {
    const auto s = parse("");
    EXPECT_EQ(s.crossbar.n_rows, 64);
    EXPECT_DOUBLE_EQ(s.crossbar.on_off_ratio(), 6.0);
    EXPECT_EQ(s.arch.adc_bits, 14);
    EXPECT_EQ(s.arch.accumulator, (FxpFormat{32, 24, true}));
    EXPECT_EQ(s.backend, BackendKind::analytical_linear);
    EXPECT_EQ(s.train.hidden, 500);
    EXPECT_THROW(parse("xbar.sise = 4\n"), ConfigError);
    EXPECT_THROW(parse("xbar.r_on = fast\n"), ConfigError);
    EXPECT_THROW(parse("arch.slice_width = 3\n"), ConfigError);
    EXPECT_THROW(parse("backend = spice\n"), ConfigError);
    EXPECT_THROW(parse("sweep.precision = 8\n"), ConfigError);
    EXPECT_THROW(parse("sweep.precision = 9:5\n"), ConfigError);
    EXPECT_THROW(parse("xbar.on_off = 0.5\n"), ConfigError);
    const auto t = parse("seed = 9\nxbar.size = 16\narch.slice_width = 2\n");
    EXPECT_EQ(t.datagen.seed, 9u);
    EXPECT_EQ(t.train.seed, 9u);
    EXPECT_EQ(t.datagen.n, 16);
    EXPECT_EQ(t.datagen.g_grid_bits, 2);
}

TEST(Sweep, CartesianExpansionInDeclarationOrder) {
    const auto s = parse("sweep.xbar_size = 16, 32\nsweep.on_off = 2, 10\nsweep.backend = ideal, analytical\n");
    EXPECT_EQ(s.sweep.points(), 8u);
    const auto pts = expand_sweep(s);
    ASSERT_EQ(pts.size(), 8u);
    EXPECT_EQ(pts[0].backend, BackendKind::ideal);
    EXPECT_EQ(pts[0].arch.xbar_size, 16);
    EXPECT_DOUBLE_EQ(pts[0].crossbar.on_off_ratio(), 2.0);
    EXPECT_DOUBLE_EQ(pts[1].crossbar.on_off_ratio(), 10.0);
    EXPECT_EQ(pts[2].arch.xbar_size, 32);
    EXPECT_EQ(pts[2].crossbar.n_rows, 32);
    EXPECT_EQ(pts[4].backend, BackendKind::analytical_linear);
    EXPECT_EQ(expand_sweep(parse("")).size(), 1u);
    const auto r = expand_sweep(parse("xbar.on_off = 4\nsweep.r_on = 50000\n"));
    EXPECT_DOUBLE_EQ(r[0].crossbar.r_off, 200000.0);
}

TEST(Sweep, PrecisionAxisUpdatesScheme) {
    const auto pts = expand_sweep(parse("sweep.precision = 16:13, 8:5\nsweep.slice_stream = 1, 2\n"));
    ASSERT_EQ(pts.size(), 4u);
    EXPECT_EQ(pts[2].arch.scheme.weight_bits, 8);
    EXPECT_EQ(pts[2].precision.act_frac, 5);
    EXPECT_EQ(pts[3].arch.scheme.slice_width, 2);
    EXPECT_EQ(pts[3].arch.scheme.stream_width, 2);
}

TEST(Sweep, FingerprintsDistinguishPoints) {
    const auto pts = expand_sweep(parse("sweep.on_off = 2, 10\n"));
    EXPECT_NE(pts[0].fingerprint("w"), pts[1].fingerprint("w"));
    EXPECT_NE(pts[0].fingerprint("w"), pts[0].fingerprint("v"));
    EXPECT_EQ(pts[0].fingerprint("w"), expand_sweep(parse("sweep.on_off = 2, 10\n"))[0].fingerprint("w"));
    EXPECT_EQ(surrogate_file_name(pts[0].crossbar).size(), std::string("surrogate_0123456789abcdef.xbnn").size());
}

TEST(Report, CsvColumns) {
    const std::vector<std::string> golden = {
        "id", "fingerprint", "backend", "xbar_size", "r_source", "r_sink", "r_wire", "r_access", "r_on", "on_off",
        "v_supply", "weight_bits", "weight_frac", "act_bits", "act_frac", "slice_width", "stream_width", "adc_bits",
        "samples", "correct", "accuracy", "baseline_accuracy", "degradation", "precision_baseline_accuracy",
        "adc_clipped", "saturated", "surrogate_clamped", "surrogate_fallbacks", "status"};
    EXPECT_EQ(sweep_csv_columns(), golden);
}

TEST(Run, DeterministicAndResumable) {
    Workspace ws;
    const auto spec = parse(ws.config("sweep.backend = ideal, analytical\nsweep.slice_stream = 2, 4\n"));
    const auto points = expand_sweep(spec);
    const auto a = run_sweep(spec, points);
    const auto b = run_sweep(spec, points);
    std::ostringstream ca, cb;
    write_sweep_csv(ca, a);
    write_sweep_csv(cb, b);
    EXPECT_EQ(ca.str(), cb.str());
    EXPECT_EQ(a.failures(), 0u);
    ASSERT_EQ(a.points.size(), 4u);
    EXPECT_EQ(a.baseline.backend_label, "fxp_reference");
    EXPECT_EQ(a.baseline.samples, 12u);
    for (const auto& p : a.points) {
        EXPECT_EQ(p.samples, 12u);
        EXPECT_DOUBLE_EQ(p.degradation, p.baseline_accuracy - p.accuracy);
    }

    const auto csv_path = (ws.dir / "sweep.csv").string();
    {
        std::ofstream out(csv_path);
        write_sweep_csv(out, a);
    }
    const auto previous = read_sweep_csv(csv_path);
    EXPECT_EQ(previous.size(), 5u);
    std::ostringstream log;
    const auto c = run_sweep(spec, points, &previous, &log);
    std::ostringstream cc;
    write_sweep_csv(cc, c);
    EXPECT_EQ(cc.str(), ca.str());
    EXPECT_NE(log.str().find("resumed"), std::string::npos);
}

TEST(Run, MissingSurrogateIsActionable) {
    Workspace ws;
    const auto spec = parse(ws.config("backend = surrogate\n"));
    const auto r = evaluate_accuracy(spec);
    ASSERT_EQ(r.failures(), 1u);
    EXPECT_NE(r.points[0].status.find("train-surrogate"), std::string::npos);
    std::ostringstream summary;
    write_summary(summary, r);
    EXPECT_NE(summary.str().find("failures: 1"), std::string::npos);
}

TEST(Run, BadModelIsAConfigError) {
    Workspace ws;
    auto text = ws.config("");
    const auto spec = parse(text + "");
    auto broken = spec;
    broken.model_path = (ws.dir / "missing.xbmt").string();
    EXPECT_THROW(evaluate_accuracy(broken), ConfigError);
}
