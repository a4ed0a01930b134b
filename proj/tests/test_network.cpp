#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fxp_oracle.hpp"
#include "xbemu/network.hpp"

using namespace xbemu;

namespace {

const char* kGraph =
    "input 1 6 6\n"
    "# tiny test network\n"
    "conv2d c1 in=1 out=2 kernel=3 stride=1 padding=1\n"
    "relu\n"
    "maxpool 2\n"
    "flatten\n"
    "linear fc in=18 out=3\n";

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

TensorFile tiny_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TensorFile f;
    f.put(TensorBlock::from_text("graph", kGraph));
    f.put(TensorBlock::from_doubles("c1.weight", DType::f32, {2, 1, 3, 3}, uniform(rng, 18, 0.8)));
    f.put(TensorBlock::from_doubles("c1.bias", DType::f32, {2}, uniform(rng, 2, 0.1)));
    f.put(TensorBlock::from_doubles("fc.weight", DType::f64, {3, 18}, uniform(rng, 54, 0.5)));
    f.put(TensorBlock::from_doubles("fc.bias", DType::f64, {3}, uniform(rng, 3, 0.1)));
    return f;
}

ImageSet tiny_images(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageSet s;
    s.count = count;
    s.channels = 1;
    s.height = s.width = 6;
    s.pixels.resize(static_cast<std::size_t>(count) * 36);
    for (auto& p : s.pixels) p = u(rng);
    s.labels.assign(count, 0);
    return s;
}

// Fixed-point forward pass assembled from the direct oracles.
std::vector<int> oracle_predictions(const QuantizedNetwork& net, const ImageSet& images) {
    const auto& conv = net.layers[0];
    const auto& fc = net.layers[4];
    FeatureMap fm(images.count, 1, 6, 6);
    for (std::size_t i = 0; i < fm.size(); ++i) fm.codes[i] = quantize(images.pixels[i], net.precision.act_format());
    fm = oracle::direct_conv(fm, conv.conv, conv.formats, net.accumulator);
    CodeMatrix flat(18, images.count);
    for (int b = 0; b < images.count; ++b)
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x) {
                    std::int64_t m = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) m = std::max(m, fm.at(b, c, 2 * y + dy, 2 * x + dx));
                    flat(c * 9 + y * 3 + x, b) = m;
                }
    const CodeMatrix logits = oracle::direct_linear(flat, fc.linear, fc.formats, net.accumulator);
    std::vector<int> out;
    for (int b = 0; b < images.count; ++b) {
        int best = 0;
        for (int o = 1; o < 3; ++o)
            if (logits(o, b) > logits(best, b)) best = o;
        out.push_back(best);
    }
    return out;
}

}  // namespace

TEST(TensorFile, RoundTrip) {
    const auto f = tiny_model(1);
    std::stringstream buf;
    write_tensor_file(f, buf);
    const auto back = read_tensor_file(buf);
    EXPECT_EQ(back, f);
    EXPECT_EQ(back.get("fc.weight").shape_string(), "(3, 18)");
    EXPECT_THROW(back.get("nope"), FormatError);
}

TEST(TensorFile, RejectsCorruption) {
    std::stringstream buf;
    write_tensor_file(tiny_model(1), buf);
    const std::string bytes = buf.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(read_tensor_file(cut), FormatError);
    std::string magic = bytes;
    magic[1] = 'Q';
    std::stringstream bad(magic);
    EXPECT_THROW(read_tensor_file(bad), FormatError);
    EXPECT_THROW(TensorBlock::from_doubles("x", DType::f32, {2, 2}, {1.0, 2.0}), FormatError);
}

TEST(TensorFile, DtypeConversion) {
    const auto b = TensorBlock::from_doubles("l", DType::i64, {3}, {1, -2, 7});
    EXPECT_EQ(b.to_doubles(), (std::vector<double>{1, -2, 7}));
    const auto t = TensorBlock::from_text("g", "abc");
    EXPECT_EQ(t.to_text(), "abc");
    EXPECT_THROW(b.to_text(), FormatError);
}

TEST(Graph, ParseAndRender) {
    int c, h, w;
    const auto g = parse_graph(kGraph, &c, &h, &w);
    EXPECT_EQ(c, 1);
    EXPECT_EQ(h, 6);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g[0].name, "c1");
    EXPECT_EQ(g[0].padding, 1);
    EXPECT_EQ(g[2].kind, LayerKind::maxpool);
    const auto bundle = bundle_from_tensors(tiny_model(1));
    int c2, h2, w2;
    EXPECT_EQ(parse_graph(bundle.graph_text(), &c2, &h2, &w2).size(), 5u);
    EXPECT_THROW(parse_graph("input 1 2 3\nconv2d c in=x\n", &c, &h, &w), FormatError);
    EXPECT_THROW(parse_graph("relu\n", &c, &h, &w), FormatError);
    EXPECT_THROW(parse_graph("input 1 2 3\nsoftmax\n", &c, &h, &w), FormatError);
}

TEST(Graph, ShapeErrorsNameTheLayer) {
    auto f = tiny_model(1);
    f.put(TensorBlock::from_doubles("fc.weight", DType::f32, {3, 17}, std::vector<double>(51, 0.0)));
    try {
        bundle_from_tensors(f);
        FAIL() << "expected a shape error";
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("fc"), std::string::npos);
        EXPECT_NE(msg.find("(3, 17)"), std::string::npos);
        EXPECT_NE(msg.find("(3, 18)"), std::string::npos);
    }
    auto g = tiny_model(1);
    g.put(TensorBlock::from_text("graph", "input 1 6 6\nconv2d c1 in=2 out=2 kernel=3\n"));
    EXPECT_THROW(bundle_from_tensors(g), FormatError);
}

TEST(Graph, ExportImportRoundTrip) {
    const auto bundle = bundle_from_tensors(tiny_model(2));
    const auto path = (std::filesystem::temp_directory_path() / "xbemu_test_model.xbmt").string();
    export_model(bundle, path);
    const auto back = import_model(path);
    EXPECT_EQ(back.graph_text(), bundle.graph_text());
    EXPECT_EQ(back.tensors.get("c1.weight"), bundle.tensors.get("c1.weight"));
    std::filesystem::remove(path);
}

TEST(Quantized, WeightsAreSymmetricAndLastLayerIsWide) {
    auto f = tiny_model(3);
    auto w = f.get("c1.weight").to_doubles();
    w[0] = -100.0;
    f.put(TensorBlock::from_doubles("c1.weight", DType::f32, {2, 1, 3, 3}, w));
    const auto net = QuantizedNetwork::build(bundle_from_tensors(f), {8, 5, 8, 5}, {32, 24, true});
    EXPECT_EQ(net.layers[0].conv.weight[0], -127);
    EXPECT_GE(net.weight_saturations, 1u);
    EXPECT_EQ(net.layers[0].formats.output, (FxpFormat{8, 5, true}));
    EXPECT_EQ(net.layers[4].formats.output, (FxpFormat{32, 24, true}));
}

TEST(Inference, ReferenceMatchesOracleAndIdealBackend) {
    const auto bundle = bundle_from_tensors(tiny_model(4));
    const auto images = tiny_images(12, 5);
    for (const Precision p : {Precision{16, 13, 16, 13}, Precision{8, 5, 8, 5}}) {
        const auto net = QuantizedNetwork::build(bundle, p, {32, 24, true});
        const auto ref = run_network(net, images, 12, nullptr, nullptr, 1);
        EXPECT_EQ(ref.predictions, oracle_predictions(net, images));
        MvmArch arch;
        arch.xbar_size = 8;
        arch.scheme = {p.weight_bits, 2, p.act_bits, 4};
        arch.adc_bits = 0;
        CrossbarConfig cfg;
        cfg.n_rows = cfg.n_cols = 8;
        const auto backend = make_backend(BackendKind::ideal, cfg);
        const auto sim = run_network(net, images, 12, &arch, backend.get(), 2);
        EXPECT_EQ(sim.predictions, ref.predictions);
        ASSERT_EQ(sim.layers.size(), 2u);
        EXPECT_EQ(sim.layers[0].name, "c1");
        EXPECT_GT(sim.layers[1].counters.crossbar_evaluations, 0u);
    }
}

TEST(Inference, RejectsMismatchedInputs) {
    const auto net = QuantizedNetwork::build(bundle_from_tensors(tiny_model(4)), {}, {32, 24, true});
    auto images = tiny_images(2, 1);
    images.height = 5;
    EXPECT_THROW(run_network(net, images, 2, nullptr, nullptr), FormatError);
    MvmArch arch;
    arch.xbar_size = 8;
    arch.scheme = {8, 2, 8, 4};
    CrossbarConfig cfg;
    cfg.n_rows = cfg.n_cols = 8;
    const auto backend = make_backend(BackendKind::ideal, cfg);
    EXPECT_THROW(run_network(net, tiny_images(2, 1), 2, &arch, backend.get()), FuncsimError);
}
