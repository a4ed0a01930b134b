#pragma once

// Feed-forward workload models: graph + named weight blocks, quantized
// inference through funcsim or the exact fixed-point reference.

#include <cstdint>
#include <string>
#include <vector>

#include "xbemu/funcsim.hpp"
#include "xbemu/tensor_file.hpp"

namespace xbemu {

enum class LayerKind { conv2d, linear, relu, maxpool, flatten };

struct GraphNode {
    LayerKind kind = LayerKind::relu;
    std::string name;  // conv2d / linear only
    int in = 0;
    int out = 0;
    int kernel = 0;  // conv2d kernel or maxpool window
    int stride = 1;
    int padding = 0;
};

// Graph text, one node per line after an "input C H W" header:
//   conv2d <name> in=<c> out=<c> kernel=<k> stride=<s> padding=<p>
//   linear <name> in=<n> out=<n>
//   relu | maxpool <k> | flatten
// Weight blocks are "<name>.weight" and "<name>.bias" in any float dtype.
struct ModelBundle {
    int channels = 1;
    int height = 28;
    int width = 28;
    std::vector<GraphNode> graph;
    TensorFile tensors;

    // Checks the graph is well-formed and every block has its layer's shape;
    // throws FormatError naming the offending block.
    void validate() const;
    std::string graph_text() const;
};

std::vector<GraphNode> parse_graph(const std::string& text, int* channels, int* height, int* width);

ModelBundle import_model(const std::string& path);
ModelBundle bundle_from_tensors(TensorFile tensors);
void export_model(const ModelBundle& bundle, const std::string& path);

struct ImageSet {
    int count = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> pixels;  // (n, c, y, x)
    std::vector<int> labels;
};

// "images" (N, C, H, W) and "labels" (N) blocks.
ImageSet load_images(const std::string& path);

struct Precision {
    int weight_bits = 16;
    int weight_frac = 13;
    int act_bits = 16;
    int act_frac = 13;

    FxpFormat weight_format() const { return {weight_bits, weight_frac, true}; }
    FxpFormat act_format() const { return {act_bits, act_frac, true}; }
    void validate() const;
    friend bool operator==(const Precision&, const Precision&) = default;
};

struct QuantizedLayer {
    GraphNode node;
    Conv2dLayer conv;
    LinearLayer linear;
    LayerFormats formats;
};

// Weights are quantized symmetrically to +/-(2^(bits-1) - 1); biases to the
// accumulator format. The last linear layer emits accumulator codes so that
// logits are never clipped by the activation format.
struct QuantizedNetwork {
    int channels = 0;
    int height = 0;
    int width = 0;
    Precision precision;
    FxpFormat accumulator;
    std::vector<QuantizedLayer> layers;
    std::uint64_t weight_saturations = 0;

    static QuantizedNetwork build(const ModelBundle& bundle, const Precision& precision, const FxpFormat& accumulator);
};

struct LayerCounters {
    std::string name;
    MvmCounters counters;
};

struct InferenceResult {
    std::vector<int> predictions;
    std::vector<LayerCounters> layers;
    std::uint64_t input_saturations = 0;
};

// backend == nullptr runs the exact fixed-point reference.
InferenceResult run_network(const QuantizedNetwork& net, const ImageSet& images, std::size_t count,
                            const MvmArch* arch, const CrossbarBackend* backend, unsigned threads = 0);

}  // namespace xbemu
