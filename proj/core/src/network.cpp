#include "xbemu/network.hpp"

#include <algorithm>
#include <sstream>

namespace xbemu {

namespace {

int parse_int(const std::string& text, const std::string& context) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw FormatError("graph: expected an integer for " + context + ", got '" + text + "'");
    }
}

std::vector<std::int64_t> block_shape(const TensorFile& tensors, const std::string& name) {
    const auto* b = tensors.find(name);
    if (!b) throw FormatError("missing weight block '" + name + "'");
    return b->shape;
}

std::string shape_text(const std::vector<std::int64_t>& shape) {
    TensorBlock tmp;
    tmp.shape = shape;
    return tmp.shape_string();
}

void expect_shape(const TensorFile& tensors, const std::string& layer, const std::string& name,
                  const std::vector<std::int64_t>& expected) {
    const auto actual = block_shape(tensors, name);
    if (actual != expected)
        throw FormatError("layer '" + layer + "': block '" + name + "' has shape " + shape_text(actual) +
                          ", expected " + shape_text(expected));
    const auto dtype = tensors.get(name).dtype;
    if (dtype != DType::f32 && dtype != DType::f64)
        throw FormatError("layer '" + layer + "': block '" + name + "' must hold floating-point values");
}

}  // namespace

std::vector<GraphNode> parse_graph(const std::string& text, int* channels, int* height, int* width) {
    std::istringstream in(text);
    std::string line;
    std::vector<GraphNode> graph;
    bool have_input = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string op;
        if (!(ls >> op) || op[0] == '#') continue;
        const std::string where = "line " + std::to_string(line_no);
        if (!have_input) {
            if (op != "input") throw FormatError("graph: first node must be 'input C H W'");
            std::string c, h, w;
            ls >> c >> h >> w;
            *channels = parse_int(c, where);
            *height = parse_int(h, where);
            *width = parse_int(w, where);
            have_input = true;
            continue;
        }
        GraphNode node;
        if (op == "relu") {
            node.kind = LayerKind::relu;
        } else if (op == "flatten") {
            node.kind = LayerKind::flatten;
        } else if (op == "maxpool") {
            node.kind = LayerKind::maxpool;
            std::string k;
            ls >> k;
            node.kernel = parse_int(k, where);
        } else if (op == "conv2d" || op == "linear") {
            node.kind = op == "conv2d" ? LayerKind::conv2d : LayerKind::linear;
            if (!(ls >> node.name)) throw FormatError("graph: " + where + " lacks a layer name");
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw FormatError("graph: " + where + ": expected key=value, got " + kv);
                const auto key = kv.substr(0, eq);
                const int value = parse_int(kv.substr(eq + 1), where + " " + key);
                if (key == "in") node.in = value;
                else if (key == "out") node.out = value;
                else if (key == "kernel") node.kernel = value;
                else if (key == "stride") node.stride = value;
                else if (key == "padding") node.padding = value;
                else throw FormatError("graph: " + where + ": unknown attribute '" + key + "'");
            }
        } else {
            throw FormatError("graph: " + where + ": unknown node '" + op + "'");
        }
        graph.push_back(node);
    }
    if (!have_input) throw FormatError("graph: empty");
    return graph;
}

void ModelBundle::validate() const {
    if (channels < 1 || height < 1 || width < 1) throw FormatError("model: invalid input shape");
    int c = channels, h = height, w = width;
    bool flat = false;
    int features = 0;
    bool any_compute = false;
    for (const auto& node : graph) {
        switch (node.kind) {
            case LayerKind::conv2d:
                if (flat) throw FormatError("layer '" + node.name + "': conv2d after flatten");
                if (node.in != c)
                    throw FormatError("layer '" + node.name + "': expects " + std::to_string(node.in) +
                                      " input channels, graph provides " + std::to_string(c));
                if (node.out < 1 || node.kernel < 1 || node.stride < 1 || node.padding < 0)
                    throw FormatError("layer '" + node.name + "': invalid geometry");
                expect_shape(tensors, node.name, node.name + ".weight", {node.out, node.in, node.kernel, node.kernel});
                expect_shape(tensors, node.name, node.name + ".bias", {node.out});
                c = node.out;
                h = (h + 2 * node.padding - node.kernel) / node.stride + 1;
                w = (w + 2 * node.padding - node.kernel) / node.stride + 1;
                if (h < 1 || w < 1) throw FormatError("layer '" + node.name + "': output collapses to nothing");
                any_compute = true;
                break;
            case LayerKind::linear:
                if (!flat) throw FormatError("layer '" + node.name + "': linear needs a flatten before it");
                if (node.in != features)
                    throw FormatError("layer '" + node.name + "': expects " + std::to_string(node.in) +
                                      " features, graph provides " + std::to_string(features));
                expect_shape(tensors, node.name, node.name + ".weight", {node.out, node.in});
                expect_shape(tensors, node.name, node.name + ".bias", {node.out});
                features = node.out;
                any_compute = true;
                break;
            case LayerKind::relu:
                break;
            case LayerKind::maxpool:
                if (flat || node.kernel < 1) throw FormatError("maxpool: invalid placement or window");
                h /= node.kernel;
                w /= node.kernel;
                if (h < 1 || w < 1) throw FormatError("maxpool: window larger than feature map");
                break;
            case LayerKind::flatten:
                if (!flat) features = c * h * w;
                flat = true;
                break;
        }
    }
    if (!any_compute) throw FormatError("model: graph has no conv2d or linear layer");
}

std::string ModelBundle::graph_text() const {
    std::ostringstream out;
    out << "input " << channels << ' ' << height << ' ' << width << '\n';
    for (const auto& n : graph) {
        switch (n.kind) {
            case LayerKind::conv2d:
                out << "conv2d " << n.name << " in=" << n.in << " out=" << n.out << " kernel=" << n.kernel
                    << " stride=" << n.stride << " padding=" << n.padding << '\n';
                break;
            case LayerKind::linear: out << "linear " << n.name << " in=" << n.in << " out=" << n.out << '\n'; break;
            case LayerKind::relu: out << "relu\n"; break;
            case LayerKind::maxpool: out << "maxpool " << n.kernel << '\n'; break;
            case LayerKind::flatten: out << "flatten\n"; break;
        }
    }
    return out.str();
}

ModelBundle bundle_from_tensors(TensorFile tensors) {
    ModelBundle b;
    b.graph = parse_graph(tensors.get("graph").to_text(), &b.channels, &b.height, &b.width);
    b.tensors = std::move(tensors);
    b.validate();
    return b;
}

ModelBundle import_model(const std::string& path) { return bundle_from_tensors(read_tensor_file(path)); }

void export_model(const ModelBundle& bundle, const std::string& path) {
    bundle.validate();
    TensorFile file = bundle.tensors;
    file.put(TensorBlock::from_text("graph", bundle.graph_text()));
    write_tensor_file(file, path);
}

ImageSet load_images(const std::string& path) {
    const auto file = read_tensor_file(path);
    const auto& images = file.get("images");
    const auto& labels = file.get("labels");
    if (images.shape.size() != 4) throw FormatError("block 'images' must be (N, C, H, W), got " + images.shape_string());
    if (labels.shape.size() != 1 || labels.shape[0] != images.shape[0])
        throw FormatError("block 'labels' has shape " + labels.shape_string() + ", expected (" +
                          std::to_string(images.shape[0]) + ")");
    ImageSet set;
    set.count = static_cast<int>(images.shape[0]);
    set.channels = static_cast<int>(images.shape[1]);
    set.height = static_cast<int>(images.shape[2]);
    set.width = static_cast<int>(images.shape[3]);
    set.pixels = images.to_doubles();
    for (double v : labels.to_doubles()) set.labels.push_back(static_cast<int>(v));
    return set;
}

void Precision::validate() const {
    weight_format().validate();
    act_format().validate();
    if (weight_bits > 32 || act_bits > 32) throw std::invalid_argument("Precision: at most 32 bits");
}

QuantizedNetwork QuantizedNetwork::build(const ModelBundle& bundle, const Precision& precision,
                                         const FxpFormat& accumulator) {
    bundle.validate();
    precision.validate();
    accumulator.validate();
    QuantizedNetwork net;
    net.channels = bundle.channels;
    net.height = bundle.height;
    net.width = bundle.width;
    net.precision = precision;
    net.accumulator = accumulator;

    const FxpFormat wfmt = precision.weight_format();
    // Symmetric range so that every code can be sliced differentially.
    const FxpFormat wclip{wfmt.total_bits, wfmt.frac_bits, true};
    const std::int64_t wmax = wclip.max_code();
    std::size_t last_compute = 0;
    for (std::size_t i = 0; i < bundle.graph.size(); ++i)
        if (bundle.graph[i].kind == LayerKind::conv2d || bundle.graph[i].kind == LayerKind::linear) last_compute = i;

    SaturationCounter sat;
    auto weights = [&](const std::string& name) {
        std::vector<std::int64_t> codes;
        for (double x : bundle.tensors.get(name).to_doubles())
            codes.push_back(std::clamp(quantize(x, wclip, &sat), -wmax, wmax));
        return codes;
    };
    auto biases = [&](const std::string& name) {
        std::vector<std::int64_t> codes;
        for (double x : bundle.tensors.get(name).to_doubles()) codes.push_back(quantize(x, accumulator, &sat));
        return codes;
    };

    for (std::size_t i = 0; i < bundle.graph.size(); ++i) {
        const auto& node = bundle.graph[i];
        QuantizedLayer layer;
        layer.node = node;
        layer.formats.input = precision.act_format();
        layer.formats.weight = wfmt;
        layer.formats.output = i == last_compute ? accumulator : precision.act_format();
        if (node.kind == LayerKind::conv2d) {
            layer.conv.in_channels = node.in;
            layer.conv.out_channels = node.out;
            layer.conv.kernel = node.kernel;
            layer.conv.stride = node.stride;
            layer.conv.padding = node.padding;
            layer.conv.weight = weights(node.name + ".weight");
            layer.conv.bias = biases(node.name + ".bias");
        } else if (node.kind == LayerKind::linear) {
            layer.linear.in_features = node.in;
            layer.linear.out_features = node.out;
            layer.linear.weight = weights(node.name + ".weight");
            layer.linear.bias = biases(node.name + ".bias");
        }
        net.layers.push_back(std::move(layer));
    }
    net.weight_saturations = sat.saturated;
    return net;
}

InferenceResult run_network(const QuantizedNetwork& net, const ImageSet& images, std::size_t count,
                            const MvmArch* arch, const CrossbarBackend* backend, unsigned threads) {
    if (images.channels != net.channels || images.height != net.height || images.width != net.width)
        throw FormatError("run_network: image shape does not match the model input");
    count = std::min(count, static_cast<std::size_t>(images.count));
    if (backend) {
        if (!arch) throw FuncsimError("run_network: a crossbar backend needs an architecture");
        if (arch->scheme.weight_bits != net.precision.weight_bits || arch->scheme.input_bits != net.precision.act_bits)
            throw FuncsimError("run_network: slice scheme widths differ from the network precision");
    }

    InferenceResult result;
    FeatureMap fm(static_cast<int>(count), net.channels, net.height, net.width);
    SaturationCounter in_sat;
    const FxpFormat act = net.precision.act_format();
    for (std::size_t i = 0; i < fm.size(); ++i) fm.codes[i] = quantize(images.pixels[i], act, &in_sat);
    result.input_saturations = in_sat.saturated;

    CodeMatrix flat;
    bool is_flat = false;
    RunOptions options;
    options.threads = threads;
    for (const auto& layer : net.layers) {
        switch (layer.node.kind) {
            case LayerKind::conv2d: {
                LayerCounters lc{layer.node.name, {}};
                if (backend) {
                    fm = conv2d_mvm(fm, layer.conv, layer.formats, *arch, *backend, &lc.counters, options);
                } else {
                    SaturationCounter s;
                    fm = reference_conv2d(fm, layer.conv, layer.formats, net.accumulator, &s);
                    lc.counters.saturated = s.saturated;
                }
                result.layers.push_back(lc);
                break;
            }
            case LayerKind::linear: {
                LayerCounters lc{layer.node.name, {}};
                if (backend) {
                    flat = linear_mvm(flat, layer.linear, layer.formats, *arch, *backend, &lc.counters, options);
                } else {
                    SaturationCounter s;
                    flat = reference_linear(flat, layer.linear, layer.formats, net.accumulator, &s);
                    lc.counters.saturated = s.saturated;
                }
                result.layers.push_back(lc);
                break;
            }
            case LayerKind::relu:
                if (is_flat)
                    flat = flat.cwiseMax(std::int64_t{0});
                else
                    for (auto& c : fm.codes) c = std::max<std::int64_t>(c, 0);
                break;
            case LayerKind::maxpool: {
                const int k = layer.node.kernel;
                FeatureMap pooled(fm.batch, fm.channels, fm.height / k, fm.width / k);
                for (int b = 0; b < fm.batch; ++b)
                    for (int c = 0; c < fm.channels; ++c)
                        for (int y = 0; y < pooled.height; ++y)
                            for (int x = 0; x < pooled.width; ++x) {
                                std::int64_t m = fm.at(b, c, y * k, x * k);
                                for (int dy = 0; dy < k; ++dy)
                                    for (int dx = 0; dx < k; ++dx) m = std::max(m, fm.at(b, c, y * k + dy, x * k + dx));
                                pooled.at(b, c, y, x) = m;
                            }
                fm = std::move(pooled);
                break;
            }
            case LayerKind::flatten: {
                if (is_flat) break;
                const int features = fm.channels * fm.height * fm.width;
                flat.resize(features, fm.batch);
                for (int b = 0; b < fm.batch; ++b)
                    for (int f = 0; f < features; ++f) flat(f, b) = fm.codes[static_cast<std::size_t>(b) * features + f];
                is_flat = true;
                break;
            }
        }
    }
    if (!is_flat) {
        const int features = fm.channels * fm.height * fm.width;
        flat.resize(features, fm.batch);
        for (int b = 0; b < fm.batch; ++b)
            for (int f = 0; f < features; ++f) flat(f, b) = fm.codes[static_cast<std::size_t>(b) * features + f];
    }
    result.predictions.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        Eigen::Index best = 0;
        for (Eigen::Index o = 1; o < flat.rows(); ++o)
            if (flat(o, static_cast<Eigen::Index>(b)) > flat(best, static_cast<Eigen::Index>(b))) best = o;
        result.predictions[b] = static_cast<int>(best);
    }
    return result;
}

}  // namespace xbemu
