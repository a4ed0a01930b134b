#include "xbemu/funcsim.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "xbemu/parallel.hpp"

namespace xbemu {

namespace {

class IdealCrossbar final : public ProgrammedCrossbar {
public:
    explicit IdealCrossbar(Eigen::MatrixXd g) : gt_(g.transpose()) {}
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, MvmCounters*) const override { return gt_ * v; }

private:
    Eigen::MatrixXd gt_;
};

class TransferCrossbar final : public ProgrammedCrossbar {
public:
    explicit TransferCrossbar(Eigen::MatrixXd t) : t_(std::move(t)) {}
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, MvmCounters*) const override { return t_ * v; }

private:
    Eigen::MatrixXd t_;
};

class NonlinearCrossbar final : public ProgrammedCrossbar {
public:
    NonlinearCrossbar(const CrossbarConfig& cfg, const Eigen::MatrixXd& g)
        : cfg_(cfg), state_(CrossbarState::program(cfg, g)) {}

    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, MvmCounters*) const override {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cfg_.n_cols, v.cols());
        std::unique_ptr<CrossbarSolver> solver;
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (v.col(c).isZero(0.0)) continue;
            if (!solver) solver = std::make_unique<CrossbarSolver>(cfg_);
            out.col(c) = solver->solve_nonlinear(state_, v.col(c)).i_out;
        }
        return out;
    }

private:
    CrossbarConfig cfg_;
    CrossbarState state_;
};

class SurrogateBackedCrossbar final : public ProgrammedCrossbar {
public:
    SurrogateBackedCrossbar(const SurrogateModel& model, const CrossbarConfig& cfg, const Eigen::MatrixXd& g)
        : xbar_(model, cfg, g) {}

    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, MvmCounters* counters) const override {
        SurrogateCounters local;
        Eigen::MatrixXd out = xbar_.evaluate(v, &local);
        if (counters) {
            counters->surrogate_clamped += local.clamped;
            counters->surrogate_fallbacks += local.fallbacks;
        }
        return out;
    }

private:
    SurrogateCrossbar xbar_;
};

class SimpleBackend final : public CrossbarBackend {
public:
    SimpleBackend(BackendKind kind, const CrossbarConfig& cfg, const SurrogateModel* model)
        : CrossbarBackend(cfg), kind_(kind), model_(model) {}

    BackendKind kind() const override { return kind_; }

    std::unique_ptr<ProgrammedCrossbar> program(const Eigen::MatrixXd& g) const override {
        if (g.rows() != cfg_.n_rows || g.cols() != cfg_.n_cols)
            throw FuncsimError("backend: conductance matrix does not match the crossbar size");
        switch (kind_) {
            case BackendKind::ideal:
                return std::make_unique<IdealCrossbar>(g);
            case BackendKind::analytical_linear: {
                CrossbarSolver solver(cfg_);
                return std::make_unique<TransferCrossbar>(solver.linear_transfer(g));
            }
            case BackendKind::nonlinear_oracle:
                return std::make_unique<NonlinearCrossbar>(cfg_, g);
            case BackendKind::surrogate:
                return std::make_unique<SurrogateBackedCrossbar>(*model_, cfg_, g);
        }
        throw FuncsimError("backend: unknown variant");
    }

private:
    BackendKind kind_;
    const SurrogateModel* model_;
};

void check_tile_config(const MvmArch& arch, const CrossbarConfig& cfg) {
    if (cfg.n_rows != arch.xbar_size || cfg.n_cols != arch.xbar_size)
        throw FuncsimError("crossbar configuration is " + std::to_string(cfg.n_rows) + "x" +
                           std::to_string(cfg.n_cols) + " but the architecture tiles at " +
                           std::to_string(arch.xbar_size));
}

}  // namespace

void MvmArch::validate() const {
    if (xbar_size < 1) throw FuncsimError("MvmArch: crossbar size must be positive");
    scheme.validate();
    if (adc_bits < 0 || adc_bits > 30) throw FuncsimError("MvmArch: adc_bits must lie in [0, 30] (0 = bypass)");
    if (adc_full_scale < 0.0) throw FuncsimError("MvmArch: negative ADC full scale");
    accumulator.validate();
}

double MvmArch::full_scale(const CrossbarConfig& cfg) const {
    return adc_full_scale > 0.0 ? adc_full_scale : xbar_size * cfg.g_on() * cfg.v_supply;
}

MvmCounters& MvmCounters::operator+=(const MvmCounters& o) {
    crossbar_evaluations += o.crossbar_evaluations;
    adc_clipped += o.adc_clipped;
    saturated += o.saturated;
    surrogate_clamped += o.surrogate_clamped;
    surrogate_fallbacks += o.surrogate_fallbacks;
    return *this;
}

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::ideal: return "ideal";
        case BackendKind::analytical_linear: return "analytical";
        case BackendKind::nonlinear_oracle: return "nonlinear";
        case BackendKind::surrogate: return "surrogate";
    }
    return "?";
}

BackendKind parse_backend_kind(const std::string& text) {
    if (text == "ideal") return BackendKind::ideal;
    if (text == "analytical" || text == "analytical_linear") return BackendKind::analytical_linear;
    if (text == "nonlinear" || text == "nonlinear_oracle") return BackendKind::nonlinear_oracle;
    if (text == "surrogate") return BackendKind::surrogate;
    throw std::invalid_argument("unknown backend '" + text + "' (ideal, analytical, nonlinear, surrogate)");
}

std::unique_ptr<CrossbarBackend> make_backend(BackendKind kind, const CrossbarConfig& cfg,
                                              const SurrogateModel* model) {
    cfg.validate();
    if (kind == BackendKind::surrogate) {
        if (!model) throw FuncsimError("surrogate backend needs a trained model");
        if (model->fingerprint != cfg.fingerprint())
            throw FuncsimError("surrogate model was trained for a different crossbar configuration");
    }
    return std::make_unique<SimpleBackend>(kind, cfg, model);
}

double slice_conductance(std::uint32_t slice, const SliceScheme& scheme, const CrossbarConfig& cfg) {
    const double g = cfg.g_off() + static_cast<double>(slice) / scheme.max_slice_value() * (cfg.g_on() - cfg.g_off());
    return std::clamp(g, cfg.g_off(), cfg.g_on());
}

std::uint32_t conductance_slice(double g, const SliceScheme& scheme, const CrossbarConfig& cfg) {
    const double s = (g - cfg.g_off()) / (cfg.g_on() - cfg.g_off()) * scheme.max_slice_value();
    return static_cast<std::uint32_t>(std::clamp(std::nearbyint(s), 0.0, static_cast<double>(scheme.max_slice_value())));
}

TiledWeights tile_and_program(const CodeMatrix& codes, const MvmArch& arch, const CrossbarConfig& cfg) {
    arch.validate();
    cfg.validate();
    if (codes.rows() < 1 || codes.cols() < 1) throw FuncsimError("tile_and_program: empty weight matrix");
    if (cfg.n_rows != arch.xbar_size || cfg.n_cols != arch.xbar_size)
        throw FuncsimError("tile_and_program: crossbar config is not xbar_size x xbar_size");
    TiledWeights t;
    t.rows = static_cast<int>(codes.rows());
    t.cols = static_cast<int>(codes.cols());
    t.xbar = arch.xbar_size;
    t.tr = (t.rows + t.xbar - 1) / t.xbar;
    t.tc = (t.cols + t.xbar - 1) / t.xbar;
    t.slices = arch.scheme.num_slices();
    const double g_off = cfg.g_off();
    t.conductance.assign(static_cast<std::size_t>(t.slices) * t.tr * t.tc * 2,
                         Eigen::MatrixXd::Constant(t.xbar, t.xbar, g_off));
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            const auto sliced = slice_weight(codes(i, j), arch.scheme);
            const int r = i / t.xbar;
            const int c = j / t.xbar;
            for (const auto* ch : {&sliced.positive, &sliced.negative}) {
                for (int k = 0; k < t.slices; ++k)
                    t.conductance[t.index(k, r, c, ch->sign_channel)](i % t.xbar, j % t.xbar) =
                        slice_conductance(ch->slices[k], arch.scheme, cfg);
            }
        }
    }
    return t;
}

StreamedInputs stream_inputs(const CodeMatrix& x, const MvmArch& arch) {
    arch.validate();
    StreamedInputs s;
    s.batch = static_cast<int>(x.cols());
    s.xr = arch.xbar_size;
    s.tr = static_cast<int>((x.rows() + s.xr - 1) / s.xr);
    s.streams = arch.scheme.num_streams();
    s.values.assign(static_cast<std::size_t>(s.batch) * s.tr * s.xr * s.streams, 0);
    s.sign.assign(static_cast<std::size_t>(s.batch) * s.tr * s.xr, 0);
    for (int b = 0; b < s.batch; ++b) {
        for (Eigen::Index k = 0; k < x.rows(); ++k) {
            const std::int64_t code = x(k, b);
            if (code == 0) continue;
            const auto streams = stream_input(code, arch.scheme);
            const std::size_t base = s.index(b, static_cast<int>(k / s.xr), static_cast<int>(k % s.xr));
            for (int q = 0; q < s.streams; ++q) s.values[base * s.streams + q] = static_cast<std::uint16_t>(streams[q]);
            if (code < 0) {
                s.sign[base] = 1;
                s.has_negative = true;
            }
        }
    }
    return s;
}

ProgrammedWeights::ProgrammedWeights(TiledWeights tiles, const CrossbarBackend& backend, unsigned threads)
    : tiles_(std::move(tiles)), cfg_(backend.config()) {
    if (cfg_.n_rows != tiles_.xbar || cfg_.n_cols != tiles_.xbar)
        throw FuncsimError("ProgrammedWeights: backend crossbar size differs from the tiling");
    if (threads == 0) threads = default_thread_count();
    crossbars_.resize(tiles_.conductance.size());
    parallel_for(crossbars_.size(), threads,
                 [&](unsigned, std::size_t i) { crossbars_[i] = backend.program(tiles_.conductance[i]); });
}

Eigen::MatrixXd adc(const Eigen::MatrixXd& i, const MvmArch& arch, const CrossbarConfig& cfg,
                    std::uint64_t* clipped) {
    if (arch.adc_bypassed()) return i;
    const double max_code = std::ldexp(1.0, arch.adc_bits) - 1.0;
    const double step = arch.full_scale(cfg) / max_code;
    std::uint64_t clips = 0;
    Eigen::MatrixXd out(i.rows(), i.cols());
    for (Eigen::Index c = 0; c < i.cols(); ++c)
        for (Eigen::Index r = 0; r < i.rows(); ++r) {
            double code = std::nearbyint(i(r, c) / step);
            if (code < 0.0 || code > max_code) {
                ++clips;
                code = std::clamp(code, 0.0, max_code);
            }
            out(r, c) = code * step;
        }
    if (clipped) *clipped += clips;
    return out;
}

std::int64_t accumulate_products(double sum, int product_frac_bits, const FxpFormat& accumulator,
                                 SaturationCounter* counter) {
    return round_to_format(sum, accumulator.frac_bits - product_frac_bits, accumulator, counter);
}

std::int64_t finish_output(std::int64_t acc, std::int64_t bias, const FxpFormat& accumulator,
                           const FxpFormat& output, SaturationCounter* counter) {
    const std::int64_t with_bias = rescale_code(acc + bias, 0, accumulator, counter);
    return rescale_code(with_bias, output.frac_bits - accumulator.frac_bits, output, counter);
}

CodeMatrix mvm(const StreamedInputs& inputs, const ProgrammedWeights& weights, const MvmArch& arch,
               int product_frac_bits, MvmCounters* counters) {
    const auto& t = weights.tiles();
    const auto& cfg = weights.config();
    const auto& scheme = arch.scheme;
    if (inputs.tr != t.tr || inputs.xr != t.xbar || inputs.streams != scheme.num_streams())
        throw FuncsimError("mvm: streamed inputs do not match the weight tiling");
    const int batch = inputs.batch;
    const int streams = inputs.streams;
    const double v_unit = cfg.v_supply / scheme.max_stream_value();
    const double g_unit = (cfg.g_on() - cfg.g_off()) / scheme.max_slice_value();
    const double offset = cfg.g_off() / g_unit;
    const double scale = 1.0 / (v_unit * g_unit);

    MvmCounters local;
    CodeMatrix out(t.cols, batch);
    std::vector<Eigen::MatrixXd> volts(streams + 1, Eigen::MatrixXd(t.xbar, batch));
    std::vector<Eigen::RowVectorXd> level_sum(streams + 1, Eigen::RowVectorXd(batch));

    // Digital partial product of one crossbar readout, in units of one
    // stream step times one slice step.
    auto partial = [&](const ProgrammedCrossbar& xbar, int q, int slice, int r, int c, SignChannel ch) {
        Eigen::MatrixXd current;
        try {
            current = xbar.evaluate(volts[q], &local);
        } catch (const SolverError& e) {
            throw FuncsimError("crossbar solve failed at tile (slice " + std::to_string(slice) + ", tr " +
                               std::to_string(r) + ", tc " + std::to_string(c) + ", " +
                               (ch == SignChannel::positive ? "positive" : "negative") + "): " + e.what());
        }
        ++local.crossbar_evaluations;
        Eigen::MatrixXd p = adc(current, arch, cfg, &local.adc_clipped) * scale;
        p.rowwise() -= offset * level_sum[q];
        if (arch.adc_bypassed()) p = p.unaryExpr([](double x) { return std::nearbyint(x); });
        return p;
    };

    for (int c = 0; c < t.tc; ++c) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(t.xbar, batch);
        for (int r = 0; r < t.tr; ++r) {
            for (int q = 0; q <= streams; ++q) {
                for (int b = 0; b < batch; ++b) {
                    double levels = 0.0;
                    for (int i = 0; i < t.xbar; ++i) {
                        const double value = q < streams ? inputs.value(b, r, i, q) : inputs.sign[inputs.index(b, r, i)];
                        volts[q](i, b) = value * v_unit;
                        levels += value;
                    }
                    level_sum[q](b) = levels;
                }
            }
            for (auto ch : {SignChannel::positive, SignChannel::negative}) {
                // Streams outer, slices inner, as in shift_and_add.
                Eigen::MatrixXd total = Eigen::MatrixXd::Zero(t.xbar, batch);
                for (int q = 0; q < streams; ++q) {
                    Eigen::MatrixXd per_stream = Eigen::MatrixXd::Zero(t.xbar, batch);
                    for (int k = 0; k < t.slices; ++k)
                        per_stream += std::ldexp(1.0, k * scheme.slice_width) *
                                      partial(weights.at(k, r, c, ch), q, k, r, c, ch);
                    total += std::ldexp(1.0, q * scheme.stream_width) * per_stream;
                }
                if (inputs.has_negative) {
                    Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(t.xbar, batch);
                    for (int k = 0; k < t.slices; ++k)
                        correction += std::ldexp(1.0, k * scheme.slice_width) *
                                      partial(weights.at(k, r, c, ch), streams, k, r, c, ch);
                    total -= std::ldexp(1.0, scheme.input_bits) * correction;
                }
                if (ch == SignChannel::positive)
                    sum += total;
                else
                    sum -= total;
            }
        }
        SaturationCounter sat;
        const int valid = t.tile_cols(c);
        for (int b = 0; b < batch; ++b)
            for (int j = 0; j < valid; ++j)
                out(c * t.xbar + j, b) = accumulate_products(sum(j, b), product_frac_bits, arch.accumulator, &sat);
        local.saturated += sat.saturated;
    }
    if (counters) *counters += local;
    return out;
}

void Conv2dLayer::validate() const {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || padding < 0)
        throw FuncsimError("Conv2dLayer: invalid geometry");
    const auto expected = static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    if (weight.size() != expected)
        throw FuncsimError("Conv2dLayer: weight holds " + std::to_string(weight.size()) + " codes, expected " +
                           std::to_string(expected));
    if (bias.size() != static_cast<std::size_t>(out_channels))
        throw FuncsimError("Conv2dLayer: bias length differs from out_channels");
}

CodeMatrix Conv2dLayer::matrix() const {
    validate();
    const int k2 = kernel * kernel;
    CodeMatrix m(in_channels * k2, out_channels);
    for (int o = 0; o < out_channels; ++o)
        for (int i = 0; i < in_channels * k2; ++i) m(i, o) = weight[static_cast<std::size_t>(o) * in_channels * k2 + i];
    return m;
}

void LinearLayer::validate() const {
    if (in_features < 1 || out_features < 1) throw FuncsimError("LinearLayer: invalid geometry");
    if (weight.size() != static_cast<std::size_t>(in_features) * out_features)
        throw FuncsimError("LinearLayer: weight holds " + std::to_string(weight.size()) + " codes, expected " +
                           std::to_string(static_cast<std::size_t>(in_features) * out_features));
    if (bias.size() != static_cast<std::size_t>(out_features))
        throw FuncsimError("LinearLayer: bias length differs from out_features");
}

CodeMatrix LinearLayer::matrix() const {
    validate();
    CodeMatrix m(in_features, out_features);
    for (int o = 0; o < out_features; ++o)
        for (int i = 0; i < in_features; ++i) m(i, o) = weight[static_cast<std::size_t>(o) * in_features + i];
    return m;
}

namespace {

// Runs columns [0, total) through the programmed layer in independent chunks;
// gather(first, count) returns the K x count input codes of those columns and
// scatter(first, acc) consumes the accumulator codes.
template <class Gather, class Scatter>
void run_columns(std::size_t total, const ProgrammedWeights& programmed, const MvmArch& arch, int product_frac_bits,
                 MvmCounters* counters, RunOptions options, Gather&& gather, Scatter&& scatter) {
    if (options.threads == 0) options.threads = default_thread_count();
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, options.chunk_columns));
    const std::size_t chunks = (total + chunk - 1) / chunk;
    std::vector<MvmCounters> per_chunk(chunks);
    parallel_for(chunks, options.threads, [&](unsigned, std::size_t k) {
        const std::size_t first = k * chunk;
        const std::size_t count = std::min(chunk, total - first);
        const CodeMatrix x = gather(first, count);
        const CodeMatrix acc = mvm(stream_inputs(x, arch), programmed, arch, product_frac_bits, &per_chunk[k]);
        scatter(first, acc);
    });
    if (counters)
        for (const auto& c : per_chunk) *counters += c;
}

}  // namespace

FeatureMap conv2d_mvm(const FeatureMap& input, const Conv2dLayer& layer, const LayerFormats& formats,
                      const MvmArch& arch, const CrossbarBackend& backend, MvmCounters* counters, RunOptions options) {
    layer.validate();
    check_tile_config(arch, backend.config());
    if (input.channels != layer.in_channels)
        throw FuncsimError("conv2d_mvm: input has " + std::to_string(input.channels) + " channels, layer expects " +
                           std::to_string(layer.in_channels));
    const int oh = layer.output_size(input.height);
    const int ow = layer.output_size(input.width);
    if (oh < 1 || ow < 1) throw FuncsimError("conv2d_mvm: kernel larger than padded input");

    const ProgrammedWeights programmed(tile_and_program(layer.matrix(), arch, backend.config()), backend,
                                       options.threads);
    const int k = layer.kernel;
    const int rows = layer.in_channels * k * k;
    const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
    FeatureMap out(input.batch, layer.out_channels, oh, ow);
    std::vector<SaturationCounter> sat(input.batch);

    auto gather = [&](std::size_t first, std::size_t count) {
        CodeMatrix x = CodeMatrix::Zero(rows, static_cast<Eigen::Index>(count));
        for (std::size_t col = 0; col < count; ++col) {
            const std::size_t id = first + col;
            const int b = static_cast<int>(id / pixels);
            const int oy = static_cast<int>(id % pixels) / ow;
            const int ox = static_cast<int>(id % pixels) % ow;
            for (int c = 0; c < layer.in_channels; ++c)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int y = oy * layer.stride - layer.padding + ky;
                        const int xx = ox * layer.stride - layer.padding + kx;
                        if (y < 0 || y >= input.height || xx < 0 || xx >= input.width) continue;
                        x((c * k + ky) * k + kx, static_cast<Eigen::Index>(col)) = input.at(b, c, y, xx);
                    }
        }
        return x;
    };
    SaturationCounter out_sat;
    std::mutex out_mutex;
    auto scatter = [&](std::size_t first, const CodeMatrix& acc) {
        SaturationCounter local;
        for (Eigen::Index col = 0; col < acc.cols(); ++col) {
            const std::size_t id = first + static_cast<std::size_t>(col);
            const int b = static_cast<int>(id / pixels);
            const int oy = static_cast<int>(id % pixels) / ow;
            const int ox = static_cast<int>(id % pixels) % ow;
            for (int o = 0; o < layer.out_channels; ++o)
                out.at(b, o, oy, ox) = finish_output(acc(o, col), layer.bias[o], arch.accumulator, formats.output, &local);
        }
        std::lock_guard lock(out_mutex);
        out_sat.saturated += local.saturated;
    };
    MvmCounters local;
    run_columns(static_cast<std::size_t>(input.batch) * pixels, programmed, arch,
                formats.input.frac_bits + formats.weight.frac_bits, &local, options, gather, scatter);
    local.saturated += out_sat.saturated;
    if (counters) *counters += local;
    return out;
}

CodeMatrix linear_mvm(const CodeMatrix& input, const LinearLayer& layer, const LayerFormats& formats,
                      const MvmArch& arch, const CrossbarBackend& backend, MvmCounters* counters, RunOptions options) {
    layer.validate();
    check_tile_config(arch, backend.config());
    if (input.rows() != layer.in_features)
        throw FuncsimError("linear_mvm: input has " + std::to_string(input.rows()) + " features, layer expects " +
                           std::to_string(layer.in_features));
    const ProgrammedWeights programmed(tile_and_program(layer.matrix(), arch, backend.config()), backend,
                                       options.threads);
    CodeMatrix out(layer.out_features, input.cols());
    SaturationCounter out_sat;
    std::mutex out_mutex;
    auto gather = [&](std::size_t first, std::size_t count) {
        return CodeMatrix(input.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)));
    };
    auto scatter = [&](std::size_t first, const CodeMatrix& acc) {
        SaturationCounter local;
        for (Eigen::Index col = 0; col < acc.cols(); ++col)
            for (int o = 0; o < layer.out_features; ++o)
                out(o, static_cast<Eigen::Index>(first) + col) =
                    finish_output(acc(o, col), layer.bias[o], arch.accumulator, formats.output, &local);
        std::lock_guard lock(out_mutex);
        out_sat.saturated += local.saturated;
    };
    MvmCounters local;
    run_columns(static_cast<std::size_t>(input.cols()), programmed, arch,
                formats.input.frac_bits + formats.weight.frac_bits, &local, options, gather, scatter);
    local.saturated += out_sat.saturated;
    if (counters) *counters += local;
    return out;
}

FeatureMap reference_conv2d(const FeatureMap& input, const Conv2dLayer& layer, const LayerFormats& formats,
                            const FxpFormat& accumulator, SaturationCounter* counter) {
    layer.validate();
    if (input.channels != layer.in_channels) throw FuncsimError("reference_conv2d: channel mismatch");
    const int oh = layer.output_size(input.height);
    const int ow = layer.output_size(input.width);
    const int k = layer.kernel;
    const int shift = accumulator.frac_bits - formats.input.frac_bits - formats.weight.frac_bits;
    FeatureMap out(input.batch, layer.out_channels, oh, ow);
    for (int b = 0; b < input.batch; ++b)
        for (int o = 0; o < layer.out_channels; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    std::int64_t sum = 0;
                    for (int c = 0; c < layer.in_channels; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int y = oy * layer.stride - layer.padding + ky;
                                const int x = ox * layer.stride - layer.padding + kx;
                                if (y < 0 || y >= input.height || x < 0 || x >= input.width) continue;
                                sum += input.at(b, c, y, x) *
                                       layer.weight[((static_cast<std::size_t>(o) * layer.in_channels + c) * k + ky) * k + kx];
                            }
                    const std::int64_t acc = rescale_code(sum, shift, accumulator, counter);
                    out.at(b, o, oy, ox) = finish_output(acc, layer.bias[o], accumulator, formats.output, counter);
                }
    return out;
}

CodeMatrix reference_linear(const CodeMatrix& input, const LinearLayer& layer, const LayerFormats& formats,
                            const FxpFormat& accumulator, SaturationCounter* counter) {
    layer.validate();
    if (input.rows() != layer.in_features) throw FuncsimError("reference_linear: feature count mismatch");
    const int shift = accumulator.frac_bits - formats.input.frac_bits - formats.weight.frac_bits;
    CodeMatrix out(layer.out_features, input.cols());
    for (Eigen::Index b = 0; b < input.cols(); ++b)
        for (int o = 0; o < layer.out_features; ++o) {
            std::int64_t sum = 0;
            for (int i = 0; i < layer.in_features; ++i)
                sum += input(i, b) * layer.weight[static_cast<std::size_t>(o) * layer.in_features + i];
            const std::int64_t acc = rescale_code(sum, shift, accumulator, counter);
            out(o, b) = finish_output(acc, layer.bias[o], accumulator, formats.output, counter);
        }
    return out;
}

}  // namespace xbemu
