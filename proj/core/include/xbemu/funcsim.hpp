#pragma once

// Functional simulator: convolution and fully connected layers as tiled,
// bit-sliced crossbar MVMs with per-crossbar ADCs and shift-and-add.
//
// A weight matrix of codes (K x M, out = x^T W) is cut into Tr x Tc tiles of
// Xr x Xc, each code is sliced and stored differentially, and every slice of
// every channel lives on its own crossbar. Inputs are streamed; stream value t
// drives t / (2^stream_width - 1) * v_supply on its row.

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xbemu/circuit.hpp"
#include "xbemu/fixedpoint.hpp"
#include "xbemu/surrogate.hpp"

namespace xbemu {

using CodeMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct MvmArch {
    int xbar_size = 64;
    SliceScheme scheme{};
    int adc_bits = 14;             // 0 bypasses the ADC
    double adc_full_scale = 0.0;   // A; 0 selects xbar_size * G_on * v_supply
    FxpFormat accumulator{32, 24, true};

    void validate() const;
    bool adc_bypassed() const { return adc_bits == 0; }
    double full_scale(const CrossbarConfig& cfg) const;
};

struct MvmCounters {
    std::uint64_t crossbar_evaluations = 0;
    std::uint64_t adc_clipped = 0;
    std::uint64_t saturated = 0;
    std::uint64_t surrogate_clamped = 0;
    std::uint64_t surrogate_fallbacks = 0;

    MvmCounters& operator+=(const MvmCounters& o);
};

class FuncsimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BackendKind { ideal, analytical_linear, nonlinear_oracle, surrogate };

const char* to_string(BackendKind kind);
BackendKind parse_backend_kind(const std::string& text);

// One crossbar with fixed conductances. evaluate() is const and thread-safe.
class ProgrammedCrossbar {
public:
    virtual ~ProgrammedCrossbar() = default;
    // v: n_rows x B volts -> n_cols x B amperes
    virtual Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, MvmCounters* counters) const = 0;
};

class CrossbarBackend {
public:
    virtual ~CrossbarBackend() = default;
    virtual BackendKind kind() const = 0;
    virtual std::unique_ptr<ProgrammedCrossbar> program(const Eigen::MatrixXd& g) const = 0;
    const CrossbarConfig& config() const { return cfg_; }

protected:
    explicit CrossbarBackend(CrossbarConfig cfg) : cfg_(std::move(cfg)) {}
    CrossbarConfig cfg_;
};

// The surrogate variant keeps a reference to `model`, which must outlive it.
std::unique_ptr<CrossbarBackend> make_backend(BackendKind kind, const CrossbarConfig& cfg,
                                              const SurrogateModel* model = nullptr);

// Linear slice-to-conductance map over [G_off, G_on] and its inverse.
double slice_conductance(std::uint32_t slice, const SliceScheme& scheme, const CrossbarConfig& cfg);
std::uint32_t conductance_slice(double g, const SliceScheme& scheme, const CrossbarConfig& cfg);

// Shape (Slices, Tr, Tc, channel) of Xr x Xc conductance matrices.
struct TiledWeights {
    int rows = 0;
    int cols = 0;
    int xbar = 0;
    int tr = 0;
    int tc = 0;
    int slices = 0;
    std::vector<Eigen::MatrixXd> conductance;

    std::size_t index(int slice, int r, int c, SignChannel ch) const {
        return ((static_cast<std::size_t>(slice) * tr + r) * tc + c) * 2 + (ch == SignChannel::negative ? 1 : 0);
    }
    const Eigen::MatrixXd& at(int slice, int r, int c, SignChannel ch) const { return conductance[index(slice, r, c, ch)]; }
    // Valid (unpadded) extent of a tile.
    int tile_rows(int r) const { return std::min(xbar, rows - r * xbar); }
    int tile_cols(int c) const { return std::min(xbar, cols - c * xbar); }
};

TiledWeights tile_and_program(const CodeMatrix& codes, const MvmArch& arch, const CrossbarConfig& cfg);

// Shape (Batch, Tr, Xr, Streams) of stream values plus the MSB of every
// input's two's-complement pattern. Rows beyond the matrix carry 0.
struct StreamedInputs {
    int batch = 0;
    int tr = 0;
    int xr = 0;
    int streams = 0;
    std::vector<std::uint16_t> values;
    std::vector<std::uint8_t> sign;
    bool has_negative = false;

    std::size_t index(int b, int r, int i) const {
        return (static_cast<std::size_t>(b) * tr + r) * xr + i;
    }
    std::uint16_t value(int b, int r, int i, int s) const { return values[index(b, r, i) * streams + s]; }
};

StreamedInputs stream_inputs(const CodeMatrix& x, const MvmArch& arch);

// Every tile programmed once into the chosen backend.
class ProgrammedWeights {
public:
    ProgrammedWeights(TiledWeights tiles, const CrossbarBackend& backend, unsigned threads = 0);

    const TiledWeights& tiles() const { return tiles_; }
    const ProgrammedCrossbar& at(int slice, int r, int c, SignChannel ch) const {
        return *crossbars_[tiles_.index(slice, r, c, ch)];
    }
    const CrossbarConfig& config() const { return cfg_; }

private:
    TiledWeights tiles_;
    CrossbarConfig cfg_;
    std::vector<std::unique_ptr<ProgrammedCrossbar>> crossbars_;
};

// Uniform quantization to adc_bits levels over [0, full scale]; values are
// returned as currents (code * step). Bypass returns the input unchanged.
Eigen::MatrixXd adc(const Eigen::MatrixXd& i, const MvmArch& arch, const CrossbarConfig& cfg,
                    std::uint64_t* clipped = nullptr);

// Accumulator codes (M x B) of x^T W, where x carries `product_frac_bits`
// of combined input and weight fraction.
CodeMatrix mvm(const StreamedInputs& inputs, const ProgrammedWeights& weights, const MvmArch& arch,
               int product_frac_bits, MvmCounters* counters = nullptr);

struct LayerFormats {
    FxpFormat input{16, 13, true};
    FxpFormat weight{16, 13, true};
    FxpFormat output{16, 13, true};
};

struct Conv2dLayer {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    std::vector<std::int64_t> weight;  // (out, in, ky, kx) weight codes
    std::vector<std::int64_t> bias;    // out, accumulator codes

    void validate() const;
    // K x M with K ordered (in channel, ky, kx).
    CodeMatrix matrix() const;
    int output_size(int input_size) const { return (input_size + 2 * padding - kernel) / stride + 1; }
};

struct LinearLayer {
    int in_features = 1;
    int out_features = 1;
    std::vector<std::int64_t> weight;  // (out, in) weight codes
    std::vector<std::int64_t> bias;    // out, accumulator codes

    void validate() const;
    CodeMatrix matrix() const;
};

struct FeatureMap {
    int batch = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::int64_t> codes;  // (b, c, y, x)

    FeatureMap() = default;
    FeatureMap(int b, int c, int h, int w) : batch(b), channels(c), height(h), width(w), codes(size(), 0) {}
    std::size_t size() const { return static_cast<std::size_t>(batch) * channels * height * width; }
    std::size_t offset(int b, int c, int y, int x) const {
        return ((static_cast<std::size_t>(b) * channels + c) * height + y) * width + x;
    }
    std::int64_t& at(int b, int c, int y, int x) { return codes[offset(b, c, y, x)]; }
    std::int64_t at(int b, int c, int y, int x) const { return codes[offset(b, c, y, x)]; }
    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

struct RunOptions {
    unsigned threads = 0;
    int chunk_columns = 4096;  // MVM columns per work item
};

// Each output pixel of every image is one MVM column ("one pixel from all
// output channels"); bias is added in the accumulator and the result is
// rounded into formats.output.
FeatureMap conv2d_mvm(const FeatureMap& input, const Conv2dLayer& layer, const LayerFormats& formats,
                      const MvmArch& arch, const CrossbarBackend& backend, MvmCounters* counters = nullptr,
                      RunOptions options = {});

// input: in_features x B codes -> out_features x B codes.
CodeMatrix linear_mvm(const CodeMatrix& input, const LinearLayer& layer, const LayerFormats& formats,
                      const MvmArch& arch, const CrossbarBackend& backend, MvmCounters* counters = nullptr,
                      RunOptions options = {});

// Plain quantized layers with exact integer sums and the same rounding.
FeatureMap reference_conv2d(const FeatureMap& input, const Conv2dLayer& layer, const LayerFormats& formats,
                            const FxpFormat& accumulator, SaturationCounter* counter = nullptr);
CodeMatrix reference_linear(const CodeMatrix& input, const LinearLayer& layer, const LayerFormats& formats,
                            const FxpFormat& accumulator, SaturationCounter* counter = nullptr);

// Rounds a product-unit sum into the accumulator (shared by both paths).
std::int64_t accumulate_products(double sum, int product_frac_bits, const FxpFormat& accumulator,
                                 SaturationCounter* counter = nullptr);
// Adds an accumulator-unit bias and rounds into the output format.
std::int64_t finish_output(std::int64_t acc, std::int64_t bias, const FxpFormat& accumulator,
                           const FxpFormat& output, SaturationCounter* counter = nullptr);

}  // namespace xbemu
