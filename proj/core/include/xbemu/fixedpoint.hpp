#pragma once

// Fixed-point codes and the bit-serial decomposition used by crossbar MVM.
//
// Weights are sliced into unsigned groups of `slice_width` bits (one group per
// device) and stored differentially: a positive and a negative channel, of
// which at most one is nonzero. Inputs are streamed as unsigned chunks of their
// two's-complement pattern; the top bit of that pattern carries weight
// -2^input_bits in the recombination.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace xbemu {

struct FxpFormat {
    int total_bits = 16;
    int frac_bits = 13;
    bool is_signed = true;

    // Accumulators may be wider than data formats; everything else is <= 32.
    static constexpr int kMaxBits = 62;

    void validate() const;
    std::int64_t min_code() const;
    std::int64_t max_code() const;
    double lsb() const;
    double min_value() const;
    double max_value() const;
    std::string to_string() const;

    friend bool operator==(const FxpFormat&, const FxpFormat&) = default;
};

// Diagnostics for silent saturation. Not thread-safe; use one per worker.
struct SaturationCounter {
    std::uint64_t saturated = 0;
};

std::int64_t quantize(double x, const FxpFormat& fmt, SaturationCounter* counter = nullptr);
double dequantize(std::int64_t code, const FxpFormat& fmt);

// Rounds x * 2^shift to the nearest integer (ties to even) and saturates into fmt.
std::int64_t round_to_format(double x, int shift, const FxpFormat& fmt,
                             SaturationCounter* counter = nullptr);

// Same as round_to_format for integer sources; exact for any shift.
std::int64_t rescale_code(std::int64_t code, int shift, const FxpFormat& fmt,
                          SaturationCounter* counter = nullptr);

struct SliceScheme {
    int weight_bits = 16;
    int slice_width = 4;
    int input_bits = 16;
    int stream_width = 4;

    void validate() const;
    int num_slices() const { return weight_bits / slice_width; }
    int num_streams() const { return input_bits / stream_width; }
    std::uint32_t max_slice_value() const { return (1u << slice_width) - 1u; }
    std::uint32_t max_stream_value() const { return (1u << stream_width) - 1u; }

    friend bool operator==(const SliceScheme&, const SliceScheme&) = default;
};

enum class SignChannel { positive, negative };

struct SlicedValue {
    std::vector<std::uint32_t> slices;  // least significant first
    SignChannel sign_channel = SignChannel::positive;

    bool is_zero() const;
};

struct SlicedWeight {
    SlicedValue positive;
    SlicedValue negative;
};

// Throws std::out_of_range unless |code| < 2^(weight_bits-1).
SlicedWeight slice_weight(std::int64_t code, const SliceScheme& scheme);

// Unsigned little-endian chunks of the input_bits two's-complement pattern.
// Throws std::out_of_range outside the signed input_bits range.
std::vector<std::uint32_t> stream_input(std::int64_t code, const SliceScheme& scheme);

// Top bit of the two's-complement pattern (1 for negative codes).
std::uint32_t input_sign_bit(std::int64_t code, const SliceScheme& scheme);

// Recombines per-(stream, slice) partial products:
//   sum_s sum_k 2^(s*stream_width + k*slice_width) * partials(s, k)
//   - 2^input_bits * sum_k 2^(k*slice_width) * sign_partials(k)
// where sign_partials holds the partials for the MSB bit-stream (empty when all
// inputs are nonnegative). The negative channel flips the sign of the result.
// Exact in double as long as the true value stays below 2^53.
double shift_and_add(const Eigen::Ref<const Eigen::MatrixXd>& partials, const SliceScheme& scheme,
                     SignChannel channel,
                     const Eigen::Ref<const Eigen::VectorXd>& sign_partials = Eigen::VectorXd());

// Accumulating form: the recombined value is expressed in units of
// 2^-product_frac_bits and rounded/saturated into the accumulator format.
struct AccumulatorTarget {
    FxpFormat format{32, 24, true};
    int product_frac_bits = 26;
};

std::int64_t shift_and_add(const Eigen::Ref<const Eigen::MatrixXd>& partials, const SliceScheme& scheme,
                           SignChannel channel, const AccumulatorTarget& acc,
                           SaturationCounter* counter = nullptr,
                           const Eigen::Ref<const Eigen::VectorXd>& sign_partials = Eigen::VectorXd());

}  // namespace xbemu
