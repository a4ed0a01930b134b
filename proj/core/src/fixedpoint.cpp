#include "xbemu/fixedpoint.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace xbemu {

namespace {

__extension__ typedef __int128 int128;

std::int64_t saturate(int128 v, const FxpFormat& fmt, SaturationCounter* counter) {
    const auto lo = static_cast<int128>(fmt.min_code());
    const auto hi = static_cast<int128>(fmt.max_code());
    if (v < lo || v > hi) {
        if (counter) ++counter->saturated;
        return static_cast<std::int64_t>(v < lo ? lo : hi);
    }
    return static_cast<std::int64_t>(v);
}

}  // namespace

void FxpFormat::validate() const {
    if (total_bits < 1 || total_bits > kMaxBits)
        throw std::invalid_argument("FxpFormat: total_bits out of range: " + std::to_string(total_bits));
    if (frac_bits < 0 || frac_bits >= total_bits)
        throw std::invalid_argument("FxpFormat: frac_bits must lie in [0, total_bits): " + to_string());
}

std::int64_t FxpFormat::min_code() const {
    return is_signed ? -(std::int64_t{1} << (total_bits - 1)) : 0;
}

std::int64_t FxpFormat::max_code() const {
    return is_signed ? (std::int64_t{1} << (total_bits - 1)) - 1 : (std::int64_t{1} << total_bits) - 1;
}

double FxpFormat::lsb() const { return std::ldexp(1.0, -frac_bits); }
double FxpFormat::min_value() const { return std::ldexp(static_cast<double>(min_code()), -frac_bits); }
double FxpFormat::max_value() const { return std::ldexp(static_cast<double>(max_code()), -frac_bits); }

std::string FxpFormat::to_string() const {
    return (is_signed ? "Q" : "UQ") + std::to_string(total_bits) + "." + std::to_string(frac_bits);
}

std::int64_t quantize(double x, const FxpFormat& fmt, SaturationCounter* counter) {
    return round_to_format(x, fmt.frac_bits, fmt, counter);
}

double dequantize(std::int64_t code, const FxpFormat& fmt) {
    return std::ldexp(static_cast<double>(code), -fmt.frac_bits);
}

std::int64_t round_to_format(double x, int shift, const FxpFormat& fmt, SaturationCounter* counter) {
    if (std::isnan(x)) {
        if (counter) ++counter->saturated;
        return 0;
    }
    // nearbyint honours the default FE_TONEAREST mode: ties to even.
    const double scaled = std::nearbyint(std::ldexp(x, shift));
    if (scaled <= static_cast<double>(fmt.min_code())) {
        if (scaled < static_cast<double>(fmt.min_code()) && counter) ++counter->saturated;
        return fmt.min_code();
    }
    if (scaled >= static_cast<double>(fmt.max_code())) {
        if (scaled > static_cast<double>(fmt.max_code()) && counter) ++counter->saturated;
        return fmt.max_code();
    }
    return static_cast<std::int64_t>(scaled);
}

std::int64_t rescale_code(std::int64_t code, int shift, const FxpFormat& fmt, SaturationCounter* counter) {
    if (shift >= 0) {
        if (shift >= 63) {
            if (code == 0) return 0;
            if (counter) ++counter->saturated;
            return code < 0 ? fmt.min_code() : fmt.max_code();
        }
        return saturate(static_cast<int128>(code) * (static_cast<int128>(1) << shift), fmt, counter);
    }
    const int right = -shift;
    if (right >= 63) return 0;
    const std::int64_t divisor = std::int64_t{1} << right;
    // floor division, then round half to even on the remainder
    std::int64_t q = code / divisor;
    std::int64_t r = code % divisor;
    if (r < 0) {
        r += divisor;
        q -= 1;
    }
    const std::int64_t twice = 2 * r;
    if (twice > divisor || (twice == divisor && (q & 1) != 0)) q += 1;
    return saturate(q, fmt, counter);
}

void SliceScheme::validate() const {
    if (weight_bits < 1 || weight_bits > 32 || input_bits < 1 || input_bits > 32)
        throw std::invalid_argument("SliceScheme: weight_bits/input_bits must lie in [1, 32]");
    if (slice_width < 1 || slice_width > 16 || weight_bits % slice_width != 0)
        throw std::invalid_argument("SliceScheme: slice_width must divide weight_bits");
    if (stream_width < 1 || stream_width > 16 || input_bits % stream_width != 0)
        throw std::invalid_argument("SliceScheme: stream_width must divide input_bits");
}

bool SlicedValue::is_zero() const {
    for (auto s : slices)
        if (s != 0) return false;
    return true;
}

SlicedWeight slice_weight(std::int64_t code, const SliceScheme& scheme) {
    const std::int64_t limit = std::int64_t{1} << (scheme.weight_bits - 1);
    if (code <= -limit || code >= limit)
        throw std::out_of_range("slice_weight: code " + std::to_string(code) + " outside +/-(2^" +
                                std::to_string(scheme.weight_bits - 1) + " - 1)");
    const int n = scheme.num_slices();
    SlicedWeight out;
    out.positive.slices.assign(n, 0);
    out.positive.sign_channel = SignChannel::positive;
    out.negative.slices.assign(n, 0);
    out.negative.sign_channel = SignChannel::negative;

    auto& target = code < 0 ? out.negative.slices : out.positive.slices;
    auto magnitude = static_cast<std::uint64_t>(code < 0 ? -code : code);
    const std::uint64_t mask = scheme.max_slice_value();
    for (int k = 0; k < n; ++k) {
        target[k] = static_cast<std::uint32_t>(magnitude & mask);
        magnitude >>= scheme.slice_width;
    }
    return out;
}

std::vector<std::uint32_t> stream_input(std::int64_t code, const SliceScheme& scheme) {
    const std::int64_t half = std::int64_t{1} << (scheme.input_bits - 1);
    if (code < -half || code >= half)
        throw std::out_of_range("stream_input: code " + std::to_string(code) + " outside signed " +
                                std::to_string(scheme.input_bits) + "-bit range");
    const std::uint64_t pattern_mask = (std::uint64_t{1} << scheme.input_bits) - 1;
    std::uint64_t pattern = static_cast<std::uint64_t>(code) & pattern_mask;
    const std::uint64_t mask = scheme.max_stream_value();
    std::vector<std::uint32_t> streams(scheme.num_streams());
    for (auto& s : streams) {
        s = static_cast<std::uint32_t>(pattern & mask);
        pattern >>= scheme.stream_width;
    }
    return streams;
}

std::uint32_t input_sign_bit(std::int64_t code, const SliceScheme& scheme) {
    const std::int64_t half = std::int64_t{1} << (scheme.input_bits - 1);
    if (code < -half || code >= half)
        throw std::out_of_range("input_sign_bit: code outside signed input range");
    return code < 0 ? 1u : 0u;
}

double shift_and_add(const Eigen::Ref<const Eigen::MatrixXd>& partials, const SliceScheme& scheme,
                     SignChannel channel, const Eigen::Ref<const Eigen::VectorXd>& sign_partials) {
    const int streams = scheme.num_streams();
    const int slices = scheme.num_slices();
    if (partials.rows() != streams || partials.cols() != slices)
        throw std::invalid_argument("shift_and_add: partials must be streams x slices");
    if (sign_partials.size() != 0 && sign_partials.size() != slices)
        throw std::invalid_argument("shift_and_add: sign partials must have one entry per slice");

    // Streams outer, slices inner; every factor is a power of two.
    double total = 0.0;
    for (int s = 0; s < streams; ++s) {
        double per_stream = 0.0;
        for (int k = 0; k < slices; ++k)
            per_stream += std::ldexp(partials(s, k), k * scheme.slice_width);
        total += std::ldexp(per_stream, s * scheme.stream_width);
    }
    if (sign_partials.size() != 0) {
        double correction = 0.0;
        for (int k = 0; k < slices; ++k)
            correction += std::ldexp(sign_partials(k), k * scheme.slice_width);
        total -= std::ldexp(correction, scheme.input_bits);
    }
    return channel == SignChannel::negative ? -total : total;
}

std::int64_t shift_and_add(const Eigen::Ref<const Eigen::MatrixXd>& partials, const SliceScheme& scheme,
                           SignChannel channel, const AccumulatorTarget& acc, SaturationCounter* counter,
                           const Eigen::Ref<const Eigen::VectorXd>& sign_partials) {
    const double value = shift_and_add(partials, scheme, channel, sign_partials);
    return round_to_format(value, acc.format.frac_bits - acc.product_frac_bits, acc.format, counter);
}

}  // namespace xbemu
