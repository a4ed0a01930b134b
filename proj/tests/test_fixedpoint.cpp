#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "xbemu/fixedpoint.hpp"

using namespace xbemu;

namespace {

// Round-half-even of num / 2^right on exact integers, long-hand.
std::int64_t naive_round_shift(std::int64_t num, int right) {
    const long double exact = static_cast<long double>(num) / std::ldexp(1.0L, right);
    const long double fl = std::floor(exact);
    const long double diff = exact - fl;
    auto q = static_cast<std::int64_t>(fl);
    if (diff > 0.5L || (diff == 0.5L && (q % 2 != 0))) ++q;
    return q;
}

}  // namespace

TEST(Format, Ranges) {
    FxpFormat q{16, 13, true};
    EXPECT_EQ(q.min_code(), -32768);
    EXPECT_EQ(q.max_code(), 32767);
    EXPECT_DOUBLE_EQ(q.lsb(), 1.0 / 8192);
    EXPECT_DOUBLE_EQ(q.max_value(), 32767.0 / 8192);
    FxpFormat u{8, 0, false};
    EXPECT_EQ(u.min_code(), 0);
    EXPECT_EQ(u.max_code(), 255);
    EXPECT_EQ(q.to_string(), "Q16.13");
    EXPECT_THROW((FxpFormat{16, 16, true}.validate()), std::invalid_argument);
    EXPECT_THROW((FxpFormat{63, 1, true}.validate()), std::invalid_argument);
}

TEST(Quantize, RoundsHalfToEven) {
    FxpFormat f{8, 1, true};
    EXPECT_EQ(quantize(0.25, f), 0);   // 0.5 -> 0
    EXPECT_EQ(quantize(0.75, f), 2);   // 1.5 -> 2
    EXPECT_EQ(quantize(-0.25, f), 0);
    EXPECT_EQ(quantize(-0.75, f), -2);
    EXPECT_EQ(quantize(1.2, f), 2);
}

TEST(Quantize, SaturatesAndCounts) {
    FxpFormat f{8, 4, true};
    SaturationCounter c;
    EXPECT_EQ(quantize(100.0, f, &c), 127);
    EXPECT_EQ(quantize(-100.0, f, &c), -128);
    EXPECT_EQ(quantize(7.9375, f, &c), 127);  // exactly max: not a saturation
    EXPECT_EQ(c.saturated, 2u);
    EXPECT_EQ(quantize(std::nan(""), f, &c), 0);
    EXPECT_EQ(c.saturated, 3u);
}

TEST(Quantize, RoundTripWithinHalfLsb) {
    FxpFormat f{16, 13, true};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.9, 3.9);
    for (int k = 0; k < 1000; ++k) {
        const double x = u(rng);
        EXPECT_LE(std::abs(dequantize(quantize(x, f), f) - x), 0.5 * f.lsb() + 1e-15);
    }
}

TEST(Rescale, MatchesLongHandRounding) {
    FxpFormat acc{40, 20, true};
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::int64_t> u(-(std::int64_t{1} << 38), std::int64_t{1} << 38);
    for (int k = 0; k < 2000; ++k) {
        const std::int64_t code = u(rng);
        const int right = 1 + k % 20;
        EXPECT_EQ(rescale_code(code, -right, acc), naive_round_shift(code, right)) << code << " >> " << right;
    }
    EXPECT_EQ(rescale_code(3, 4, acc), 48);
    SaturationCounter c;
    EXPECT_EQ(rescale_code(1, 45, acc, &c), acc.max_code());
    EXPECT_EQ(c.saturated, 1u);
}

TEST(Rescale, AgreesWithRoundToFormat) {
    FxpFormat out{16, 13, true};
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> u(-(1 << 22), 1 << 22);
    for (int k = 0; k < 2000; ++k) {
        const std::int64_t code = u(rng);
        EXPECT_EQ(rescale_code(code, -11, out), round_to_format(static_cast<double>(code), -11, out));
    }
}

TEST(Slicing, RecombinesToCode) {
    std::mt19937_64 rng(4);
    for (SliceScheme s : {SliceScheme{16, 4, 16, 4}, SliceScheme{8, 1, 8, 2}, SliceScheme{4, 2, 4, 1},
                          SliceScheme{16, 2, 16, 8}}) {
        s.validate();
        const std::int64_t limit = (std::int64_t{1} << (s.weight_bits - 1)) - 1;
        std::uniform_int_distribution<std::int64_t> u(-limit, limit);
        for (int k = 0; k < 200; ++k) {
            const auto code = u(rng);
            const auto w = slice_weight(code, s);
            std::int64_t pos = 0, neg = 0;
            for (int i = s.num_slices(); i-- > 0;) {
                ASSERT_LE(w.positive.slices[i], s.max_slice_value());
                pos = (pos << s.slice_width) + w.positive.slices[i];
                neg = (neg << s.slice_width) + w.negative.slices[i];
            }
            EXPECT_EQ(pos - neg, code);
            EXPECT_TRUE(w.positive.is_zero() || w.negative.is_zero());
        }
    }
    EXPECT_THROW(slice_weight(128, SliceScheme{8, 4, 8, 4}), std::out_of_range);
    EXPECT_THROW(slice_weight(-128, SliceScheme{8, 4, 8, 4}), std::out_of_range);
    EXPECT_THROW((SliceScheme{16, 3, 16, 4}.validate()), std::invalid_argument);
}

TEST(Streaming, TwosComplementDecomposition) {
    SliceScheme s{8, 4, 8, 2};
    for (std::int64_t code = -128; code < 128; ++code) {
        const auto streams = stream_input(code, s);
        std::int64_t pattern = 0;
        for (int i = s.num_streams(); i-- > 0;) pattern = (pattern << s.stream_width) + streams[i];
        const std::int64_t value = pattern - (static_cast<std::int64_t>(input_sign_bit(code, s)) << s.input_bits);
        EXPECT_EQ(value, code);
    }
    EXPECT_THROW(stream_input(128, s), std::out_of_range);
}

// Builds partials the way a crossbar would (one stream times one slice) and
// checks the recombination equals the plain product.
TEST(ShiftAndAdd, EqualsIntegerProduct) {
    std::mt19937_64 rng(5);
    for (SliceScheme s : {SliceScheme{16, 4, 16, 4}, SliceScheme{8, 2, 8, 1}, SliceScheme{4, 1, 4, 2}}) {
        const std::int64_t wl = (std::int64_t{1} << (s.weight_bits - 1)) - 1;
        const std::int64_t xl = std::int64_t{1} << (s.input_bits - 1);
        std::uniform_int_distribution<std::int64_t> uw(-wl, wl), ux(-xl, xl - 1);
        for (int k = 0; k < 300; ++k) {
            const int len = 1 + k % 7;
            std::int64_t expect = 0;
            Eigen::MatrixXd pp = Eigen::MatrixXd::Zero(s.num_streams(), s.num_slices());
            Eigen::MatrixXd pn = pp;
            Eigen::VectorXd sp = Eigen::VectorXd::Zero(s.num_slices()), sn = sp;
            for (int e = 0; e < len; ++e) {
                const auto w = uw(rng), x = ux(rng);
                expect += w * x;
                const auto sw = slice_weight(w, s);
                const auto sx = stream_input(x, s);
                const auto sign = input_sign_bit(x, s);
                for (int q = 0; q < s.num_streams(); ++q)
                    for (int j = 0; j < s.num_slices(); ++j) {
                        pp(q, j) += double(sx[q]) * sw.positive.slices[j];
                        pn(q, j) += double(sx[q]) * sw.negative.slices[j];
                    }
                for (int j = 0; j < s.num_slices(); ++j) {
                    sp(j) += double(sign) * sw.positive.slices[j];
                    sn(j) += double(sign) * sw.negative.slices[j];
                }
            }
            const double got = shift_and_add(pp, s, SignChannel::positive, sp) +
                               shift_and_add(pn, s, SignChannel::negative, sn);
            EXPECT_EQ(static_cast<std::int64_t>(got), expect);
        }
    }
}

TEST(ShiftAndAdd, AccumulatorRounding) {
    SliceScheme s{4, 4, 4, 4};
    Eigen::MatrixXd p(1, 1);
    p << 6.0;
    AccumulatorTarget acc{{8, 1, true}, 3};  // 6 / 2^3 = 0.75 -> code 1.5 -> 2
    EXPECT_EQ(shift_and_add(p, s, SignChannel::positive, acc), 2);
    p << 2.0;  // 0.25 -> code 0.5 -> 0
    EXPECT_EQ(shift_and_add(p, s, SignChannel::positive, acc), 0);
    EXPECT_THROW(shift_and_add(Eigen::MatrixXd::Zero(2, 1), s, SignChannel::positive), std::invalid_argument);
}
