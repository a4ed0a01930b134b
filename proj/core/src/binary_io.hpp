#pragma once

// Little-endian primitives shared by the on-disk containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xbemu::io {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
    template <class T>
    void scalar(T value) {
        bytes(&value, sizeof value);
    }
    void u8(std::uint8_t v) { scalar(v); }
    void u16(std::uint16_t v) { scalar(v); }
    void u32(std::uint32_t v) { scalar(v); }
    void u64(std::uint64_t v) { scalar(v); }
    void f64(double v) { scalar(v); }
    void f64s(const double* p, std::size_t n) { bytes(p, n * sizeof(double)); }

private:
    std::ostream& out_;
};

// Reads from a fully buffered byte image; every read is bounds-checked and a
// short read raises Error with the given context.
template <class Error>
class Reader {
public:
    Reader(std::vector<char> data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

    static Reader from_stream(std::istream& in, std::string what) {
        std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return Reader(std::move(buf), std::move(what));
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    std::size_t size() const { return data_.size(); }

    void bytes(void* dst, std::size_t n) {
        if (n > remaining()) throw Error(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                                         std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    template <class T>
    T scalar() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }
    std::uint8_t u8() { return scalar<std::uint8_t>(); }
    std::uint16_t u16() { return scalar<std::uint16_t>(); }
    std::uint32_t u32() { return scalar<std::uint32_t>(); }
    std::uint64_t u64() { return scalar<std::uint64_t>(); }
    double f64() { return scalar<double>(); }
    void f64s(double* p, std::size_t n) { bytes(p, n * sizeof(double)); }
    void seek(std::size_t pos) {
        if (pos > data_.size()) throw Error(what_ + ": offset past end of file");
        pos_ = pos;
    }
    const char* at(std::size_t pos) const { return data_.data() + pos; }

    void expect_magic(const char (&magic)[5]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, magic, 4) != 0) throw Error(what_ + ": bad magic, expected '" + std::string(magic) + "'");
    }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

}  // namespace xbemu::io
