#pragma once

// Named-tensor container ("XBMT"): u16 version, u32 block count, a block
// table of (name, dtype, shape, payload offset, byte length), then the
// little-endian payload.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace xbemu {

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i64 = 3, u8 = 4 };

const char* to_string(DType dtype);
std::size_t dtype_size(DType dtype);

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TensorBlock {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    std::vector<char> bytes;

    std::size_t elements() const;
    std::string shape_string() const;
    std::vector<double> to_doubles() const;
    std::string to_text() const;  // u8 blocks only

    static TensorBlock from_doubles(std::string name, DType dtype, std::vector<std::int64_t> shape,
                                    const std::vector<double>& values);
    static TensorBlock from_text(std::string name, const std::string& text);

    friend bool operator==(const TensorBlock&, const TensorBlock&) = default;
};

struct TensorFile {
    std::vector<TensorBlock> blocks;

    const TensorBlock* find(const std::string& name) const;
    const TensorBlock& get(const std::string& name) const;  // FormatError when absent
    void put(TensorBlock block);                            // replaces a block of the same name

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

void write_tensor_file(const TensorFile& file, std::ostream& out);
void write_tensor_file(const TensorFile& file, const std::string& path);
TensorFile read_tensor_file(std::istream& in);
TensorFile read_tensor_file(const std::string& path);

}  // namespace xbemu
