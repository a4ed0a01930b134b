#include "xbemu/tensor_file.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"

namespace xbemu {

namespace {

constexpr std::uint16_t kTensorVersion = 1;

}  // namespace

const char* to_string(DType dtype) {
    switch (dtype) {
        case DType::f32: return "f32";
        case DType::f64: return "f64";
        case DType::i64: return "i64";
        case DType::u8: return "u8";
    }
    return "?";
}

std::size_t dtype_size(DType dtype) {
    switch (dtype) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::i64: return 8;
        case DType::u8: return 1;
    }
    throw FormatError("unknown dtype tag " + std::to_string(static_cast<int>(dtype)));
}

std::size_t TensorBlock::elements() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string TensorBlock::shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + ")";
}

std::vector<double> TensorBlock::to_doubles() const {
    const std::size_t n = elements();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const char* p = bytes.data() + i * dtype_size(dtype);
        switch (dtype) {
            case DType::f32: {
                float f;
                std::memcpy(&f, p, 4);
                out[i] = f;
                break;
            }
            case DType::f64: std::memcpy(&out[i], p, 8); break;
            case DType::i64: {
                std::int64_t v;
                std::memcpy(&v, p, 8);
                out[i] = static_cast<double>(v);
                break;
            }
            case DType::u8: out[i] = static_cast<unsigned char>(*p); break;
        }
    }
    return out;
}

std::string TensorBlock::to_text() const {
    if (dtype != DType::u8) throw FormatError("block '" + name + "' is not a text block");
    return std::string(bytes.begin(), bytes.end());
}

TensorBlock TensorBlock::from_doubles(std::string name, DType dtype, std::vector<std::int64_t> shape,
                                      const std::vector<double>& values) {
    TensorBlock b;
    b.name = std::move(name);
    b.dtype = dtype;
    b.shape = std::move(shape);
    if (b.elements() != values.size())
        throw FormatError("block '" + b.name + "': " + std::to_string(values.size()) + " values for shape " +
                          b.shape_string());
    b.bytes.resize(values.size() * dtype_size(dtype));
    for (std::size_t i = 0; i < values.size(); ++i) {
        char* p = b.bytes.data() + i * dtype_size(dtype);
        switch (dtype) {
            case DType::f32: {
                const float f = static_cast<float>(values[i]);
                std::memcpy(p, &f, 4);
                break;
            }
            case DType::f64: std::memcpy(p, &values[i], 8); break;
            case DType::i64: {
                const auto v = static_cast<std::int64_t>(values[i]);
                std::memcpy(p, &v, 8);
                break;
            }
            case DType::u8: *p = static_cast<char>(static_cast<unsigned char>(values[i])); break;
        }
    }
    return b;
}

TensorBlock TensorBlock::from_text(std::string name, const std::string& text) {
    TensorBlock b;
    b.name = std::move(name);
    b.dtype = DType::u8;
    b.shape = {static_cast<std::int64_t>(text.size())};
    b.bytes.assign(text.begin(), text.end());
    return b;
}

const TensorBlock* TensorFile::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return &b;
    return nullptr;
}

const TensorBlock& TensorFile::get(const std::string& name) const {
    if (const auto* b = find(name)) return *b;
    throw FormatError("missing block '" + name + "'");
}

void TensorFile::put(TensorBlock block) {
    for (auto& b : blocks)
        if (b.name == block.name) {
            b = std::move(block);
            return;
        }
    blocks.push_back(std::move(block));
}

void write_tensor_file(const TensorFile& file, std::ostream& out) {
    io::Writer w(out);
    w.bytes("XBMT", 4);
    w.u16(kTensorVersion);
    w.u32(static_cast<std::uint32_t>(file.blocks.size()));
    std::uint64_t offset = 0;
    for (const auto& b : file.blocks) {
        if (b.name.empty() || b.name.size() > 0xFFFF) throw FormatError("invalid block name");
        if (b.shape.size() > 0xFF) throw FormatError("block '" + b.name + "': too many dimensions");
        if (b.bytes.size() != b.elements() * dtype_size(b.dtype))
            throw FormatError("block '" + b.name + "': payload does not match shape " + b.shape_string());
        w.u16(static_cast<std::uint16_t>(b.name.size()));
        w.bytes(b.name.data(), b.name.size());
        w.u8(static_cast<std::uint8_t>(b.dtype));
        w.u8(static_cast<std::uint8_t>(b.shape.size()));
        for (auto d : b.shape) w.u64(static_cast<std::uint64_t>(d));
        w.u64(offset);
        w.u64(b.bytes.size());
        offset += b.bytes.size();
    }
    for (const auto& b : file.blocks) w.bytes(b.bytes.data(), b.bytes.size());
    if (!out) throw FormatError("write_tensor_file: stream write failed");
}

TensorFile read_tensor_file(std::istream& in) {
    auto r = io::Reader<FormatError>::from_stream(in, "read_tensor_file");
    r.expect_magic("XBMT");
    const auto version = r.u16();
    if (version != kTensorVersion) throw FormatError("read_tensor_file: unsupported version " + std::to_string(version));
    const auto count = r.u32();
    struct Entry {
        TensorBlock block;
        std::uint64_t offset, length;
    };
    std::vector<Entry> entries;
    for (std::uint32_t k = 0; k < count; ++k) {
        Entry e;
        const auto len = r.u16();
        e.block.name.resize(len);
        r.bytes(e.block.name.data(), len);
        const auto tag = r.u8();
        if (tag < 1 || tag > 4) throw FormatError("block '" + e.block.name + "': unknown dtype tag");
        e.block.dtype = static_cast<DType>(tag);
        const auto ndim = r.u8();
        for (int d = 0; d < ndim; ++d) e.block.shape.push_back(static_cast<std::int64_t>(r.u64()));
        e.offset = r.u64();
        e.length = r.u64();
        if (e.length != e.block.elements() * dtype_size(e.block.dtype))
            throw FormatError("block '" + e.block.name + "': byte length disagrees with shape " +
                              e.block.shape_string());
        entries.push_back(std::move(e));
    }
    const std::size_t payload = r.position();
    TensorFile file;
    for (auto& e : entries) {
        if (e.offset + e.length > r.size() - payload)
            throw FormatError("block '" + e.block.name + "': payload extends past end of file");
        r.seek(payload + e.offset);
        e.block.bytes.resize(e.length);
        r.bytes(e.block.bytes.data(), e.length);
        file.blocks.push_back(std::move(e.block));
    }
    return file;
}

void write_tensor_file(const TensorFile& file, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    write_tensor_file(file, out);
}

TensorFile read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return read_tensor_file(in);
}

}  // namespace xbemu
