#include "t2g/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "t2g/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor serialization assumes a little-endian host");

namespace t2g {

namespace {

std::size_t dim_product(const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
}

std::size_t element_size(DType dtype) {
    switch (dtype) {
        case DType::U8: return 1;
        case DType::F32: return 4;
        case DType::F64: return 8;
    }
    throw DataError("element_size: invalid dtype code");
}

} // namespace

Tensor Tensor::make_u8(std::vector<std::uint32_t> dims) {
    Tensor t;
    t.dtype = DType::U8;
    t.u8.assign(dim_product(dims), 0);
    t.dims = std::move(dims);
    return t;
}

Tensor Tensor::make_f32(std::vector<std::uint32_t> dims) {
    Tensor t;
    t.dtype = DType::F32;
    t.f32.assign(dim_product(dims), 0.0f);
    t.dims = std::move(dims);
    return t;
}

Tensor Tensor::make_f64(std::vector<std::uint32_t> dims) {
    Tensor t;
    t.dtype = DType::F64;
    t.f64.assign(dim_product(dims), 0.0);
    t.dims = std::move(dims);
    return t;
}

std::size_t Tensor::element_count() const { return dim_product(dims); }

bool Tensor::shape_consistent() const {
    const std::size_t n = element_count();
    switch (dtype) {
        case DType::U8: return u8.size() == n && f32.empty() && f64.empty();
        case DType::F32: return f32.size() == n && u8.empty() && f64.empty();
        case DType::F64: return f64.size() == n && u8.empty() && f32.empty();
    }
    return false;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (t.dims.empty()) throw ShapeError("save_tensor: dims must be nonempty");
    if (!t.shape_consistent())
        throw ShapeError("save_tensor: payload size does not match dims for " + path.string());
    if (t.dims.size() > 255) throw ShapeError("save_tensor: rank exceeds 255");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "save_tensor: cannot open " + path.string());

    out.write(kTensorMagic, 4);
    const std::uint8_t header[4] = {kTensorVersion, static_cast<std::uint8_t>(t.dtype),
                                    static_cast<std::uint8_t>(t.dims.size()), 0};
    out.write(reinterpret_cast<const char*>(header), 4);
    out.write(reinterpret_cast<const char*>(t.dims.data()),
              static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint32_t)));
    switch (t.dtype) {
        case DType::U8:
            out.write(reinterpret_cast<const char*>(t.u8.data()),
                      static_cast<std::streamsize>(t.u8.size()));
            break;
        case DType::F32:
            out.write(reinterpret_cast<const char*>(t.f32.data()),
                      static_cast<std::streamsize>(t.f32.size() * sizeof(float)));
            break;
        case DType::F64:
            out.write(reinterpret_cast<const char*>(t.f64.data()),
                      static_cast<std::streamsize>(t.f64.size() * sizeof(double)));
            break;
    }
    if (!out) throw IoError(IoError::Kind::WriteFailed, "save_tensor: write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "load_tensor: cannot open " + path.string());

    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4)
        throw IoError(IoError::Kind::Truncated, "load_tensor: header cut short in " + path.string());
    if (std::memcmp(magic, kTensorMagic, 4) != 0)
        throw IoError(IoError::Kind::BadMagic, "load_tensor: bad magic in " + path.string());

    std::uint8_t header[4] = {};
    in.read(reinterpret_cast<char*>(header), 4);
    if (in.gcount() != 4)
        throw IoError(IoError::Kind::Truncated, "load_tensor: header cut short in " + path.string());
    if (header[0] != kTensorVersion)
        throw IoError(IoError::Kind::BadVersion, "load_tensor: unsupported version " +
                                                     std::to_string(header[0]) + " in " + path.string());
    if (header[1] > 2)
        throw IoError(IoError::Kind::BadDtype, "load_tensor: unknown dtype code " +
                                                   std::to_string(header[1]) + " in " + path.string());
    if (header[3] != 0)
        throw IoError(IoError::Kind::BadHeader, "load_tensor: nonzero pad byte in " + path.string());
    if (header[2] == 0)
        throw IoError(IoError::Kind::BadHeader, "load_tensor: zero rank in " + path.string());

    Tensor t;
    t.dtype = static_cast<DType>(header[1]);
    t.dims.resize(header[2]);
    in.read(reinterpret_cast<char*>(t.dims.data()),
            static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != t.dims.size() * sizeof(std::uint32_t))
        throw IoError(IoError::Kind::Truncated, "load_tensor: dims cut short in " + path.string());

    const std::size_t n = t.element_count();
    const std::size_t payload_bytes = n * element_size(t.dtype);
    switch (t.dtype) {
        case DType::U8: t.u8.resize(n); in.read(reinterpret_cast<char*>(t.u8.data()),
                                                static_cast<std::streamsize>(payload_bytes)); break;
        case DType::F32: t.f32.resize(n); in.read(reinterpret_cast<char*>(t.f32.data()),
                                                  static_cast<std::streamsize>(payload_bytes)); break;
        case DType::F64: t.f64.resize(n); in.read(reinterpret_cast<char*>(t.f64.data()),
                                                  static_cast<std::streamsize>(payload_bytes)); break;
    }
    if (static_cast<std::size_t>(in.gcount()) != payload_bytes)
        throw IoError(IoError::Kind::Truncated, "load_tensor: payload cut short in " + path.string());
    return t;
}

} // namespace t2g
