#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace t2g {

enum class DType : std::uint8_t {
    U8 = 0,
    F32 = 1,
    F64 = 2,
};

/// Dense n-dimensional array with a row-major payload in exactly one of the
/// three element buffers, selected by dtype. Dims use u32 so the on-disk
/// header and the in-memory form agree exactly.
struct Tensor {
    DType dtype = DType::F32;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> u8;
    std::vector<float> f32;
    std::vector<double> f64;

    static Tensor make_u8(std::vector<std::uint32_t> dims);
    static Tensor make_f32(std::vector<std::uint32_t> dims);
    static Tensor make_f64(std::vector<std::uint32_t> dims);

    std::size_t element_count() const;
    /// Payload buffer size must match the dim product for the active dtype.
    bool shape_consistent() const;
};

/// Serialized layout, little-endian throughout:
///   bytes 0..3   magic "T2GT"
///   byte  4      format version, currently 1
///   byte  5      dtype code (0 = u8, 1 = f32, 2 = f64)
///   byte  6      rank (number of dims)
///   byte  7      zero padding
///   then rank * u32 dims, then the row-major payload.
inline constexpr char kTensorMagic[4] = {'T', '2', 'G', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;

/// Writes t to path. Throws IoError(WriteFailed/OpenFailed) on failure and
/// ShapeError if t.shape_consistent() is false.
void save_tensor(const std::filesystem::path& path, const Tensor& t);

/// Reads a tensor written by save_tensor. Throws IoError with a kind that
/// pinpoints the failure: OpenFailed, BadMagic, BadVersion, BadDtype,
/// BadHeader (nonzero pad byte), or Truncated.
Tensor load_tensor(const std::filesystem::path& path);

} // namespace t2g
