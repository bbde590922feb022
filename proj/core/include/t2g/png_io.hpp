#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace t2g {

/// 8-bit single-channel raster, row-major. Used for label maps on disk
/// (pixel value = class id, 255 = ignore).
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Writes img as an 8-bit grayscale PNG. Throws IoError on failure.
void save_gray_png(const std::filesystem::path& path, const GrayImage& img);

/// Reads an 8-bit grayscale PNG (palette/color/16-bit inputs are rejected
/// with IoError(BadHeader) so label ids cannot be silently resampled).
GrayImage load_gray_png(const std::filesystem::path& path);

} // namespace t2g
