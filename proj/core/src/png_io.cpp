#include "t2g/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void save_gray_png(const std::filesystem::path& path, const GrayImage& img) {
    if (img.height < 1 || img.width < 1 ||
        img.pixels.size() != static_cast<std::size_t>(img.height) * img.width)
        throw ShapeError("save_gray_png: inconsistent image dimensions");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError(IoError::Kind::OpenFailed, "save_gray_png: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError(IoError::Kind::WriteFailed, "save_gray_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(IoError::Kind::WriteFailed, "save_gray_png: write failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

GrayImage load_gray_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError(IoError::Kind::OpenFailed, "load_gray_png: cannot open " + path.string());

    png_byte sig[8] = {};
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError(IoError::Kind::BadMagic, "load_gray_png: not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(IoError::Kind::OpenFailed, "load_gray_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(IoError::Kind::Truncated, "load_gray_png: read failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(IoError::Kind::BadHeader,
                      "load_gray_png: expected 8-bit grayscale in " + path.string());
    }

    GrayImage img;
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y)
        png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

} // namespace t2g
