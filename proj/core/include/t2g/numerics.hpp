#pragma once

#include <initializer_list>
#include <span>
#include <vector>

namespace t2g {

/// Default epsilon inside the layer-norm variance term.
inline constexpr double kLayerNormEps = 1e-5;

/// Tolerance for "rows of a stochastic matrix sum to one" checks.
inline constexpr double kRowSumTol = 1e-6;

/// Dense row-major matrix of doubles. All kernels in this header run in
/// 64-bit precision with a fixed accumulation order so repeated runs are
/// bit-identical.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0);
    static Matrix from_rows(int r, int c, std::initializer_list<double> values);

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<double> row(int r) {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    bool is_finite() const;
};

/// Spatial map of shape height x width x channels, stored row-major with the
/// channel index fastest: data[(y*W + x)*C + c]. Flattening a Grid2D therefore
/// yields tokens in y*W + x order, each token a contiguous C-vector.
struct Grid2D {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Grid2D() = default;
    Grid2D(int h, int w, int c, double fill = 0.0);

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::span<const double> pixel(int y, int x) const {
        return {data.data() + (static_cast<std::size_t>(y) * width + x) * channels,
                static_cast<std::size_t>(channels)};
    }
    std::span<double> pixel(int y, int x) {
        return {data.data() + (static_cast<std::size_t>(y) * width + x) * channels,
                static_cast<std::size_t>(channels)};
    }
};

/// a[m x k] * b[k x n]. Accumulates each output entry over the inner index in
/// ascending order; throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Elementwise sum; shapes must agree.
Matrix add(const Matrix& a, const Matrix& b);

/// Row-wise softmax of m/scale, computed with per-row max subtraction.
/// Requires finite input and scale > 0; every output row sums to 1.
Matrix softmax_rows(const Matrix& m, double scale);

/// Softmax of a single vector in place of the matrix form (scale 1).
std::vector<double> softmax(std::span<const double> v);

/// Normalizes v to zero mean / unit variance (population variance + eps) and
/// applies the elementwise affine gain/bias.
std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain,
                               std::span<const double> bias, double eps = kLayerNormEps);

/// layer_norm applied per pixel over the channel dimension.
Grid2D layer_norm_channels(const Grid2D& g, std::span<const double> gain,
                           std::span<const double> bias, double eps = kLayerNormEps);

/// Bilinear resampling to out_h x out_w, align_corners=false convention
/// (source coordinate = (dst + 0.5) * src/dst - 0.5, edge-clamped).
Grid2D bilinear_resize(const Grid2D& g, int out_h, int out_w);

/// View conversions between the token-matrix and spatial-map layouts.
/// grid_to_tokens(g) is N x C with token index y*W + x.
Matrix grid_to_tokens(const Grid2D& g);
Grid2D tokens_to_grid(const Matrix& tokens, int height, int width);

} // namespace t2g
