#include "t2g/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw ShapeError("Matrix: negative dimensions");
}

Matrix Matrix::from_rows(int r, int c, std::initializer_list<double> values) {
    Matrix m(r, c);
    if (values.size() != m.data.size()) throw ShapeError("Matrix::from_rows: value count mismatch");
    std::copy(values.begin(), values.end(), m.data.begin());
    return m;
}

bool Matrix::is_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Grid2D::Grid2D(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 0 || w < 0 || c < 0) throw ShapeError("Grid2D: negative dimensions");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows) + ")");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("add: shape mismatch");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

Matrix softmax_rows(const Matrix& m, double scale) {
    if (!(scale > 0.0)) throw DomainError("softmax_rows: scale must be positive");
    if (!m.is_finite()) throw DomainError("softmax_rows: non-finite input");
    Matrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m.cols; ++j) row_max = std::max(row_max, m.at(i, j) / scale);
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            double e = std::exp(m.at(i, j) / scale - row_max);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < m.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

std::vector<double> softmax(std::span<const double> v) {
    Matrix m(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), m.data.begin());
    return softmax_rows(m, 1.0).data;
}

std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
    if (v.empty()) throw ShapeError("layer_norm: empty vector");
    if (gain.size() != v.size() || bias.size() != v.size())
        throw ShapeError("layer_norm: gain/bias size mismatch");
    if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be positive");
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv * gain[i] + bias[i];
    return out;
}

Grid2D layer_norm_channels(const Grid2D& g, std::span<const double> gain,
                           std::span<const double> bias, double eps) {
    if (static_cast<int>(gain.size()) != g.channels || static_cast<int>(bias.size()) != g.channels)
        throw ShapeError("layer_norm_channels: gain/bias size mismatch");
    Grid2D out(g.height, g.width, g.channels);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            auto normed = layer_norm(g.pixel(y, x), gain, bias, eps);
            std::copy(normed.begin(), normed.end(), out.pixel(y, x).begin());
        }
    }
    return out;
}

Grid2D bilinear_resize(const Grid2D& g, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target dims must be >= 1");
    if (g.height < 1 || g.width < 1) throw ShapeError("bilinear_resize: empty source grid");
    Grid2D out(out_h, out_w, g.channels);
    const double sy = static_cast<double>(g.height) / out_h;
    const double sx = static_cast<double>(g.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double src_y = (y + 0.5) * sy - 0.5;
        src_y = std::clamp(src_y, 0.0, static_cast<double>(g.height - 1));
        const int y0 = static_cast<int>(std::floor(src_y));
        const int y1 = std::min(y0 + 1, g.height - 1);
        const double fy = src_y - y0;
        for (int x = 0; x < out_w; ++x) {
            double src_x = (x + 0.5) * sx - 0.5;
            src_x = std::clamp(src_x, 0.0, static_cast<double>(g.width - 1));
            const int x0 = static_cast<int>(std::floor(src_x));
            const int x1 = std::min(x0 + 1, g.width - 1);
            const double fx = src_x - x0;
            for (int c = 0; c < g.channels; ++c) {
                const double top = g.at(y0, x0, c) * (1.0 - fx) + g.at(y0, x1, c) * fx;
                const double bot = g.at(y1, x0, c) * (1.0 - fx) + g.at(y1, x1, c) * fx;
                out.at(y, x, c) = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    return out;
}

Matrix grid_to_tokens(const Grid2D& g) {
    Matrix m(g.height * g.width, g.channels);
    m.data = g.data;
    return m;
}

Grid2D tokens_to_grid(const Matrix& tokens, int height, int width) {
    if (tokens.rows != height * width)
        throw ShapeError("tokens_to_grid: token count " + std::to_string(tokens.rows) +
                         " does not match " + std::to_string(height) + "x" + std::to_string(width));
    Grid2D g(height, width, tokens.cols);
    g.data = tokens.data;
    return g;
}

} // namespace t2g
