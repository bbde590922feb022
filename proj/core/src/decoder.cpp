#include "t2g/decoder.hpp"

#include <cmath>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Matrix col_slice(const Matrix& m, int begin, int count) {
    Matrix out(m.rows, count);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < count; ++j) out.at(i, j) = m.at(i, begin + j);
    return out;
}

Matrix layer_norm_rows(const Matrix& m, std::span<const double> gain,
                       std::span<const double> bias) {
    Matrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        auto normed = layer_norm(m.row(i), gain, bias);
        std::copy(normed.begin(), normed.end(), out.row(i).begin());
    }
    return out;
}

} // namespace

LogitsVolume::LogitsVolume(int b, int t, int k, int h, int w, double fill)
    : batch(b), frames(t), classes(k), height(h), width(w),
      data(static_cast<std::size_t>(b) * t * k * h * w, fill) {
    if (b < 1 || t < 1 || k < 1 || h < 1 || w < 1)
        throw ShapeError("LogitsVolume: all dimensions must be positive");
}

bool LogitsVolume::is_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

MemoryTokens build_memory(const std::vector<std::vector<Grid2D>>& grids,
                          const EmbeddingTables& emb) {
    if (grids.empty()) throw ShapeError("build_memory: no frames");
    const std::size_t scale_count = grids.front().size();
    if (scale_count == 0) throw ShapeError("build_memory: no scales");
    const int d = emb.temporal.cols;
    if (emb.scale.cols != d) throw ShapeError("build_memory: embedding dims disagree");
    if (static_cast<int>(grids.size()) > emb.temporal.rows)
        throw ShapeError("build_memory: clip longer than the temporal table (" +
                         std::to_string(grids.size()) + " > " + std::to_string(emb.temporal.rows) +
                         ")");
    if (static_cast<int>(scale_count) > emb.scale.rows)
        throw ShapeError("build_memory: more scales than the scale table");

    std::size_t total = 0;
    for (std::size_t t = 0; t < grids.size(); ++t) {
        if (grids[t].size() != scale_count)
            throw ShapeError("build_memory: frame " + std::to_string(t) +
                             " is missing scale grids");
        for (const Grid2D& g : grids[t]) {
            if (g.channels != d)
                throw ShapeError("build_memory: grid channels " + std::to_string(g.channels) +
                                 " != embedding dim " + std::to_string(d));
            total += static_cast<std::size_t>(g.height) * g.width;
        }
    }

    MemoryTokens memory;
    memory.tokens = Matrix(static_cast<int>(total), d);
    memory.tags.reserve(total);
    int row = 0;
    for (std::size_t t = 0; t < grids.size(); ++t) {
        for (std::size_t l = 0; l < scale_count; ++l) {
            const Grid2D& g = grids[t][l];
            const int n = g.height * g.width;
            for (int i = 0; i < n; ++i, ++row) {
                for (int c = 0; c < d; ++c)
                    memory.tokens.at(row, c) = g.data[static_cast<std::size_t>(i) * d + c] +
                                               emb.temporal.at(static_cast<int>(t), c) +
                                               emb.scale.at(static_cast<int>(l), c);
                memory.tags.push_back({static_cast<int>(t), static_cast<int>(l)});
            }
        }
    }
    return memory;
}

QuerySet decode_queries(const QuerySet& s, const MemoryTokens& m, const DecoderParams& p,
                        DecodeTrace* trace) {
    const int d = s.dim;
    if (p.blocks.empty()) throw ShapeError("decode_queries: no blocks");
    if (p.heads < 1 || d % p.heads != 0)
        throw ShapeError("decode_queries: heads must divide the query dim");
    if (m.tokens.cols != d) throw ShapeError("decode_queries: memory dim != query dim");
    const int dh = d / p.heads;

    if (trace) trace->attention.clear();
    Matrix state = s.values;
    for (const BlockParams& block : p.blocks) {
        if (block.w_q.rows != d || block.w_k.rows != d || block.w_v.rows != d ||
            block.w_o.rows != d)
            throw ShapeError("decode_queries: block projection dims disagree with query dim");
        const Matrix attn_in = layer_norm_rows(state, block.attn_gain, block.attn_bias);
        const Matrix q = matmul(attn_in, block.w_q);
        const Matrix k = matmul(m.tokens, block.w_k);
        const Matrix v = matmul(m.tokens, block.w_v);
        Matrix concat(s.count, d);
        std::vector<Matrix> head_maps;
        for (int h = 0; h < p.heads; ++h) {
            const Matrix qh = col_slice(q, h * dh, dh);
            const Matrix kh = col_slice(k, h * dh, dh);
            const Matrix vh = col_slice(v, h * dh, dh);
            const Matrix a = softmax_rows(matmul(qh, transpose(kh)),
                                          std::sqrt(static_cast<double>(dh)));
            const Matrix oh = matmul(a, vh);
            for (int i = 0; i < s.count; ++i)
                for (int j = 0; j < dh; ++j) concat.at(i, h * dh + j) = oh.at(i, j);
            if (trace) head_maps.push_back(a);
        }
        if (trace) trace->attention.push_back(std::move(head_maps));
        state = add(state, matmul(concat, block.w_o));

        const Matrix ffn_in = layer_norm_rows(state, block.ffn_gain, block.ffn_bias);
        Matrix hidden = matmul(ffn_in, block.w1);
        if (static_cast<int>(block.b1.size()) != hidden.cols)
            throw ShapeError("decode_queries: b1 size disagrees with w1");
        for (int i = 0; i < hidden.rows; ++i)
            for (int j = 0; j < hidden.cols; ++j) hidden.at(i, j) = gelu(hidden.at(i, j) + block.b1[j]);
        Matrix ffn_out = matmul(hidden, block.w2);
        if (static_cast<int>(block.b2.size()) != ffn_out.cols)
            throw ShapeError("decode_queries: b2 size disagrees with w2");
        for (int i = 0; i < ffn_out.rows; ++i)
            for (int j = 0; j < ffn_out.cols; ++j) ffn_out.at(i, j) += block.b2[j];
        state = add(state, ffn_out);
    }

    QuerySet out = s;
    out.values = std::move(state);
    return out;
}

Grid2D fuse_scales(const std::vector<Grid2D>& grids, const FuseParams& p) {
    if (grids.empty()) throw ShapeError("fuse_scales: empty scale list");
    if (p.proj.size() != grids.size())
        throw ShapeError("fuse_scales: projection count != scale count");

    std::size_t finest = 0;
    for (std::size_t l = 1; l < grids.size(); ++l)
        if (static_cast<long long>(grids[l].height) * grids[l].width >
            static_cast<long long>(grids[finest].height) * grids[finest].width)
            finest = l;
    const int out_h = grids[finest].height;
    const int out_w = grids[finest].width;
    const int d = grids[finest].channels;

    Grid2D sum(out_h, out_w, d);
    for (std::size_t l = 0; l < grids.size(); ++l) {
        if (grids[l].channels != d) throw ShapeError("fuse_scales: channel dims disagree");
        const Grid2D projected = tokens_to_grid(matmul(grid_to_tokens(grids[l]), p.proj[l]),
                                                grids[l].height, grids[l].width);
        const Grid2D resized = (grids[l].height == out_h && grids[l].width == out_w)
                                   ? projected
                                   : bilinear_resize(projected, out_h, out_w);
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += resized.data[i];
    }
    return layer_norm_channels(sum, p.norm_gain, p.norm_bias);
}

Grid2D predict_logits(const Grid2D& pixel_features, const QuerySet& decoded,
                      const HeadParams& head) {
    const int d = decoded.dim;
    if (pixel_features.channels != d)
        throw ShapeError("predict_logits: pixel channels != query dim");
    if (head.class_proj.cols != d)
        throw ShapeError("predict_logits: class projection dim != query dim");
    if (static_cast<int>(head.mask_scale.size()) != decoded.count)
        throw ShapeError("predict_logits: mask scale count != query count");
    const int k_classes = head.class_proj.rows;

    // c[q][k] = softmax over classes of class_proj * s_q.
    const Matrix class_logits = matmul(decoded.values, transpose(head.class_proj));
    const Matrix c = softmax_rows(class_logits, 1.0);

    Grid2D out(pixel_features.height, pixel_features.width, k_classes);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const auto pix = pixel_features.pixel(y, x);
            for (int q = 0; q < decoded.count; ++q) {
                double m = 0.0;
                for (int j = 0; j < d; ++j) m += decoded.values.at(q, j) * pix[j];
                m *= head.mask_scale[q];
                for (int k = 0; k < k_classes; ++k) out.at(y, x, k) += c.at(q, k) * m;
            }
        }
    }
    return out;
}

} // namespace t2g
