#include "t2g/queries.hpp"

#include <cmath>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

double LayerParams::beta() const { return 1.0 / (1.0 + std::exp(-gate_logit)); }

AttentionMap::AttentionMap(Matrix w) : weights(std::move(w)) {
    for (int i = 0; i < weights.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < weights.cols; ++j) {
            const double v = weights.at(i, j);
            if (v < 0.0) throw DomainError("AttentionMap: negative weight in row " + std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw DomainError("AttentionMap: row " + std::to_string(i) + " sums to " +
                              std::to_string(sum));
    }
}

QuerySet bias_queries(const QuerySet& s, const TextPrior& prior, double alpha_txt) {
    if (static_cast<int>(prior.context_vector.size()) != s.dim)
        throw ShapeError("bias_queries: context vector dim " +
                         std::to_string(prior.context_vector.size()) + " != query dim " +
                         std::to_string(s.dim));
    QuerySet out = s;
    for (int q = 0; q < s.count; ++q)
        for (int c = 0; c < s.dim; ++c)
            out.values.at(q, c) += alpha_txt * prior.context_vector[c];
    return out;
}

AttendResult attend(const QuerySet& biased, const TokenGrid& tokens, const LayerParams& p) {
    if (p.w_q.rows != biased.dim)
        throw ShapeError("attend: w_q expects query dim " + std::to_string(p.w_q.rows));
    if (p.w_k.rows != tokens.channels || p.w_v.rows != tokens.channels)
        throw ShapeError("attend: w_k/w_v expect token dim " + std::to_string(tokens.channels));
    const Matrix q = matmul(biased.values, p.w_q);
    const Matrix k = matmul(tokens.tokens, p.w_k);
    const Matrix v = matmul(tokens.tokens, p.w_v);
    AttendResult result;
    result.attention = AttentionMap(softmax_rows(matmul(q, transpose(k)),
                                                 std::sqrt(static_cast<double>(p.w_q.cols))));
    result.summaries = matmul(result.attention.weights, v);
    return result;
}

Grid2D modulate_pixels(const AttentionMap& a, const Matrix& summaries, int height, int width) {
    if (a.weights.cols != height * width)
        throw ShapeError("modulate_pixels: " + std::to_string(a.weights.cols) +
                         " attention columns for a " + std::to_string(height) + "x" +
                         std::to_string(width) + " grid");
    if (a.weights.rows != summaries.rows)
        throw ShapeError("modulate_pixels: attention/summaries row mismatch");
    return tokens_to_grid(matmul(transpose(a.weights), summaries), height, width);
}

Grid2D fuse_branches(const Grid2D& z_rgb, const Grid2D& z_dep, double beta) {
    if (z_rgb.height != z_dep.height || z_rgb.width != z_dep.width ||
        z_rgb.channels != z_dep.channels)
        throw ShapeError("fuse_branches: branch shapes disagree");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("fuse_branches: beta must lie in (0,1)");
    Grid2D out(z_rgb.height, z_rgb.width, z_rgb.channels);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = beta * z_rgb.data[i] + (1.0 - beta) * z_dep.data[i];
    return out;
}

Grid2D condition_features(const TokenGrid& rgb_tokens, const Grid2D& z, const LayerParams& p) {
    if (p.phi.rows != rgb_tokens.channels)
        throw ShapeError("condition_features: phi expects token dim " + std::to_string(p.phi.rows));
    if (z.height != rgb_tokens.height || z.width != rgb_tokens.width || z.channels != p.phi.cols)
        throw ShapeError("condition_features: modulation shape disagrees with projected features");
    const Grid2D projected =
        tokens_to_grid(matmul(rgb_tokens.tokens, p.phi), rgb_tokens.height, rgb_tokens.width);
    Grid2D summed(projected.height, projected.width, projected.channels);
    for (std::size_t i = 0; i < summed.data.size(); ++i)
        summed.data[i] = projected.data[i] + z.data[i];
    return layer_norm_channels(summed, p.norm_gain, p.norm_bias);
}

} // namespace t2g
