#pragma once

#include <vector>

#include "t2g/features.hpp"
#include "t2g/numerics.hpp"

namespace t2g {

/// The learnable query bank: count rows of dimension dim, shared across all
/// frames of a clip.
struct QuerySet {
    int count = 0;
    int dim = 0;
    Matrix values; // count x dim

    QuerySet() = default;
    QuerySet(int q, int d) : count(q), dim(d), values(q, d) {}
};

/// Per-scale aggregation parameters. w_q maps queries (dim d) and w_k/w_v/phi
/// map tokens (dim C) into the shared dimension d. The branch-fusion gate is
/// stored as a free logit so beta() always lands in (0,1).
struct LayerParams {
    Matrix w_q; // d x d
    Matrix w_k; // C x d
    Matrix w_v; // C x d
    Matrix phi; // C x d
    std::vector<double> norm_gain; // d
    std::vector<double> norm_bias; // d
    double gate_logit = 0.0;
    double alpha_txt = 0.0;

    double beta() const;
};

/// Row-stochastic query-to-token attention weights; validated on
/// construction (rows nonnegative, each summing to 1 within kRowSumTol).
struct AttentionMap {
    Matrix weights; // count x token_count

    AttentionMap() = default;
    explicit AttentionMap(Matrix w);
};

struct AttendResult {
    AttentionMap attention;
    Matrix summaries; // count x d
};

/// Adds the scaled text context vector to every query row.
QuerySet bias_queries(const QuerySet& s, const TextPrior& prior, double alpha_txt);

/// Cross-attention of biased queries over one token grid:
/// A = softmax_rows((S W_q)(X W_k)^T, sqrt(d)), summaries = A (X W_v).
AttendResult attend(const QuerySet& biased, const TokenGrid& tokens, const LayerParams& p);

/// Projects query summaries back onto the pixel grid with the same attention
/// weights: Z = unflatten(A^T summaries), token index y*width + x.
Grid2D modulate_pixels(const AttentionMap& a, const Matrix& summaries, int height, int width);

/// Convex blend of the two branch modulations: beta*z_rgb + (1-beta)*z_dep.
Grid2D fuse_branches(const Grid2D& z_rgb, const Grid2D& z_dep, double beta);

/// Combines projected backbone features with the modulation and layer-norms
/// per pixel: U = LN(phi(F) + Z).
Grid2D condition_features(const TokenGrid& rgb_tokens, const Grid2D& z, const LayerParams& p);

} // namespace t2g
