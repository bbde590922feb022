#pragma once

#include <vector>

#include "t2g/numerics.hpp"
#include "t2g/queries.hpp"

namespace t2g {

/// Provenance of one memory token: clip-relative frame and scale position
/// (index into the ScaleSpec order, not the scale_id value).
struct MemoryTag {
    int frame = 0;
    int scale = 0;
};

/// Flattened spatio-temporal memory the queries attend to. Token i of frame t
/// and scale l already includes its temporal and scale embeddings, so
/// attention over the memory is order-free.
struct MemoryTokens {
    Matrix tokens; // N x d
    std::vector<MemoryTag> tags; // one per token
};

/// Learnable additive embeddings: row t of temporal for clip position t, row
/// l of scale for ScaleSpec position l.
struct EmbeddingTables {
    Matrix temporal; // max clip length x d
    Matrix scale;    // scale count x d
};

/// One decoder block, pre-norm on both sublayers:
///   X  = S + MHA(LN_attn(S), M) W_o
///   S' = X + gelu(LN_ffn(X) W1 + b1) W2 + b2
/// gelu is the exact Gaussian unit 0.5 x (1 + erf(x / sqrt(2))).
struct BlockParams {
    Matrix w_q, w_k, w_v, w_o; // d x d
    std::vector<double> attn_gain, attn_bias; // d
    Matrix w1; // d x d_ff
    std::vector<double> b1; // d_ff
    Matrix w2; // d_ff x d
    std::vector<double> b2; // d
    std::vector<double> ffn_gain, ffn_bias; // d
};

struct DecoderParams {
    int heads = 1; // must divide d
    std::vector<BlockParams> blocks;
};

/// Per-scale projection, then resize-to-finest + sum + per-pixel layer norm.
struct FuseParams {
    std::vector<Matrix> proj; // one d x d matrix per scale
    std::vector<double> norm_gain, norm_bias; // d
};

/// Segmentation head: per-query class weights softmax(class_proj s_q) and a
/// per-query scalar on the mask logit <s_q, p(u)> (ones by default).
struct HeadParams {
    Matrix class_proj; // K x d
    std::vector<double> mask_scale; // Q
};

/// Per-block, per-head attention matrices captured during decode_queries,
/// for inspection and invariant checks.
struct DecodeTrace {
    std::vector<std::vector<Matrix>> attention; // [block][head], Q x N
};

/// Dense per-frame class logits for a batch of clips, laid out
/// [batch, frame, class, y, x] row-major.
struct LogitsVolume {
    int batch = 0;
    int frames = 0;
    int classes = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    LogitsVolume() = default;
    LogitsVolume(int b, int t, int k, int h, int w, double fill = 0.0);

    std::size_t index(int b, int t, int k, int y, int x) const {
        return ((((static_cast<std::size_t>(b) * frames + t) * classes + k) * height + y) * width) +
               x;
    }
    double at(int b, int t, int k, int y, int x) const { return data[index(b, t, k, y, x)]; }
    double& at(int b, int t, int k, int y, int x) { return data[index(b, t, k, y, x)]; }
    bool is_finite() const;
};

/// Concatenates the conditioned grids frame-major then scale-major then
/// row-major spatial, adding the temporal and scale embeddings. grids[t][l]
/// must form a full rectangle with channel dim equal to the embedding dim.
MemoryTokens build_memory(const std::vector<std::vector<Grid2D>>& grids,
                          const EmbeddingTables& emb);

/// Runs the stacked pre-norm blocks over the memory and returns the final
/// temporally-aware queries. Optionally records every attention matrix.
QuerySet decode_queries(const QuerySet& s, const MemoryTokens& m, const DecoderParams& p,
                        DecodeTrace* trace = nullptr);

/// Fuses one frame's per-scale grids into a single map at the finest scale
/// (the grid with the most tokens; ties keep the earliest).
Grid2D fuse_scales(const std::vector<Grid2D>& grids, const FuseParams& p);

/// Query-driven head for one frame: Y[k](u) = sum_q c_q[k] * m_q(u) with
/// m_q(u) = mask_scale[q] * <s_q, p(u)> and c_q = softmax(class_proj s_q).
/// Returns an H x W x K grid (class along the channel axis).
Grid2D predict_logits(const Grid2D& pixel_features, const QuerySet& decoded, const HeadParams& head);

} // namespace t2g
