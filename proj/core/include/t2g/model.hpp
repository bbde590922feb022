#pragma once

#include <cstdint>
#include <vector>

#include "t2g/decoder.hpp"
#include "t2g/features.hpp"
#include "t2g/queries.hpp"

namespace t2g {

/// Shape and initialization settings for the forward model.
struct ModelConfig {
    std::uint64_t seed = 0;
    ScaleSpec scales;
    int query_count = 8;
    int dim = 32;
    int block_count = 2;
    int heads = 4;
    int ffn_dim = 128;
    int max_clip_len = 8;
    int class_count = 4;
    // Output resolution for logits; 0 keeps the finest token scale.
    int frame_height = 0;
    int frame_width = 0;
    double alpha_txt = 0.0;

    void validate() const;
};

/// Every learnable component of the forward pass, initialized once per run
/// from the seed and frozen during inference.
struct ModelParams {
    QuerySet queries;
    TextPrior prior;
    std::vector<LayerParams> layers; // one per scale, ScaleSpec order
    EmbeddingTables embeddings;
    DecoderParams decoder;
    FuseParams fuse;
    HeadParams head;
};

/// Deterministic init: matrices uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in))
/// keyed by seed and a per-tensor name, norm gains 1 / biases 0, gate logits
/// 0 (beta = 0.5), mask scales 1.
ModelParams init_model(const ModelConfig& cfg);

/// One frame's token pyramids; rgb and depth follow the ScaleSpec order and
/// must shape-match level by level.
struct FrameTokens {
    std::vector<TokenGrid> rgb;
    std::vector<TokenGrid> depth;
};

/// Intermediate clip outputs: the fused per-frame pixel features at the
/// finest scale and the decoded queries shared by every frame.
struct ClipForward {
    std::vector<Grid2D> pixel_features; // P_t, one per frame, d channels
    QuerySet decoded;                   // final temporally-aware queries
};

/// Aggregation + memory decode + per-frame fusion for one clip (batch of 1).
ClipForward run_clip_features(const std::vector<FrameTokens>& frames, const ModelParams& params,
                              const ModelConfig& cfg, DecodeTrace* trace = nullptr);

/// Full forward pass: run_clip_features, then the query-driven head per
/// frame, bilinearly upsampled to the configured frame resolution.
LogitsVolume run_clip(const std::vector<FrameTokens>& frames, const ModelParams& params,
                      const ModelConfig& cfg, DecodeTrace* trace = nullptr);

} // namespace t2g
