#include "t2g/model.hpp"

#include <cmath>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

void ModelConfig::validate() const {
    scales.validate();
    if (query_count < 1 || dim < 1 || block_count < 1 || heads < 1 || ffn_dim < 1 ||
        max_clip_len < 1 || class_count < 1)
        throw ShapeError("ModelConfig: counts and dims must be positive");
    if (dim % heads != 0) throw ShapeError("ModelConfig: heads must divide dim");
    if ((frame_height == 0) != (frame_width == 0))
        throw ShapeError("ModelConfig: frame_height and frame_width must be set together");
}

namespace {

Matrix init_matrix(std::uint64_t seed, const std::string& name, int rows, int cols) {
    Matrix m(rows, cols);
    const double limit = 1.0 / std::sqrt(static_cast<double>(rows));
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = param_value(seed, name, i, limit);
    return m;
}

} // namespace

ModelParams init_model(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.queries.count = cfg.query_count;
    p.queries.dim = cfg.dim;
    p.queries.values = Matrix(cfg.query_count, cfg.dim);
    const double query_limit = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (std::size_t i = 0; i < p.queries.values.data.size(); ++i)
        p.queries.values.data[i] = param_value(cfg.seed, "queries", i, query_limit);

    p.prior = synth_text_prior(cfg.seed, cfg.class_count, cfg.dim);

    for (std::size_t l = 0; l < cfg.scales.levels.size(); ++l) {
        const ScaleLevel& level = cfg.scales.levels[l];
        const std::string base = "scale" + std::to_string(level.scale_id) + ".";
        LayerParams layer;
        layer.w_q = init_matrix(cfg.seed, base + "w_q", cfg.dim, cfg.dim);
        layer.w_k = init_matrix(cfg.seed, base + "w_k", level.channels, cfg.dim);
        layer.w_v = init_matrix(cfg.seed, base + "w_v", level.channels, cfg.dim);
        layer.phi = init_matrix(cfg.seed, base + "phi", level.channels, cfg.dim);
        layer.norm_gain.assign(cfg.dim, 1.0);
        layer.norm_bias.assign(cfg.dim, 0.0);
        layer.gate_logit = 0.0;
        layer.alpha_txt = cfg.alpha_txt;
        p.layers.push_back(std::move(layer));
    }

    p.embeddings.temporal = init_matrix(cfg.seed, "emb.temporal", cfg.max_clip_len, cfg.dim);
    p.embeddings.scale =
        init_matrix(cfg.seed, "emb.scale", static_cast<int>(cfg.scales.levels.size()), cfg.dim);

    p.decoder.heads = cfg.heads;
    for (int k = 0; k < cfg.block_count; ++k) {
        const std::string base = "dec" + std::to_string(k) + ".";
        BlockParams block;
        block.w_q = init_matrix(cfg.seed, base + "w_q", cfg.dim, cfg.dim);
        block.w_k = init_matrix(cfg.seed, base + "w_k", cfg.dim, cfg.dim);
        block.w_v = init_matrix(cfg.seed, base + "w_v", cfg.dim, cfg.dim);
        block.w_o = init_matrix(cfg.seed, base + "w_o", cfg.dim, cfg.dim);
        block.attn_gain.assign(cfg.dim, 1.0);
        block.attn_bias.assign(cfg.dim, 0.0);
        block.w1 = init_matrix(cfg.seed, base + "w1", cfg.dim, cfg.ffn_dim);
        block.b1.assign(cfg.ffn_dim, 0.0);
        block.w2 = init_matrix(cfg.seed, base + "w2", cfg.ffn_dim, cfg.dim);
        block.b2.assign(cfg.dim, 0.0);
        block.ffn_gain.assign(cfg.dim, 1.0);
        block.ffn_bias.assign(cfg.dim, 0.0);
        p.decoder.blocks.push_back(std::move(block));
    }

    for (std::size_t l = 0; l < cfg.scales.levels.size(); ++l)
        p.fuse.proj.push_back(init_matrix(
            cfg.seed, "fuse.proj" + std::to_string(cfg.scales.levels[l].scale_id), cfg.dim,
            cfg.dim));
    p.fuse.norm_gain.assign(cfg.dim, 1.0);
    p.fuse.norm_bias.assign(cfg.dim, 0.0);

    p.head.class_proj = init_matrix(cfg.seed, "head.class_proj", cfg.class_count, cfg.dim);
    p.head.mask_scale.assign(cfg.query_count, 1.0);
    return p;
}

ClipForward run_clip_features(const std::vector<FrameTokens>& frames, const ModelParams& params,
                              const ModelConfig& cfg, DecodeTrace* trace) {
    cfg.validate();
    if (frames.empty()) throw ShapeError("run_clip_features: empty clip");
    if (static_cast<int>(frames.size()) > cfg.max_clip_len)
        throw ShapeError("run_clip_features: clip longer than max_clip_len");
    const std::size_t scale_count = cfg.scales.levels.size();
    if (params.layers.size() != scale_count)
        throw ShapeError("run_clip_features: layer params do not cover the scale spec");

    const QuerySet biased = bias_queries(params.queries, params.prior, cfg.alpha_txt);

    std::vector<std::vector<Grid2D>> conditioned(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].rgb.size() != scale_count || frames[t].depth.size() != scale_count)
            throw ShapeError("run_clip_features: frame " + std::to_string(t) +
                             " does not cover every scale");
        for (std::size_t l = 0; l < scale_count; ++l) {
            const TokenGrid& rgb = frames[t].rgb[l];
            const TokenGrid& dep = frames[t].depth[l];
            if (rgb.height != dep.height || rgb.width != dep.width ||
                rgb.channels != dep.channels)
                throw ShapeError("run_clip_features: rgb/depth grids disagree at frame " +
                                 std::to_string(t) + " scale " + std::to_string(l));
            const LayerParams& layer = params.layers[l];
            const AttendResult rgb_attn = attend(biased, rgb, layer);
            const AttendResult dep_attn = attend(biased, dep, layer);
            const Grid2D z_rgb =
                modulate_pixels(rgb_attn.attention, rgb_attn.summaries, rgb.height, rgb.width);
            const Grid2D z_dep =
                modulate_pixels(dep_attn.attention, dep_attn.summaries, dep.height, dep.width);
            const Grid2D z = fuse_branches(z_rgb, z_dep, layer.beta());
            conditioned[t].push_back(condition_features(rgb, z, layer));
        }
    }

    const MemoryTokens memory = build_memory(conditioned, params.embeddings);
    ClipForward out;
    out.decoded = decode_queries(params.queries, memory, params.decoder, trace);
    out.pixel_features.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t)
        out.pixel_features.push_back(fuse_scales(conditioned[t], params.fuse));
    return out;
}

LogitsVolume run_clip(const std::vector<FrameTokens>& frames, const ModelParams& params,
                      const ModelConfig& cfg, DecodeTrace* trace) {
    const ClipForward forward = run_clip_features(frames, params, cfg, trace);
    const int t_len = static_cast<int>(frames.size());
    const int out_h = cfg.frame_height > 0 ? cfg.frame_height : forward.pixel_features[0].height;
    const int out_w = cfg.frame_width > 0 ? cfg.frame_width : forward.pixel_features[0].width;

    LogitsVolume volume(1, t_len, cfg.class_count, out_h, out_w);
    for (int t = 0; t < t_len; ++t) {
        Grid2D logits = predict_logits(forward.pixel_features[t], forward.decoded, params.head);
        if (logits.height != out_h || logits.width != out_w)
            logits = bilinear_resize(logits, out_h, out_w);
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x)
                for (int k = 0; k < cfg.class_count; ++k)
                    volume.at(0, t, k, y, x) = logits.at(y, x, k);
    }
    if (!volume.is_finite()) throw DomainError("run_clip: non-finite logits");
    return volume;
}

} // namespace t2g
