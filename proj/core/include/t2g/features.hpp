#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2g/numerics.hpp"

namespace t2g {

enum class Branch : std::uint8_t {
    Rgb = 1,
    Depth = 2,
};

/// One level of the multi-scale token pyramid for one frame and branch.
/// tokens is N x C with N = height*width and token index y*width + x.
struct TokenGrid {
    int frame_index = 0;
    int scale_id = 0;
    Branch branch = Branch::Rgb;
    int height = 0;
    int width = 0;
    int channels = 0;
    Matrix tokens;
};

/// One entry per pyramid level; ids must be unique and the list nonempty.
struct ScaleLevel {
    int scale_id = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
};

struct ScaleSpec {
    std::vector<ScaleLevel> levels;

    void validate() const; // throws ShapeError on empty list / duplicate ids / bad dims
};

/// Frozen text-derived side inputs: per-class embeddings and the pooled
/// context vector added to the queries.
struct TextPrior {
    Matrix class_embeddings; // K x d
    std::vector<double> context_vector; // d
};

/// Counter-based generator: a fixed 64-bit finalizer applied to a key chain,
/// so any coordinate's value is computable independently and reruns are
/// bit-identical. mix64 is the splitmix64 output function.
std::uint64_t mix64(std::uint64_t x);

/// Uniform double in [-1, 1) derived from the top 53 bits of mix64 output.
double unit_from_key(std::uint64_t key);

/// Synthesizes the token pyramid for one frame of one branch. Each value is
/// unit_from_key over the chain seed -> branch -> frame -> scale -> token ->
/// channel, folded with mix64 at every step. temporal_period > 1 linearly
/// interpolates between keyframes at multiples of the period so tokens drift
/// smoothly over time; period 1 leaves values independent per frame.
std::vector<TokenGrid> synth_tokens(std::uint64_t seed, int frame_index, Branch branch,
                                    const ScaleSpec& spec, int temporal_period = 1);

/// Deterministic synthetic text prior for K classes in dimension d.
TextPrior synth_text_prior(std::uint64_t seed, int class_count, int dim);

/// Uniform value in [-limit, limit) for named-parameter initialization; the
/// name is hashed (FNV-1a) into the key chain.
double param_value(std::uint64_t seed, const std::string& name, std::uint64_t index, double limit);

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B, computed in the input's native
/// range. Requires exactly 3 channels.
Grid2D grayscale(const Grid2D& rgb_frame);

} // namespace t2g
