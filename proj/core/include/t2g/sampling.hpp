#pragma once

#include <cstdint>
#include <vector>

namespace t2g {

/// Counter-based RNG: draw i of a stream seeded with s is mix64(mix64(s)+i),
/// so streams are reproducible across platforms (no std::distribution use).
struct Rng {
    std::uint64_t state = 0;

    explicit Rng(std::uint64_t seed);
    std::uint64_t next();
    /// Unbiased uniform draw from [0, n); n must be positive.
    std::uint64_t uniform_below(std::uint64_t n);
};

/// Arithmetic-progression clip: indices are start, start+stride, ...,
/// start+(length-1)*stride, validated against the video length.
struct ClipSpec {
    int start = 0;
    int stride = 1;
    int length = 1;
    std::vector<int> indices;

    static ClipSpec make(int start, int stride, int length, int video_len);
};

/// Candidate training strides, kept sorted and deduplicated.
struct StrideSet {
    std::vector<int> values;

    static StrideSet make(std::vector<int> strides);
};

/// Draws one training clip: stride uniform over the feasible subset of the
/// stride set (those fitting the video), then start uniform over the valid
/// range for that stride. Throws DomainError naming the minimum video length
/// when no stride fits.
ClipSpec sample_clip(int video_len, int clip_len, const StrideSet& strides, Rng& rng);

/// Sequential non-overlapping stride-1 clips covering [0, video_len) in
/// order; the final clip may be shorter than clip_len.
std::vector<ClipSpec> partition_video(int video_len, int clip_len);

/// Temporal-embedding index for the frame at 1-based position t in the clip:
/// the relative position t-1, independent of stride and start.
int temporal_index(const ClipSpec& clip, int position);

} // namespace t2g
