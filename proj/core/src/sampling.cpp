#include "t2g/sampling.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "t2g/errors.hpp"
#include "t2g/features.hpp"

namespace t2g {

Rng::Rng(std::uint64_t seed) : state(mix64(seed)) {}

std::uint64_t Rng::next() { return mix64(state++); }

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::uniform_below: empty range");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
}

ClipSpec ClipSpec::make(int start, int stride, int length, int video_len) {
    if (start < 0 || stride < 1 || length < 1)
        throw DomainError("ClipSpec: start must be >= 0, stride and length >= 1");
    const long long last = start + static_cast<long long>(length - 1) * stride;
    if (last >= video_len)
        throw DomainError("ClipSpec: last index " + std::to_string(last) +
                          " exceeds video length " + std::to_string(video_len));
    ClipSpec clip;
    clip.start = start;
    clip.stride = stride;
    clip.length = length;
    clip.indices.reserve(length);
    for (int t = 0; t < length; ++t) clip.indices.push_back(start + t * stride);
    return clip;
}

StrideSet StrideSet::make(std::vector<int> strides) {
    if (strides.empty()) throw DomainError("StrideSet: empty");
    for (int r : strides)
        if (r < 1) throw DomainError("StrideSet: strides must be positive");
    std::sort(strides.begin(), strides.end());
    strides.erase(std::unique(strides.begin(), strides.end()), strides.end());
    StrideSet set;
    set.values = std::move(strides);
    return set;
}

ClipSpec sample_clip(int video_len, int clip_len, const StrideSet& strides, Rng& rng) {
    if (video_len < 1 || clip_len < 1)
        throw DomainError("sample_clip: video_len and clip_len must be >= 1");
    std::vector<int> feasible;
    for (int r : strides.values)
        if (1 + static_cast<long long>(clip_len - 1) * r <= video_len) feasible.push_back(r);
    if (feasible.empty()) {
        const int min_len = 1 + (clip_len - 1) * strides.values.front();
        throw DomainError("sample_clip: no feasible stride for video of length " +
                          std::to_string(video_len) + "; need at least " + std::to_string(min_len) +
                          " frames");
    }
    const int r = feasible[rng.uniform_below(feasible.size())];
    const int start_count = video_len - (clip_len - 1) * r;
    const int u = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(start_count)));
    return ClipSpec::make(u, r, clip_len, video_len);
}

std::vector<ClipSpec> partition_video(int video_len, int clip_len) {
    if (video_len < 1 || clip_len < 1)
        throw DomainError("partition_video: video_len and clip_len must be >= 1");
    std::vector<ClipSpec> clips;
    for (int start = 0; start < video_len; start += clip_len) {
        const int length = std::min(clip_len, video_len - start);
        clips.push_back(ClipSpec::make(start, 1, length, video_len));
    }
    return clips;
}

int temporal_index(const ClipSpec& clip, int position) {
    if (position < 1 || position > clip.length)
        throw DomainError("temporal_index: position " + std::to_string(position) +
                          " outside [1, " + std::to_string(clip.length) + "]");
    return position - 1;
}

} // namespace t2g
