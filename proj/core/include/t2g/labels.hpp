#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace t2g {

/// Label id marking invalid or unlabeled pixels; matches the 8-bit label-map
/// file convention. Excluded from losses and metrics.
inline constexpr std::uint8_t kIgnoreId = 255;

/// Size of the shared cross-dataset class space.
inline constexpr int kOverlapClassCount = 15;

/// Per-pixel class ids for a whole video, t-major row-major.
/// Valid values are [0, K) plus kIgnoreId.
struct LabelVideo {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;

    LabelVideo() = default;
    LabelVideo(int t, int h, int w, std::uint8_t fill = kIgnoreId);

    std::uint8_t at(int t, int y, int x) const {
        return labels[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
    std::uint8_t& at(int t, int y, int x) {
        return labels[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
};

/// Source-id to overlap-id lookup. Source ids not present in the table map to
/// kIgnoreId; overlap ids are always < kOverlapClassCount.
struct MappingTable {
    std::string dataset;
    std::vector<std::uint8_t> lut; // 256 entries, index = source id
    std::vector<std::string> notes; // merge provenance, informational

    MappingTable();
    void set(std::uint8_t source_id, std::uint8_t overlap_id);
    std::uint8_t map(std::uint8_t source_id) const { return lut[source_id]; }
};

/// Built-in alignment tables for cityscapes, apolloscape, and camvid into the
/// 15-class overlap space, including the merge rules (cityscapes truck+bus,
/// apolloscape truck+bus, camvid tree+vegetation-misc).
MappingTable builtin_mapping(const std::string& dataset);

/// Identity table over the overlap space itself.
MappingTable identity_mapping();

/// Loads a table from JSON: {"dataset": name, "entries": [{"source_id": i,
/// "overlap_id": j}, ...]}. Unlisted source ids map to ignore.
MappingTable load_mapping(const std::filesystem::path& path);

/// Elementwise lookup over a whole video. With strict=false (default) unknown
/// source ids become kIgnoreId; with strict=true they raise DataError.
LabelVideo remap(const LabelVideo& labels, const MappingTable& table, bool strict = false);

} // namespace t2g
