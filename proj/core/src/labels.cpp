#include "t2g/labels.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "t2g/errors.hpp"

namespace t2g {

LabelVideo::LabelVideo(int t, int h, int w, std::uint8_t fill)
    : frames(t), height(h), width(w),
      labels(static_cast<std::size_t>(t) * h * w, fill) {
    if (t < 0 || h < 0 || w < 0) throw ShapeError("LabelVideo: negative dimensions");
}

MappingTable::MappingTable() : lut(256, kIgnoreId) {}

void MappingTable::set(std::uint8_t source_id, std::uint8_t overlap_id) {
    if (overlap_id != kIgnoreId && overlap_id >= kOverlapClassCount)
        throw DataError("MappingTable: overlap id " + std::to_string(overlap_id) +
                        " outside the " + std::to_string(kOverlapClassCount) + "-class space");
    lut[source_id] = overlap_id;
}

MappingTable builtin_mapping(const std::string& dataset) {
    MappingTable table;
    table.dataset = dataset;
    if (dataset == "cityscapes") {
        const std::uint8_t source[15] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 17};
        for (int overlap = 0; overlap < 15; ++overlap)
            table.set(source[overlap], static_cast<std::uint8_t>(overlap));
        table.set(15, 13); // bus merges into truck_bus
        table.notes = {"truck_bus merges truck (14) and bus (15)"};
    } else if (dataset == "apolloscape") {
        const std::uint8_t source[15] = {9, 10, 20, 17, 13, 15, 14, 16, 21, 0, 4, 5, 1, 6, 2};
        for (int overlap = 0; overlap < 15; ++overlap)
            table.set(source[overlap], static_cast<std::uint8_t>(overlap));
        table.set(7, 13); // bus merges into truck_bus
        table.notes = {"truck_bus merges truck (6) and bus (7)"};
    } else if (dataset == "camvid") {
        const std::uint8_t source[15] = {17, 19, 4, 30, 9, 8, 24, 20, 26, 21, 16, 2, 5, 27, 13};
        for (int overlap = 0; overlap < 15; ++overlap)
            table.set(source[overlap], static_cast<std::uint8_t>(overlap));
        table.set(29, 8); // vegetation-misc merges into vegetation
        table.notes = {"vegetation merges tree (26) and vegetation-misc (29)"};
    } else {
        throw DataError("builtin_mapping: unknown dataset '" + dataset + "'");
    }
    return table;
}

MappingTable identity_mapping() {
    MappingTable table;
    table.dataset = "identity";
    for (int k = 0; k < kOverlapClassCount; ++k)
        table.set(static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(k));
    return table;
}

MappingTable load_mapping(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "load_mapping: cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_mapping: invalid JSON in " + path.string() + ": " + e.what());
    }
    MappingTable table;
    table.dataset = doc.value("dataset", std::string("custom"));
    if (!doc.contains("entries") || !doc["entries"].is_array())
        throw DataError("load_mapping: missing 'entries' array in " + path.string());
    for (const auto& entry : doc["entries"]) {
        const int source = entry.at("source_id").get<int>();
        const int overlap = entry.at("overlap_id").get<int>();
        if (source < 0 || source > 255 || overlap < 0 || overlap > 255)
            throw DataError("load_mapping: id out of byte range in " + path.string());
        table.set(static_cast<std::uint8_t>(source), static_cast<std::uint8_t>(overlap));
    }
    return table;
}

LabelVideo remap(const LabelVideo& labels, const MappingTable& table, bool strict) {
    LabelVideo out(labels.frames, labels.height, labels.width);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const std::uint8_t src = labels.labels[i];
        if (src == kIgnoreId) {
            out.labels[i] = kIgnoreId;
            continue;
        }
        const std::uint8_t mapped = table.map(src);
        if (strict && mapped == kIgnoreId)
            throw DataError("remap: source id " + std::to_string(src) +
                            " has no mapping in table '" + table.dataset + "'");
        out.labels[i] = mapped;
    }
    return out;
}

} // namespace t2g
