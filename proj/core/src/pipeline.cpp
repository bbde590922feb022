#include "t2g/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "t2g/errors.hpp"
#include "t2g/sampling.hpp"

namespace t2g {

using nlohmann::ordered_json;

namespace {

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

void reject_unknown(const ordered_json& obj, const std::set<std::string>& keys,
                    const std::string& context) {
    for (const auto& [key, value] : obj.items())
        if (!keys.count(key))
            throw DataError(context + ": unknown key '" + key + "'");
}

ordered_json parse_json_file(const std::filesystem::path& path, const std::string& context) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::OpenFailed, context + ": cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(context + ": invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open " + path.string());
    out << text;
    if (!out) throw IoError(IoError::Kind::WriteFailed, "write failed for " + path.string());
}

std::uint64_t video_seed(std::uint64_t seed, int video_index) {
    return mix64(mix64(seed) ^ static_cast<std::uint64_t>(video_index + 1));
}

double class_direction(std::uint64_t seed, int class_id, int channel) {
    return param_value(seed, "class_dir" + std::to_string(class_id),
                       static_cast<std::uint64_t>(channel), 1.0);
}

Tensor grid_to_f32_tensor(const Grid2D& g) {
    Tensor t = Tensor::make_f32({static_cast<std::uint32_t>(g.height),
                                 static_cast<std::uint32_t>(g.width),
                                 static_cast<std::uint32_t>(g.channels)});
    for (std::size_t i = 0; i < g.data.size(); ++i) t.f32[i] = static_cast<float>(g.data[i]);
    return t;
}

Grid2D grid_from_f32_tensor(const Tensor& t, const std::string& context) {
    if (t.dtype != DType::F32 || t.dims.size() != 3)
        throw DataError(context + ": expected a rank-3 f32 tensor");
    Grid2D g(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
             static_cast<int>(t.dims[2]));
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = t.f32[i];
    return g;
}

Tensor frame_to_u8_tensor(const std::vector<std::uint8_t>& values, int height, int width) {
    Tensor t = Tensor::make_u8({static_cast<std::uint32_t>(height),
                                static_cast<std::uint32_t>(width)});
    t.u8 = values;
    return t;
}

std::vector<std::uint8_t> frame_from_u8_tensor(const Tensor& t, int height, int width,
                                               const std::string& context) {
    if (t.dtype != DType::U8 || t.dims.size() != 2)
        throw DataError(context + ": expected a rank-2 u8 tensor");
    if (static_cast<int>(t.dims[0]) != height || static_cast<int>(t.dims[1]) != width)
        throw DataError(context + ": frame dims disagree with the manifest");
    return t.u8;
}

ordered_json scales_to_json(const ScaleSpec& spec) {
    ordered_json arr = ordered_json::array();
    for (const ScaleLevel& level : spec.levels)
        arr.push_back({{"scale_id", level.scale_id},
                       {"height", level.height},
                       {"width", level.width},
                       {"channels", level.channels}});
    return arr;
}

ScaleSpec scales_from_json(const ordered_json& arr, const std::string& context) {
    if (!arr.is_array() || arr.empty())
        throw DataError(context + ": 'scales' must be a nonempty array");
    ScaleSpec spec;
    for (const auto& item : arr) {
        reject_unknown(item, {"scale_id", "height", "width", "channels"}, context + " scales");
        ScaleLevel level;
        level.scale_id = item.at("scale_id").get<int>();
        level.height = item.at("height").get<int>();
        level.width = item.at("width").get<int>();
        level.channels = item.at("channels").get<int>();
        spec.levels.push_back(level);
    }
    spec.validate();
    return spec;
}

} // namespace

RunConfig::RunConfig() {
    scales.levels = {{0, 12, 16, 24}, {1, 6, 8, 32}};
}

void RunConfig::validate() const {
    scales.validate();
    if (query_count < 1 || dim < 1 || block_count < 1 || heads < 1 || ffn_dim < 1)
        throw DomainError("RunConfig: model dims must be positive");
    if (dim % heads != 0) throw DomainError("RunConfig: heads must divide dim");
    if (clip_len < 1) throw DomainError("RunConfig: clip_len must be >= 1");
    StrideSet::make(strides);
    mtc.validate();
    if (windows.empty()) throw DomainError("RunConfig: windows must be nonempty");
    for (int n : windows)
        if (n < 1) throw DomainError("RunConfig: window sizes must be positive");
    if (!(theta >= 0.0)) throw DomainError("RunConfig: theta must be >= 0");
    if (protocol != "dense" && protocol != "approx")
        throw DomainError("RunConfig: protocol must be 'dense' or 'approx'");
    if (videos < 1 || frames_per_video < 1 || frame_height < 1 || frame_width < 1)
        throw DomainError("RunConfig: dataset dims must be positive");
    if (class_count < 2 || class_count >= kIgnoreId)
        throw DomainError("RunConfig: class_count must lie in [2, 254]");
    if (!(stable_fraction >= 0.0 && stable_fraction <= 1.0))
        throw DomainError("RunConfig: stable_fraction must lie in [0,1]");
    if (labeled_every < 1) throw DomainError("RunConfig: labeled_every must be >= 1");
    if (temporal_period < 1) throw DomainError("RunConfig: temporal_period must be >= 1");
    if (train_steps < 1 || !(learning_rate > 0.0))
        throw DomainError("RunConfig: training settings must be positive");
}

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.seed = seed;
    mc.scales = scales;
    mc.query_count = query_count;
    mc.dim = dim;
    mc.block_count = block_count;
    mc.heads = heads;
    mc.ffn_dim = ffn_dim;
    mc.max_clip_len = clip_len;
    mc.class_count = class_count;
    mc.frame_height = frame_height;
    mc.frame_width = frame_width;
    mc.alpha_txt = alpha_txt;
    return mc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const ordered_json doc = parse_json_file(path, "load_run_config");
    static const std::set<std::string> keys = {
        "seed",          "scales",        "query_count",      "dim",
        "block_count",   "heads",         "ffn_dim",          "alpha_txt",
        "clip_len",      "strides",       "trim_ratio",       "decay",
        "lambda_mtc",    "mtc_scales",    "windows",          "theta",
        "protocol",      "strict_vc",     "videos",           "frames_per_video",
        "frame_height",  "frame_width",   "class_count",      "stable_fraction",
        "feature_label_gain", "gray_noise", "labeled_every",  "temporal_period",
        "train_steps",   "learning_rate"};
    reject_unknown(doc, keys, "load_run_config");

    RunConfig cfg;
    try {
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("scales")) cfg.scales = scales_from_json(doc["scales"], "load_run_config");
        if (doc.contains("query_count")) cfg.query_count = doc["query_count"].get<int>();
        if (doc.contains("dim")) cfg.dim = doc["dim"].get<int>();
        if (doc.contains("block_count")) cfg.block_count = doc["block_count"].get<int>();
        if (doc.contains("heads")) cfg.heads = doc["heads"].get<int>();
        if (doc.contains("ffn_dim")) cfg.ffn_dim = doc["ffn_dim"].get<int>();
        if (doc.contains("alpha_txt")) cfg.alpha_txt = doc["alpha_txt"].get<double>();
        if (doc.contains("clip_len")) cfg.clip_len = doc["clip_len"].get<int>();
        if (doc.contains("strides")) cfg.strides = doc["strides"].get<std::vector<int>>();
        if (doc.contains("trim_ratio")) cfg.mtc.trim_ratio = doc["trim_ratio"].get<double>();
        if (doc.contains("decay")) cfg.mtc.decay = doc["decay"].get<double>();
        if (doc.contains("lambda_mtc")) cfg.mtc.weight = doc["lambda_mtc"].get<double>();
        if (doc.contains("mtc_scales")) cfg.mtc.scale_count = doc["mtc_scales"].get<int>();
        if (doc.contains("windows")) cfg.windows = doc["windows"].get<std::vector<int>>();
        if (doc.contains("theta")) cfg.theta = doc["theta"].get<double>();
        if (doc.contains("protocol")) cfg.protocol = doc["protocol"].get<std::string>();
        if (doc.contains("strict_vc")) cfg.strict_vc = doc["strict_vc"].get<bool>();
        if (doc.contains("videos")) cfg.videos = doc["videos"].get<int>();
        if (doc.contains("frames_per_video"))
            cfg.frames_per_video = doc["frames_per_video"].get<int>();
        if (doc.contains("frame_height")) cfg.frame_height = doc["frame_height"].get<int>();
        if (doc.contains("frame_width")) cfg.frame_width = doc["frame_width"].get<int>();
        if (doc.contains("class_count")) cfg.class_count = doc["class_count"].get<int>();
        if (doc.contains("stable_fraction"))
            cfg.stable_fraction = doc["stable_fraction"].get<double>();
        if (doc.contains("feature_label_gain"))
            cfg.feature_label_gain = doc["feature_label_gain"].get<double>();
        if (doc.contains("gray_noise")) cfg.gray_noise = doc["gray_noise"].get<double>();
        if (doc.contains("labeled_every")) cfg.labeled_every = doc["labeled_every"].get<int>();
        if (doc.contains("temporal_period"))
            cfg.temporal_period = doc["temporal_period"].get<int>();
        if (doc.contains("train_steps")) cfg.train_steps = doc["train_steps"].get<int>();
        if (doc.contains("learning_rate")) cfg.learning_rate = doc["learning_rate"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_run_config: bad value in " + path.string() + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

LabelVideo synth_labels(std::uint64_t seed, int video_index, int frames, int height, int width,
                        int class_count, double stable_fraction) {
    if (frames < 1 || height < 1 || width < 1 || class_count < 1)
        throw ShapeError("synth_labels: dims and class count must be positive");
    if (!(stable_fraction >= 0.0 && stable_fraction <= 1.0))
        throw DomainError("synth_labels: stable_fraction must lie in [0,1]");
    const std::uint64_t vs = video_seed(seed, video_index);

    // Static class quilt over coarse cells.
    const int cell_h = std::max(1, height / 4);
    const int cell_w = std::max(1, width / 4);
    LabelVideo out(frames, height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::uint64_t key =
                mix64(vs ^ (static_cast<std::uint64_t>(y / cell_h) * 4096 + (x / cell_w)));
            const auto cls = static_cast<std::uint8_t>(key % class_count);
            for (int t = 0; t < frames; ++t) out.at(t, y, x) = cls;
        }

    // Moving rectangle whose class cycles every frame.
    const double area = 1.0 - stable_fraction;
    const int rect_h = static_cast<int>(std::lround(height * std::sqrt(area)));
    const int rect_w = static_cast<int>(std::lround(width * std::sqrt(area)));
    if (rect_h >= 1 && rect_w >= 1) {
        const int base_class = static_cast<int>(mix64(vs ^ 0x7265637460ULL) % class_count);
        for (int t = 0; t < frames; ++t) {
            const int y0 = (t * 1) % std::max(1, height - rect_h + 1);
            const int x0 = (t * 2) % std::max(1, width - rect_w + 1);
            const auto cls = static_cast<std::uint8_t>((base_class + t) % class_count);
            for (int y = y0; y < std::min(height, y0 + rect_h); ++y)
                for (int x = x0; x < std::min(width, x0 + rect_w); ++x) out.at(t, y, x) = cls;
        }
    }

    // Static ignore hole.
    const int hole_h = std::max(1, height / 6);
    const int hole_w = std::max(1, width / 6);
    const int hole_y = static_cast<int>(mix64(vs ^ 0x686F6C6579ULL) %
                                        static_cast<std::uint64_t>(std::max(1, height - hole_h)));
    const int hole_x = static_cast<int>(mix64(vs ^ 0x686F6C6578ULL) %
                                        static_cast<std::uint64_t>(std::max(1, width - hole_w)));
    for (int t = 0; t < frames; ++t)
        for (int y = hole_y; y < hole_y + hole_h; ++y)
            for (int x = hole_x; x < hole_x + hole_w; ++x) out.at(t, y, x) = kIgnoreId;
    return out;
}

std::vector<std::uint8_t> synth_gray(std::uint64_t seed, int video_index, int frame,
                                     const LabelVideo& labels, double noise) {
    if (frame < 0 || frame >= labels.frames) throw DomainError("synth_gray: frame out of range");
    if (!(noise >= 0.0)) throw DomainError("synth_gray: noise must be >= 0");
    const std::uint64_t vs = video_seed(seed, video_index);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(labels.height) * labels.width);
    std::size_t i = 0;
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x, ++i) {
            const std::uint8_t cls = labels.at(frame, y, x);
            const int base = cls == kIgnoreId ? 235 : 20 + (cls * 37) % 200;
            const std::uint64_t key =
                mix64(vs ^ (static_cast<std::uint64_t>(frame) * 0x10000000000ULL +
                            static_cast<std::uint64_t>(y) * 65536 + x + 0xBEEFULL));
            const int value =
                base + static_cast<int>(std::lround(noise * unit_from_key(key)));
            out[i] = static_cast<std::uint8_t>(std::clamp(value, 0, 255));
        }
    return out;
}

namespace {

int nearest_index(int coarse, int coarse_size, int fine_size) {
    const int idx = static_cast<int>((coarse + 0.5) * fine_size / coarse_size);
    return std::clamp(idx, 0, fine_size - 1);
}

/// Token pyramid for one frame/branch with the class signal mixed in.
std::vector<TokenGrid> synth_branch_tokens(const RunConfig& cfg, int video_index, int frame,
                                           Branch branch, const LabelVideo& labels) {
    const std::uint64_t vs = video_seed(cfg.seed, video_index);
    std::vector<TokenGrid> grids =
        synth_tokens(vs, frame, branch, cfg.scales, cfg.temporal_period);
    if (cfg.feature_label_gain == 0.0) return grids;
    for (TokenGrid& grid : grids) {
        for (int y = 0; y < grid.height; ++y) {
            const int src_y = nearest_index(y, grid.height, labels.height);
            for (int x = 0; x < grid.width; ++x) {
                const int src_x = nearest_index(x, grid.width, labels.width);
                const std::uint8_t cls = labels.at(frame, src_y, src_x);
                if (cls == kIgnoreId) continue;
                const int tok = y * grid.width + x;
                for (int c = 0; c < grid.channels; ++c)
                    grid.tokens.at(tok, c) +=
                        cfg.feature_label_gain * class_direction(cfg.seed, cls, c);
            }
        }
    }
    return grids;
}

} // namespace

Dataset generate_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    Dataset ds;
    ds.root = out_dir;
    ds.seed = cfg.seed;
    ds.class_count = cfg.class_count;
    ds.frame_height = cfg.frame_height;
    ds.frame_width = cfg.frame_width;
    ds.scales = cfg.scales;

    ordered_json manifest;
    manifest["format"] = "t2g-dataset";
    manifest["version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["class_count"] = cfg.class_count;
    manifest["ignore_id"] = kIgnoreId;
    manifest["frame_height"] = cfg.frame_height;
    manifest["frame_width"] = cfg.frame_width;
    manifest["scales"] = scales_to_json(cfg.scales);
    ordered_json videos = ordered_json::array();

    for (int v = 0; v < cfg.videos; ++v) {
        DatasetVideo video;
        video.name = "video_" + zero_pad(v, 3);
        video.frames = cfg.frames_per_video;
        for (int t = 0; t < cfg.frames_per_video; t += cfg.labeled_every)
            video.labeled_frames.push_back(t);
        std::filesystem::create_directories(out_dir / video.name);

        const LabelVideo labels = synth_labels(cfg.seed, v, cfg.frames_per_video,
                                               cfg.frame_height, cfg.frame_width,
                                               cfg.class_count, cfg.stable_fraction);
        ordered_json frames = ordered_json::array();
        for (int t = 0; t < cfg.frames_per_video; ++t) {
            const std::string stem = video.name + "/";
            const std::string label_file = stem + "labels_f" + zero_pad(t, 3) + ".t2g";
            const std::string gray_file = stem + "gray_f" + zero_pad(t, 3) + ".t2g";

            std::vector<std::uint8_t> label_frame(
                static_cast<std::size_t>(cfg.frame_height) * cfg.frame_width);
            for (int y = 0; y < cfg.frame_height; ++y)
                for (int x = 0; x < cfg.frame_width; ++x)
                    label_frame[static_cast<std::size_t>(y) * cfg.frame_width + x] =
                        labels.at(t, y, x);
            save_tensor(out_dir / label_file,
                        frame_to_u8_tensor(label_frame, cfg.frame_height, cfg.frame_width));
            save_tensor(out_dir / gray_file,
                        frame_to_u8_tensor(synth_gray(cfg.seed, v, t, labels, cfg.gray_noise),
                                           cfg.frame_height, cfg.frame_width));

            std::vector<std::string> rgb_names;
            std::vector<std::string> depth_names;
            for (Branch branch : {Branch::Rgb, Branch::Depth}) {
                const std::vector<TokenGrid> grids =
                    synth_branch_tokens(cfg, v, t, branch, labels);
                for (std::size_t l = 0; l < grids.size(); ++l) {
                    const std::string file = stem + "features_" +
                                             (branch == Branch::Rgb ? "rgb" : "dep") + "_f" +
                                             zero_pad(t, 3) + "_s" +
                                             std::to_string(cfg.scales.levels[l].scale_id) +
                                             ".t2g";
                    save_tensor(out_dir / file,
                                grid_to_f32_tensor(tokens_to_grid(grids[l].tokens,
                                                                  grids[l].height,
                                                                  grids[l].width)));
                    (branch == Branch::Rgb ? rgb_names : depth_names).push_back(file);
                }
            }

            video.label_files.push_back(label_file);
            video.gray_files.push_back(gray_file);
            video.rgb_files.push_back(rgb_names);
            video.depth_files.push_back(depth_names);
            frames.push_back({{"index", t},
                              {"label", label_file},
                              {"gray", gray_file},
                              {"rgb", rgb_names},
                              {"depth", depth_names}});
        }
        videos.push_back({{"name", video.name},
                          {"frames", video.frames},
                          {"labeled_frames", video.labeled_frames},
                          {"files", frames}});
        ds.videos.push_back(std::move(video));
    }
    manifest["videos"] = videos;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const ordered_json doc = parse_json_file(manifest_path, "load_dataset");
    if (doc.value("format", std::string()) != "t2g-dataset")
        throw DataError("load_dataset: " + manifest_path.string() + " is not a dataset manifest");
    Dataset ds;
    ds.root = manifest_path.parent_path();
    try {
        ds.seed = doc.at("seed").get<std::uint64_t>();
        ds.class_count = doc.at("class_count").get<int>();
        ds.frame_height = doc.at("frame_height").get<int>();
        ds.frame_width = doc.at("frame_width").get<int>();
        ds.scales = scales_from_json(doc.at("scales"), "load_dataset");
        for (const auto& vj : doc.at("videos")) {
            DatasetVideo video;
            video.name = vj.at("name").get<std::string>();
            video.frames = vj.at("frames").get<int>();
            video.labeled_frames = vj.at("labeled_frames").get<std::vector<int>>();
            for (const auto& fj : vj.at("files")) {
                video.label_files.push_back(fj.at("label").get<std::string>());
                video.gray_files.push_back(fj.at("gray").get<std::string>());
                video.rgb_files.push_back(fj.at("rgb").get<std::vector<std::string>>());
                video.depth_files.push_back(fj.at("depth").get<std::vector<std::string>>());
            }
            if (static_cast<int>(video.label_files.size()) != video.frames)
                throw DataError("load_dataset: video " + video.name +
                                " lists a file count different from its frame count");
            ds.videos.push_back(std::move(video));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_dataset: malformed manifest " + manifest_path.string() + ": " +
                        e.what());
    }
    return ds;
}

LabelVideo load_label_video(const Dataset& ds, const DatasetVideo& video) {
    LabelVideo out(video.frames, ds.frame_height, ds.frame_width);
    for (int t = 0; t < video.frames; ++t) {
        const std::vector<std::uint8_t> frame =
            frame_from_u8_tensor(load_tensor(ds.root / video.label_files[t]), ds.frame_height,
                                 ds.frame_width, "load_label_video");
        std::copy(frame.begin(), frame.end(),
                  out.labels.begin() +
                      static_cast<std::ptrdiff_t>(t) * ds.frame_height * ds.frame_width);
    }
    return out;
}

std::vector<Grid2D> load_gray_frames(const Dataset& ds, const DatasetVideo& video) {
    std::vector<Grid2D> out;
    out.reserve(video.frames);
    for (int t = 0; t < video.frames; ++t) {
        const std::vector<std::uint8_t> frame =
            frame_from_u8_tensor(load_tensor(ds.root / video.gray_files[t]), ds.frame_height,
                                 ds.frame_width, "load_gray_frames");
        Grid2D g(ds.frame_height, ds.frame_width, 1);
        for (std::size_t i = 0; i < frame.size(); ++i) g.data[i] = frame[i];
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<FrameTokens> load_frame_tokens(const Dataset& ds, const DatasetVideo& video) {
    std::vector<FrameTokens> out(video.frames);
    for (int t = 0; t < video.frames; ++t) {
        for (std::size_t l = 0; l < ds.scales.levels.size(); ++l) {
            const ScaleLevel& level = ds.scales.levels[l];
            for (Branch branch : {Branch::Rgb, Branch::Depth}) {
                const auto& files =
                    branch == Branch::Rgb ? video.rgb_files[t] : video.depth_files[t];
                if (files.size() != ds.scales.levels.size())
                    throw DataError("load_frame_tokens: video " + video.name +
                                    " does not list one feature file per scale");
                const Grid2D g =
                    grid_from_f32_tensor(load_tensor(ds.root / files[l]), "load_frame_tokens");
                if (g.height != level.height || g.width != level.width ||
                    g.channels != level.channels)
                    throw DataError("load_frame_tokens: " + files[l] +
                                    " disagrees with the manifest scale spec");
                TokenGrid grid;
                grid.frame_index = t;
                grid.scale_id = level.scale_id;
                grid.branch = branch;
                grid.height = g.height;
                grid.width = g.width;
                grid.channels = g.channels;
                grid.tokens = grid_to_tokens(g);
                (branch == Branch::Rgb ? out[t].rgb : out[t].depth).push_back(std::move(grid));
            }
        }
    }
    return out;
}

Tensor logits_to_tensor(const LogitsVolume& volume, int batch_index) {
    if (batch_index < 0 || batch_index >= volume.batch)
        throw ShapeError("logits_to_tensor: batch index out of range");
    Tensor t = Tensor::make_f32({static_cast<std::uint32_t>(volume.frames),
                                 static_cast<std::uint32_t>(volume.classes),
                                 static_cast<std::uint32_t>(volume.height),
                                 static_cast<std::uint32_t>(volume.width)});
    std::size_t i = 0;
    for (int f = 0; f < volume.frames; ++f)
        for (int k = 0; k < volume.classes; ++k)
            for (int y = 0; y < volume.height; ++y)
                for (int x = 0; x < volume.width; ++x, ++i)
                    t.f32[i] = static_cast<float>(volume.at(batch_index, f, k, y, x));
    return t;
}

LogitsVolume logits_from_tensor(const Tensor& t) {
    if (t.dtype == DType::U8) throw DataError("logits_from_tensor: expected a float tensor");
    std::vector<int> dims(t.dims.begin(), t.dims.end());
    int b = 1;
    if (dims.size() == 5) {
        b = dims[0];
        dims.erase(dims.begin());
    }
    if (dims.size() != 4)
        throw DataError("logits_from_tensor: expected rank 4 [T,K,H,W] or rank 5 [B,T,K,H,W]");
    LogitsVolume volume(b, dims[0], dims[1], dims[2], dims[3]);
    for (std::size_t i = 0; i < volume.data.size(); ++i)
        volume.data[i] = t.dtype == DType::F32 ? static_cast<double>(t.f32[i]) : t.f64[i];
    return volume;
}

LabelVideo label_video_from_tensor(const Tensor& t) {
    if (t.dtype != DType::U8 || t.dims.size() != 3)
        throw DataError("label_video_from_tensor: expected a rank-3 u8 tensor [T,H,W]");
    LabelVideo v(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                 static_cast<int>(t.dims[2]));
    v.labels = t.u8;
    return v;
}

Tensor label_video_to_tensor(const LabelVideo& v) {
    Tensor t = Tensor::make_u8({static_cast<std::uint32_t>(v.frames),
                                static_cast<std::uint32_t>(v.height),
                                static_cast<std::uint32_t>(v.width)});
    t.u8 = v.labels;
    return t;
}

PredictionSet infer_dataset(const RunConfig& cfg, const Dataset& ds,
                            const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    ModelConfig mc = cfg.model_config();
    mc.scales = ds.scales;
    mc.class_count = ds.class_count;
    mc.frame_height = ds.frame_height;
    mc.frame_width = ds.frame_width;
    const ModelParams params = init_model(mc);

    PredictionSet preds;
    preds.root = out_dir;
    preds.class_count = ds.class_count;

    ordered_json manifest;
    manifest["format"] = "t2g-predictions";
    manifest["version"] = 1;
    manifest["class_count"] = ds.class_count;
    manifest["clip_len"] = cfg.clip_len;
    ordered_json videos = ordered_json::array();

    for (const DatasetVideo& video : ds.videos) {
        std::filesystem::create_directories(out_dir / video.name);
        const std::vector<FrameTokens> tokens = load_frame_tokens(ds, video);
        const std::vector<ClipSpec> clips = partition_video(video.frames, cfg.clip_len);

        std::vector<std::string> pred_files;
        std::vector<std::string> logit_files;
        for (std::size_t c = 0; c < clips.size(); ++c) {
            const ClipSpec& clip = clips[c];
            std::vector<FrameTokens> clip_frames;
            for (int idx : clip.indices) clip_frames.push_back(tokens[idx]);
            const LogitsVolume volume = run_clip(clip_frames, params, mc);

            const std::string logit_file =
                video.name + "/logits_c" + zero_pad(static_cast<int>(c), 3) + ".t2g";
            save_tensor(out_dir / logit_file, logits_to_tensor(volume, 0));
            logit_files.push_back(logit_file);

            const LabelVideo argmax = argmax_labels(volume, 0);
            for (int i = 0; i < clip.length; ++i) {
                std::vector<std::uint8_t> frame(
                    static_cast<std::size_t>(volume.height) * volume.width);
                for (int y = 0; y < volume.height; ++y)
                    for (int x = 0; x < volume.width; ++x)
                        frame[static_cast<std::size_t>(y) * volume.width + x] = argmax.at(i, y, x);
                const std::string pred_file =
                    video.name + "/pred_f" + zero_pad(clip.indices[i], 3) + ".t2g";
                save_tensor(out_dir / pred_file,
                            frame_to_u8_tensor(frame, volume.height, volume.width));
                pred_files.push_back(pred_file);
            }
        }
        videos.push_back({{"name", video.name},
                          {"frames", video.frames},
                          {"pred_files", pred_files},
                          {"logit_files", logit_files}});
        preds.video_names.push_back(video.name);
        preds.pred_files.push_back(std::move(pred_files));
    }
    manifest["videos"] = videos;
    write_text_file(out_dir / "predictions.json", manifest.dump(2) + "\n");
    return preds;
}

PredictionSet load_predictions(const std::filesystem::path& manifest_path) {
    const ordered_json doc = parse_json_file(manifest_path, "load_predictions");
    if (doc.value("format", std::string()) != "t2g-predictions")
        throw DataError("load_predictions: " + manifest_path.string() +
                        " is not a predictions manifest");
    PredictionSet preds;
    preds.root = manifest_path.parent_path();
    try {
        preds.class_count = doc.at("class_count").get<int>();
        for (const auto& vj : doc.at("videos")) {
            preds.video_names.push_back(vj.at("name").get<std::string>());
            preds.pred_files.push_back(vj.at("pred_files").get<std::vector<std::string>>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_predictions: malformed manifest " + manifest_path.string() + ": " +
                        e.what());
    }
    return preds;
}

namespace {

LabelVideo load_pred_video(const PredictionSet& preds, std::size_t index, int frames, int height,
                           int width) {
    if (static_cast<int>(preds.pred_files[index].size()) != frames)
        throw DataError("evaluate: prediction frame count disagrees with the dataset for " +
                        preds.video_names[index]);
    LabelVideo out(frames, height, width);
    for (int t = 0; t < frames; ++t) {
        const std::vector<std::uint8_t> frame =
            frame_from_u8_tensor(load_tensor(preds.root / preds.pred_files[index][t]), height,
                                 width, "evaluate");
        std::copy(frame.begin(), frame.end(),
                  out.labels.begin() + static_cast<std::ptrdiff_t>(t) * height * width);
    }
    return out;
}

LabelVideo frames_subset(const LabelVideo& v, const std::vector<int>& frames) {
    LabelVideo out(static_cast<int>(frames.size()), v.height, v.width);
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (int y = 0; y < v.height; ++y)
            for (int x = 0; x < v.width; ++x)
                out.at(static_cast<int>(i), y, x) = v.at(frames[i], y, x);
    return out;
}

} // namespace

MetricReport evaluate(const RunConfig& cfg, const Dataset& ds, const PredictionSet& preds,
                      const MappingTable* mapping) {
    cfg.validate();
    if (preds.video_names.size() != ds.videos.size())
        throw DataError("evaluate: prediction/dataset video counts disagree");
    const bool approx = cfg.protocol == "approx";
    const int eval_classes = mapping ? kOverlapClassCount : ds.class_count;

    MetricReport report;
    report.protocol = cfg.protocol;
    report.windows = cfg.windows;
    report.per_video_vc.assign(cfg.windows.size(), {});

    ConfusionMatrix conf(eval_classes);
    for (std::size_t v = 0; v < ds.videos.size(); ++v) {
        const DatasetVideo& video = ds.videos[v];
        if (preds.video_names[v] != video.name)
            throw DataError("evaluate: prediction/dataset video order disagrees at " + video.name);
        LabelVideo gt = load_label_video(ds, video);
        LabelVideo pred = load_pred_video(preds, v, video.frames, ds.frame_height, ds.frame_width);
        if (mapping) {
            gt = remap(gt, *mapping);
            pred = remap(pred, *mapping);
        }

        if (approx) {
            const LabelVideo gt_ref = frames_subset(gt, video.labeled_frames);
            const LabelVideo pred_ref = frames_subset(pred, video.labeled_frames);
            accumulate_confusion(pred_ref, gt_ref, eval_classes, conf);
        } else {
            accumulate_confusion(pred, gt, eval_classes, conf);
        }

        VideoEval eval;
        eval.pred = std::move(pred);
        eval.gt = std::move(gt);
        if (approx) {
            eval.labeled_frames = video.labeled_frames;
            eval.gray = load_gray_frames(ds, video);
        }
        for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
            try {
                const double vc = approx
                                      ? vc_approx(eval, cfg.windows[w], cfg.theta, cfg.strict_vc)
                                      : vc_dense(eval, cfg.windows[w], cfg.strict_vc);
                report.per_video_vc[w].push_back(vc);
            } catch (const ProtocolError& e) {
                throw ProtocolError(video.name + ": " + e.what());
            }
        }
    }
    report.iou = miou(conf);
    report.evaluated_pixels = conf.total();
    for (std::size_t w = 0; w < cfg.windows.size(); ++w)
        report.mean_vc.push_back(mvc(report.per_video_vc[w]));
    return report;
}

std::string metric_report_json(const MetricReport& report) {
    ordered_json doc;
    doc["protocol"] = report.protocol;
    doc["miou"] = report.iou.miou;
    ordered_json per_class = ordered_json::array();
    for (std::size_t k = 0; k < report.iou.per_class.size(); ++k) {
        if (report.iou.present[k])
            per_class.push_back(report.iou.per_class[k]);
        else
            per_class.push_back(nullptr);
    }
    doc["per_class_iou"] = per_class;
    doc["evaluated_pixels"] = report.evaluated_pixels;
    ordered_json mvc_obj = ordered_json::object();
    ordered_json per_video = ordered_json::object();
    for (std::size_t w = 0; w < report.windows.size(); ++w) {
        mvc_obj[std::to_string(report.windows[w])] = report.mean_vc[w];
        per_video[std::to_string(report.windows[w])] = report.per_video_vc[w];
    }
    doc["mvc"] = mvc_obj;
    doc["per_video_vc"] = per_video;
    return doc.dump(2) + "\n";
}

std::string mtc_result_json(const MtcResult& result) {
    ordered_json doc;
    doc["loss"] = result.loss;
    doc["no_valid_scale"] = result.no_valid_scale;
    ordered_json scales = ordered_json::array();
    for (const MtcScaleStat& stat : result.scales) {
        ordered_json s;
        s["scale"] = stat.scale;
        s["stride"] = stat.stride;
        s["count"] = stat.count;
        s["valid"] = stat.valid;
        if (stat.valid)
            s["trimmed_mean"] = stat.trimmed;
        else
            s["trimmed_mean"] = nullptr;
        scales.push_back(s);
    }
    doc["scales"] = scales;
    return doc.dump(2) + "\n";
}

std::string fd_report_json(const FdReport& report, double threshold) {
    ordered_json doc;
    doc["coords_checked"] = report.coords_checked;
    doc["max_abs_dev"] = report.max_abs_dev;
    doc["max_rel_dev"] = report.max_rel_dev;
    doc["threshold"] = threshold;
    doc["pass"] = report.max_rel_dev < threshold;
    return doc.dump(2) + "\n";
}

ToyTrainResult toy_train(const RunConfig& cfg, const Dataset& ds, const ToyTrainOptions& opts) {
    cfg.validate();
    if (opts.steps < 1 || !(opts.learning_rate > 0.0))
        throw DomainError("toy_train: steps and learning rate must be positive");
    if (!(opts.lambda_mtc >= 0.0)) throw DomainError("toy_train: lambda must be >= 0");

    ModelConfig mc = cfg.model_config();
    mc.scales = ds.scales;
    mc.class_count = ds.class_count;
    mc.frame_height = 0; // head trains at the finest token scale
    mc.frame_width = 0;
    const ModelParams params = init_model(mc);

    std::size_t finest = 0;
    for (std::size_t l = 1; l < ds.scales.levels.size(); ++l)
        if (static_cast<long long>(ds.scales.levels[l].height) * ds.scales.levels[l].width >
            static_cast<long long>(ds.scales.levels[finest].height) *
                ds.scales.levels[finest].width)
            finest = l;
    const int fh = ds.scales.levels[finest].height;
    const int fw = ds.scales.levels[finest].width;
    if (ds.frame_height != fh || ds.frame_width != fw)
        throw DataError("toy_train: dataset frame resolution " +
                        std::to_string(ds.frame_height) + "x" + std::to_string(ds.frame_width) +
                        " must equal the finest token scale " + std::to_string(fh) + "x" +
                        std::to_string(fw));

    // Frozen upstream: precompute fused pixel features and label slices.
    struct ClipData {
        std::vector<Grid2D> features; // per frame
        LabelVideo labels;
    };
    std::vector<ClipData> clips;
    for (const DatasetVideo& video : ds.videos) {
        const std::vector<FrameTokens> tokens = load_frame_tokens(ds, video);
        const LabelVideo labels = load_label_video(ds, video);
        for (const ClipSpec& clip : partition_video(video.frames, cfg.clip_len)) {
            ClipData data;
            std::vector<FrameTokens> clip_frames;
            for (int idx : clip.indices) clip_frames.push_back(tokens[idx]);
            data.features = run_clip_features(clip_frames, params, mc).pixel_features;
            data.labels = frames_subset(labels, clip.indices);
            clips.push_back(std::move(data));
        }
    }

    std::size_t valid_pixels = 0;
    for (const ClipData& clip : clips)
        for (std::uint8_t l : clip.labels.labels)
            if (l != kIgnoreId) ++valid_pixels;
    if (valid_pixels == 0) throw DataError("toy_train: every pixel is ignored");

    const int k_classes = ds.class_count;
    const int d = cfg.dim;
    ToyTrainResult result;
    result.w = Matrix(k_classes, d); // zero init: uniform predictions at step 0
    result.bias.assign(k_classes, 0.0);

    MtcConfig mtc_cfg = cfg.mtc;
    const bool run_mtc = opts.lambda_mtc > 0.0 || opts.compute_zeroed_mtc;
    const double applied_lambda = opts.compute_zeroed_mtc ? 0.0 : opts.lambda_mtc;
    const double clip_norm = static_cast<double>(clips.size());

    std::vector<double> probs(k_classes);
    for (int step = 0; step <= opts.steps; ++step) {
        Matrix grad_w(k_classes, d);
        std::vector<double> grad_b(k_classes, 0.0);
        double ce_sum = 0.0;
        double mtc_sum = 0.0;

        for (const ClipData& clip : clips) {
            const int t_len = static_cast<int>(clip.features.size());
            LogitsVolume x(1, t_len, k_classes, fh, fw);
            for (int t = 0; t < t_len; ++t)
                for (int y = 0; y < fh; ++y)
                    for (int xx = 0; xx < fw; ++xx) {
                        const auto pix = clip.features[t].pixel(y, xx);
                        for (int k = 0; k < k_classes; ++k) {
                            double acc = result.bias[k];
                            for (int c = 0; c < d; ++c) acc += result.w.at(k, c) * pix[c];
                            x.at(0, t, k, y, xx) = acc;
                        }
                    }

            LogitsVolume grad_x(1, t_len, k_classes, fh, fw);
            for (int t = 0; t < t_len; ++t)
                for (int y = 0; y < fh; ++y)
                    for (int xx = 0; xx < fw; ++xx) {
                        const std::uint8_t label = clip.labels.at(t, y, xx);
                        if (label == kIgnoreId) continue;
                        for (int k = 0; k < k_classes; ++k) probs[k] = x.at(0, t, k, y, xx);
                        const std::vector<double> p = softmax(probs);
                        ce_sum -= std::log(std::max(p[label], 1e-300));
                        for (int k = 0; k < k_classes; ++k)
                            grad_x.at(0, t, k, y, xx) =
                                (p[k] - (k == label ? 1.0 : 0.0)) /
                                static_cast<double>(valid_pixels);
                    }

            if (run_mtc) {
                const MtcResult mtc_res = mtc_loss(x, clip.labels, mtc_cfg);
                const LogitsVolume mtc_g = mtc_grad(x, clip.labels, mtc_cfg);
                mtc_sum += applied_lambda * mtc_res.loss / clip_norm;
                for (std::size_t i = 0; i < grad_x.data.size(); ++i)
                    grad_x.data[i] += applied_lambda * mtc_g.data[i] / clip_norm;
            }

            for (int t = 0; t < t_len; ++t)
                for (int y = 0; y < fh; ++y)
                    for (int xx = 0; xx < fw; ++xx) {
                        const auto pix = clip.features[t].pixel(y, xx);
                        for (int k = 0; k < k_classes; ++k) {
                            const double g = grad_x.at(0, t, k, y, xx);
                            if (g == 0.0) continue;
                            for (int c = 0; c < d; ++c) grad_w.at(k, c) += g * pix[c];
                            grad_b[k] += g;
                        }
                    }
        }

        const double ce = ce_sum / static_cast<double>(valid_pixels);
        const double total = ce + mtc_sum;
        if (!std::isfinite(total))
            throw CheckError("toy_train: loss diverged at step " + std::to_string(step));
        result.ce_history.push_back(ce);
        result.mtc_history.push_back(mtc_sum);
        result.total_history.push_back(total);

        if (step == opts.steps) break; // final evaluation only
        for (std::size_t i = 0; i < result.w.data.size(); ++i)
            result.w.data[i] -= opts.learning_rate * grad_w.data[i];
        for (int k = 0; k < k_classes; ++k) result.bias[k] -= opts.learning_rate * grad_b[k];
        // The clamped cross entropy stays finite for finite weights, so blowup
        // shows first in the parameters; catch it before the next forward pass.
        for (double v : result.w.data)
            if (!std::isfinite(v))
                throw CheckError("toy_train: diverged at step " + std::to_string(step));
        for (double v : result.bias)
            if (!std::isfinite(v))
                throw CheckError("toy_train: diverged at step " + std::to_string(step));
    }
    result.initial_total = result.total_history.front();
    result.final_total = result.total_history.back();

    // Post-training predictions, stitched per video in clip order.
    std::size_t clip_cursor = 0;
    for (const DatasetVideo& video : ds.videos) {
        LabelVideo pred(video.frames, fh, fw);
        const std::vector<ClipSpec> parts = partition_video(video.frames, cfg.clip_len);
        for (const ClipSpec& clip : parts) {
            const ClipData& data = clips[clip_cursor++];
            for (int i = 0; i < clip.length; ++i) {
                for (int y = 0; y < fh; ++y)
                    for (int xx = 0; xx < fw; ++xx) {
                        const auto pix = data.features[i].pixel(y, xx);
                        int best = 0;
                        double best_v = -std::numeric_limits<double>::infinity();
                        for (int k = 0; k < k_classes; ++k) {
                            double acc = result.bias[k];
                            for (int c = 0; c < d; ++c) acc += result.w.at(k, c) * pix[c];
                            if (acc > best_v) {
                                best_v = acc;
                                best = k;
                            }
                        }
                        pred.at(clip.indices[i], y, xx) = static_cast<std::uint8_t>(best);
                    }
            }
        }
        result.predictions.push_back(std::move(pred));
    }
    return result;
}

std::string toy_train_json(const ToyTrainResult& result) {
    ordered_json doc;
    doc["steps"] = result.total_history.size() - 1;
    doc["initial_total"] = result.initial_total;
    doc["final_total"] = result.final_total;
    doc["ce"] = result.ce_history;
    doc["mtc"] = result.mtc_history;
    doc["total"] = result.total_history;
    return doc.dump(2) + "\n";
}

} // namespace t2g
