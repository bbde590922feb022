#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "t2g/decoder.hpp"
#include "t2g/features.hpp"
#include "t2g/labels.hpp"
#include "t2g/metrics.hpp"
#include "t2g/model.hpp"
#include "t2g/mtc.hpp"
#include "t2g/tensor.hpp"

namespace t2g {

/// Everything a command needs, loadable from one JSON file with flag
/// overrides on top. Loss defaults follow the reference configuration:
/// trim ratio 0.2, decay 0.5, weight 1, training strides {5,10,15,20,30,40}.
struct RunConfig {
    std::uint64_t seed = 0;

    // Model shape.
    ScaleSpec scales;
    int query_count = 8;
    int dim = 32;
    int block_count = 2;
    int heads = 4;
    int ffn_dim = 128;
    double alpha_txt = 0.0;

    // Clip sampling.
    int clip_len = 4;
    std::vector<int> strides = {5, 10, 15, 20, 30, 40};

    // Temporal-consistency loss.
    MtcConfig mtc;

    // Metrics.
    std::vector<int> windows = {8, 16};
    double theta = 10.0;
    std::string protocol = "dense"; // or "approx"
    bool strict_vc = false;

    // Synthetic dataset shape (gen).
    int videos = 2;
    int frames_per_video = 24;
    int frame_height = 24;
    int frame_width = 32;
    int class_count = 4;
    double stable_fraction = 0.85;
    double feature_label_gain = 2.0;
    double gray_noise = 2.0;
    int labeled_every = 4;
    int temporal_period = 1;

    // Toy training.
    int train_steps = 200;
    double learning_rate = 4.0;

    RunConfig();
    void validate() const;
    ModelConfig model_config() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// One video's file listing inside a generated dataset.
struct DatasetVideo {
    std::string name;
    int frames = 0;
    std::vector<int> labeled_frames;
    std::vector<std::string> label_files; // per frame, relative to the root
    std::vector<std::string> gray_files;
    std::vector<std::vector<std::string>> rgb_files;   // [frame][scale]
    std::vector<std::vector<std::string>> depth_files; // [frame][scale]
};

struct Dataset {
    std::filesystem::path root;
    std::uint64_t seed = 0;
    int class_count = 0;
    int frame_height = 0;
    int frame_width = 0;
    ScaleSpec scales;
    std::vector<DatasetVideo> videos;
};

/// Synthetic ground truth: a static per-cell class quilt, one moving
/// class-cycling rectangle sized by (1 - stable_fraction), and a static
/// ignore hole. stable_fraction 1 yields a temporally constant video.
LabelVideo synth_labels(std::uint64_t seed, int video_index, int frames, int height, int width,
                        int class_count, double stable_fraction);

/// Synthetic grayscale frame: a class-dependent base level plus bounded
/// noise, so same-label pixels stay within a small threshold across frames.
std::vector<std::uint8_t> synth_gray(std::uint64_t seed, int video_index, int frame,
                                     const LabelVideo& labels, double noise);

/// Writes the synthetic dataset (features for both branches, labels, gray
/// frames, manifest.json) under out_dir and returns its description.
Dataset generate_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Reads a manifest written by generate_dataset.
Dataset load_dataset(const std::filesystem::path& manifest_path);

LabelVideo load_label_video(const Dataset& ds, const DatasetVideo& video);
std::vector<Grid2D> load_gray_frames(const Dataset& ds, const DatasetVideo& video);
std::vector<FrameTokens> load_frame_tokens(const Dataset& ds, const DatasetVideo& video);

/// Tensor bridges for the on-disk formats.
Tensor logits_to_tensor(const LogitsVolume& volume, int batch_index); // f32 [T,K,H,W]
LogitsVolume logits_from_tensor(const Tensor& t); // rank 4 [T,K,H,W] or 5 [B,T,K,H,W]
LabelVideo label_video_from_tensor(const Tensor& t); // u8 rank 3 [T,H,W]
Tensor label_video_to_tensor(const LabelVideo& v);

/// Prediction bundle written by infer: per-clip logits plus per-frame argmax
/// label maps, listed in predictions.json.
struct PredictionSet {
    std::filesystem::path root;
    int class_count = 0;
    std::vector<std::string> video_names;
    std::vector<std::vector<std::string>> pred_files; // [video][frame]
};

PredictionSet infer_dataset(const RunConfig& cfg, const Dataset& ds,
                            const std::filesystem::path& out_dir);
PredictionSet load_predictions(const std::filesystem::path& manifest_path);

/// Full evaluation report for one prediction/GT pairing.
struct MetricReport {
    std::string protocol;
    IouReport iou;
    std::int64_t evaluated_pixels = 0;
    std::vector<int> windows;
    std::vector<std::vector<double>> per_video_vc; // [window][video]
    std::vector<double> mean_vc;                   // [window]
};

/// Computes mIoU and mVC_n. mapping (may be null) is applied to both sides
/// first; the approx protocol uses labeled frames and grayscale static
/// masks, the dense protocol uses every frame.
MetricReport evaluate(const RunConfig& cfg, const Dataset& ds, const PredictionSet& preds,
                      const MappingTable* mapping = nullptr);

std::string metric_report_json(const MetricReport& report);
std::string mtc_result_json(const MtcResult& result);
std::string fd_report_json(const FdReport& report, double threshold);

/// Linear-head training on frozen clip features: logits = W p(u) + b,
/// gradient descent on masked cross-entropy + lambda * temporal consistency.
struct ToyTrainOptions {
    int steps = 200;
    double learning_rate = 4.0;
    double lambda_mtc = 1.0;
    // Wiring check: evaluate the consistency term, then multiply it by zero.
    // Must reproduce the lambda = 0 trajectory exactly.
    bool compute_zeroed_mtc = false;
};

struct ToyTrainResult {
    Matrix w; // K x d
    std::vector<double> bias;
    std::vector<double> ce_history;
    std::vector<double> mtc_history;
    std::vector<double> total_history;
    std::vector<LabelVideo> predictions; // per video, argmax after training
    double initial_total = 0.0;
    double final_total = 0.0;
};

/// Requires the dataset frame resolution to equal the finest token scale so
/// the head sees pixels one-to-one. Raises CheckError on divergence.
ToyTrainResult toy_train(const RunConfig& cfg, const Dataset& ds, const ToyTrainOptions& opts);

std::string toy_train_json(const ToyTrainResult& result);

} // namespace t2g
