#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "t2g/errors.hpp"
#include "t2g/labels.hpp"
#include "t2g/mtc.hpp"
#include "t2g/pipeline.hpp"
#include "t2g/sampling.hpp"
#include "t2g/tensor.hpp"

namespace {

using nlohmann::ordered_json;

t2g::RunConfig load_cfg(const std::string& path) {
    if (path.empty()) return t2g::RunConfig{};
    return t2g::load_run_config(path);
}

void emit(const std::string& text, const std::string& out_path) {
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out)
            throw t2g::IoError(t2g::IoError::Kind::OpenFailed, "cannot open " + out_path);
        out << text;
        if (!out) throw t2g::IoError(t2g::IoError::Kind::WriteFailed, "write failed: " + out_path);
    }
}

std::vector<t2g::LabelVideo> labels_from_file(const std::string& path) {
    const t2g::Tensor t = t2g::load_tensor(path);
    if (t.dtype != t2g::DType::U8 || (t.dims.size() != 3 && t.dims.size() != 4))
        throw t2g::DataError("labels: expected a u8 tensor of rank 3 [T,H,W] or 4 [B,T,H,W]");
    if (t.dims.size() == 3) return {t2g::label_video_from_tensor(t)};
    std::vector<t2g::LabelVideo> out;
    const int frames = static_cast<int>(t.dims[1]);
    const int height = static_cast<int>(t.dims[2]);
    const int width = static_cast<int>(t.dims[3]);
    const std::size_t stride = static_cast<std::size_t>(frames) * height * width;
    for (std::uint32_t b = 0; b < t.dims[0]; ++b) {
        t2g::LabelVideo v(frames, height, width);
        std::copy_n(t.u8.begin() + static_cast<std::ptrdiff_t>(b * stride), stride,
                    v.labels.begin());
        out.push_back(std::move(v));
    }
    return out;
}

t2g::MappingTable resolve_mapping(const std::string& arg) {
    if (std::filesystem::exists(arg)) return t2g::load_mapping(arg);
    return t2g::builtin_mapping(arg);
}

struct MtcFlags {
    double tau = 0.0;
    double alpha = 0.0;
    int scales = 0;
    CLI::Option* tau_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* scales_opt = nullptr;

    void attach(CLI::App* cmd) {
        tau_opt = cmd->add_option("--tau", tau, "Trim ratio for the trimmed mean");
        alpha_opt = cmd->add_option("--alpha", alpha, "Per-scale decay weight");
        scales_opt = cmd->add_option("--mtc-scales", scales,
                                     "Consistency scale count (0 = derive from clip length)");
    }
    void apply(t2g::MtcConfig& cfg) const {
        if (tau_opt->count()) cfg.trim_ratio = tau;
        if (alpha_opt->count()) cfg.decay = alpha;
        if (scales_opt->count()) cfg.scale_count = scales;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"t2g: temporally consistent segmentation toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic clip dataset");
    std::string gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "Run configuration JSON")->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "Output directory")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Seed override");
    gen->callback([&] {
        t2g::RunConfig cfg = load_cfg(gen_config);
        if (gen_seed_opt->count()) cfg.seed = gen_seed;
        cfg.validate();
        const t2g::Dataset ds = t2g::generate_dataset(cfg, gen_out);
        std::cout << "wrote " << ds.videos.size() << " videos ("
                  << (ds.videos.empty() ? 0 : ds.videos.front().frames) << " frames each) to "
                  << gen_out << "\n";
    });

    // infer
    auto* infer = app.add_subcommand("infer", "Run the clip model and write predictions");
    std::string infer_config, infer_data, infer_out;
    std::uint64_t infer_seed = 0;
    int infer_clip_len = 0;
    infer->add_option("--config", infer_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    infer->add_option("--data", infer_data, "Dataset manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    infer->add_option("--out", infer_out, "Output directory")->required();
    auto* infer_seed_opt = infer->add_option("--seed", infer_seed, "Seed override");
    auto* infer_clip_opt = infer->add_option("--clip-len", infer_clip_len, "Clip length override");
    infer->callback([&] {
        t2g::RunConfig cfg = load_cfg(infer_config);
        if (infer_seed_opt->count()) cfg.seed = infer_seed;
        if (infer_clip_opt->count()) cfg.clip_len = infer_clip_len;
        cfg.validate();
        const t2g::Dataset ds = t2g::load_dataset(infer_data);
        const t2g::PredictionSet preds = t2g::infer_dataset(cfg, ds, infer_out);
        std::cout << "wrote predictions for " << preds.video_names.size() << " videos to "
                  << infer_out << "\n";
    });

    // loss
    auto* loss = app.add_subcommand("loss", "Masked temporal consistency loss");
    std::string loss_config, loss_logits, loss_labels, loss_out;
    MtcFlags loss_flags;
    loss->add_option("--config", loss_config, "Run configuration JSON")->check(CLI::ExistingFile);
    loss->add_option("--logits", loss_logits, "Logits tensor, f32/f64 [T,K,H,W] or [B,T,K,H,W]")
        ->required()
        ->check(CLI::ExistingFile);
    loss->add_option("--labels", loss_labels, "Label tensor, u8 [T,H,W] or [B,T,H,W]")
        ->required()
        ->check(CLI::ExistingFile);
    loss_flags.attach(loss);
    loss->add_option("--out", loss_out, "Also write the JSON report here");
    loss->callback([&] {
        t2g::RunConfig cfg = load_cfg(loss_config);
        loss_flags.apply(cfg.mtc);
        cfg.mtc.validate();
        const t2g::LogitsVolume x = t2g::logits_from_tensor(t2g::load_tensor(loss_logits));
        const std::vector<t2g::LabelVideo> labels = labels_from_file(loss_labels);
        const t2g::MtcResult result = t2g::mtc_loss(x, labels, cfg.mtc);
        emit(t2g::mtc_result_json(result), loss_out);
    });

    // grad-check
    auto* grad = app.add_subcommand("grad-check",
                                    "Finite-difference audit of the consistency gradient");
    std::string grad_config, grad_logits, grad_labels, grad_out;
    MtcFlags grad_flags;
    double grad_eps = 1e-6, grad_threshold = 1e-4;
    int grad_coords = 24;
    std::uint64_t grad_seed = 0;
    grad->add_option("--config", grad_config, "Run configuration JSON")->check(CLI::ExistingFile);
    grad->add_option("--logits", grad_logits, "Logits tensor")->required()
        ->check(CLI::ExistingFile);
    grad->add_option("--labels", grad_labels, "Label tensor")->required()
        ->check(CLI::ExistingFile);
    grad_flags.attach(grad);
    grad->add_option("--eps", grad_eps, "Central difference step");
    grad->add_option("--coords", grad_coords, "Coordinates to probe");
    grad->add_option("--seed", grad_seed, "Probe/jitter seed");
    grad->add_option("--threshold", grad_threshold, "Max allowed relative deviation");
    grad->add_option("--out", grad_out, "Also write the JSON report here");
    grad->callback([&] {
        t2g::RunConfig cfg = load_cfg(grad_config);
        grad_flags.apply(cfg.mtc);
        cfg.mtc.validate();
        const t2g::LogitsVolume x = t2g::logits_from_tensor(t2g::load_tensor(grad_logits));
        const std::vector<t2g::LabelVideo> labels = labels_from_file(grad_labels);
        const t2g::FdReport report =
            t2g::finite_diff_check(x, labels, cfg.mtc, grad_eps, grad_coords, grad_seed);
        emit(t2g::fd_report_json(report, grad_threshold), grad_out);
        if (!(report.max_rel_dev < grad_threshold))
            throw t2g::CheckError("grad-check: max relative deviation " +
                                  std::to_string(report.max_rel_dev) + " >= " +
                                  std::to_string(grad_threshold));
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate predictions: mIoU and mVC");
    std::string eval_config, eval_data, eval_pred, eval_mapping, eval_protocol, eval_out;
    std::vector<int> eval_windows;
    double eval_theta = 0.0;
    bool eval_strict = false;
    eval->add_option("--config", eval_config, "Run configuration JSON")->check(CLI::ExistingFile);
    eval->add_option("--data", eval_data, "Dataset manifest.json")->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--pred", eval_pred, "predictions.json from infer")->required()
        ->check(CLI::ExistingFile);
    auto* eval_protocol_opt =
        eval->add_option("--protocol", eval_protocol, "dense or approx")
            ->check(CLI::IsMember({"dense", "approx"}));
    auto* eval_theta_opt = eval->add_option("--theta", eval_theta, "Static-pixel threshold");
    auto* eval_windows_opt =
        eval->add_option("--windows", eval_windows, "Window sizes for mVC")->delimiter(',');
    eval->add_flag("--strict", eval_strict, "Require window predictions to match ground truth");
    eval->add_option("--mapping", eval_mapping,
                     "Label mapping: a JSON table or one of cityscapes, apolloscape, camvid");
    eval->add_option("--out", eval_out, "Also write the JSON report here");
    eval->callback([&] {
        t2g::RunConfig cfg = load_cfg(eval_config);
        if (eval_protocol_opt->count()) cfg.protocol = eval_protocol;
        if (eval_theta_opt->count()) cfg.theta = eval_theta;
        if (eval_windows_opt->count()) cfg.windows = eval_windows;
        if (eval_strict) cfg.strict_vc = true;
        cfg.validate();
        const t2g::Dataset ds = t2g::load_dataset(eval_data);
        const t2g::PredictionSet preds = t2g::load_predictions(eval_pred);
        std::optional<t2g::MappingTable> mapping;
        if (!eval_mapping.empty()) mapping = resolve_mapping(eval_mapping);
        const t2g::MetricReport report =
            t2g::evaluate(cfg, ds, preds, mapping ? &*mapping : nullptr);
        emit(t2g::metric_report_json(report), eval_out);
    });

    // train-toy
    auto* train = app.add_subcommand("train-toy", "Linear-head training on frozen clip features");
    std::string train_config, train_data, train_out;
    MtcFlags train_flags;
    int train_steps = 0, train_clip_len = 0;
    double train_lr = 0.0, train_lambda = 0.0;
    std::uint64_t train_seed = 0;
    bool train_zeroed = false;
    train->add_option("--config", train_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    train->add_option("--data", train_data, "Dataset manifest.json")->required()
        ->check(CLI::ExistingFile);
    auto* train_steps_opt = train->add_option("--steps", train_steps, "Gradient steps");
    auto* train_lr_opt = train->add_option("--lr", train_lr, "Learning rate");
    auto* train_lambda_opt =
        train->add_option("--lambda-mtc", train_lambda, "Consistency loss weight");
    auto* train_clip_opt = train->add_option("--clip-len", train_clip_len, "Clip length");
    auto* train_seed_opt = train->add_option("--seed", train_seed, "Seed override");
    train_flags.attach(train);
    train->add_flag("--zeroed-mtc", train_zeroed,
                    "Compute the consistency term, then multiply it by zero (wiring check)");
    train->add_option("--out", train_out, "Also write the JSON report here");
    train->callback([&] {
        t2g::RunConfig cfg = load_cfg(train_config);
        if (train_seed_opt->count()) cfg.seed = train_seed;
        if (train_clip_opt->count()) cfg.clip_len = train_clip_len;
        train_flags.apply(cfg.mtc);
        cfg.validate();
        t2g::ToyTrainOptions opts;
        opts.steps = train_steps_opt->count() ? train_steps : cfg.train_steps;
        opts.learning_rate = train_lr_opt->count() ? train_lr : cfg.learning_rate;
        if (train_lambda_opt->count()) opts.lambda_mtc = train_lambda;
        opts.compute_zeroed_mtc = train_zeroed;
        const t2g::Dataset ds = t2g::load_dataset(train_data);
        const t2g::ToyTrainResult result = t2g::toy_train(cfg, ds, opts);

        ordered_json doc = ordered_json::parse(t2g::toy_train_json(result));
        std::vector<double> vc2;
        for (std::size_t v = 0; v < ds.videos.size(); ++v) {
            t2g::VideoEval ve;
            ve.pred = result.predictions[v];
            ve.gt = t2g::load_label_video(ds, ds.videos[v]);
            vc2.push_back(t2g::vc_dense(ve, 2));
        }
        doc["per_video_vc2"] = vc2;
        doc["mvc2"] = t2g::mvc(vc2);
        emit(doc.dump(2) + "\n", train_out);
    });

    // sample-clips
    auto* sample = app.add_subcommand("sample-clips", "Stride-randomized clip sampling");
    int sample_video_len = 0, sample_clip_len = 4, sample_draws = 1;
    std::vector<int> sample_strides = {5, 10, 15, 20, 30, 40};
    std::uint64_t sample_seed = 0;
    sample->add_option("--video-len", sample_video_len, "Video length in frames")->required();
    sample->add_option("--clip-len", sample_clip_len, "Frames per clip");
    sample->add_option("--strides", sample_strides, "Candidate strides")->delimiter(',');
    sample->add_option("--draws", sample_draws, "Number of samples");
    sample->add_option("--seed", sample_seed, "Sampler seed");
    sample->callback([&] {
        if (sample_draws < 1) throw t2g::DomainError("sample-clips: draws must be >= 1");
        const t2g::StrideSet strides = t2g::StrideSet::make(sample_strides);
        t2g::Rng rng(sample_seed);
        ordered_json doc;
        doc["video_len"] = sample_video_len;
        doc["clip_len"] = sample_clip_len;
        doc["strides"] = strides.values;
        ordered_json draws = ordered_json::array();
        for (int i = 0; i < sample_draws; ++i) {
            const t2g::ClipSpec clip =
                t2g::sample_clip(sample_video_len, sample_clip_len, strides, rng);
            draws.push_back(
                {{"start", clip.start}, {"stride", clip.stride}, {"indices", clip.indices}});
        }
        doc["draws"] = draws;
        std::cout << doc.dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
        return rc;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const t2g::CheckError& e) {
        std::cerr << "check failure: " << e.what() << "\n";
        return 3;
    } catch (const t2g::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
