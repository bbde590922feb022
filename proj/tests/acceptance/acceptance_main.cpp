// Acceptance suite: one criterion per entry, each printing a single
// pass/fail line. Run with a number 1..11 to execute one criterion, or with
// no arguments for the full list. Exit code 0 only if everything passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "t2g/decoder.hpp"
#include "t2g/errors.hpp"
#include "t2g/labels.hpp"
#include "t2g/metrics.hpp"
#include "t2g/model.hpp"
#include "t2g/mtc.hpp"
#include "t2g/pipeline.hpp"
#include "t2g/queries.hpp"
#include "t2g/sampling.hpp"
#include "t2g/tensor.hpp"

namespace fs = std::filesystem;
using t2g::Grid2D;
using t2g::LabelVideo;
using t2g::LogitsVolume;
using t2g::Matrix;
using t2g::MtcConfig;
using t2g::VideoEval;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Matrix random_matrix(oracle::Rng& rng, int rows, int cols, double amp) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-amp, amp);
    return m;
}

t2g::BlockParams random_block(oracle::Rng& rng, int d, int ffn) {
    t2g::BlockParams b;
    b.w_q = random_matrix(rng, d, d, 0.4);
    b.w_k = random_matrix(rng, d, d, 0.4);
    b.w_v = random_matrix(rng, d, d, 0.4);
    b.w_o = random_matrix(rng, d, d, 0.4);
    b.attn_gain.assign(d, 1.0);
    b.attn_bias.assign(d, 0.0);
    b.w1 = random_matrix(rng, d, ffn, 0.4);
    b.b1.assign(ffn, 0.0);
    b.w2 = random_matrix(rng, ffn, d, 0.4);
    b.b2.assign(d, 0.0);
    b.ffn_gain.assign(d, 1.0);
    b.ffn_bias.assign(d, 0.0);
    return b;
}

// --- criterion 1: analytic gradient vs central differences ----------------

bool criterion_grad(std::string& detail) {
    oracle::Rng rng(101);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const LogitsVolume x = oracle::random_logits(rng, 2, 4, 3, 8, 8, 1.5);
        std::vector<LabelVideo> labels;
        for (int b = 0; b < 2; ++b)
            labels.push_back(oracle::random_label_video(rng, 4, 8, 8, 3, 0.15, 0.25));
        MtcConfig cfg;
        const auto report =
            t2g::finite_diff_check(x, labels, cfg, 1e-6, 24, 1000 + static_cast<std::uint64_t>(i));
        worst = std::max(worst, report.max_rel_dev);
    }
    detail = "20 volumes, max rel dev " + fmt(worst);
    return worst < 1e-4;
}

// --- criterion 2: trimmed mean vs sort-drop-average ------------------------

bool criterion_trim(std::string& detail) {
    oracle::Rng rng(102);
    const double taus[] = {0.0, 0.1, 0.2, 0.3};
    for (int i = 0; i < 10000; ++i) {
        const int n = 1 + rng.below(40);
        const int mode = rng.below(3);
        std::vector<double> v(n);
        for (auto& x : v) {
            if (mode == 0) x = rng.below(6) * 0.25; // heavy ties
            else if (mode == 1) x = rng.uniform(0.0, 2.0);
            else x = 0.75; // all equal
        }
        const int ti = rng.below(4);
        const auto lib = t2g::trimmed_mean(v, taus[ti]);
        const auto ref = oracle::trimmed_mean(v, ti);
        if (!lib.has_value() || !ref.has_value()) {
            detail = "missing value at trial " + std::to_string(i);
            return false;
        }
        if (*lib != *ref) {
            detail = "mismatch at trial " + std::to_string(i) + ": " + fmt(*lib) + " vs " +
                     fmt(*ref);
            return false;
        }
    }
    detail = "10000 multisets, 4 ratios, bitwise equal";
    return true;
}

// --- criterion 3: reference defaults ---------------------------------------

bool criterion_defaults(std::string& detail) {
    const t2g::RunConfig cfg;
    bool ok = cfg.mtc.trim_ratio == 0.2;
    ok = ok && cfg.mtc.decay == 0.5;
    ok = ok && cfg.mtc.weight == 1.0;
    ok = ok && cfg.strides == std::vector<int>{5, 10, 15, 20, 30, 40};
    if (!ok) {
        detail = "run-config defaults drifted";
        return false;
    }
    // Loss scale s must probe stride 2^s.
    LogitsVolume x(1, 9, 2, 1, 1, 0.0);
    LabelVideo labels(9, 1, 1, 0);
    MtcConfig mc;
    mc.scale_count = 4;
    const auto r = t2g::mtc_loss(x, labels, mc);
    if (r.scales.size() != 4) {
        detail = "expected 4 scales";
        return false;
    }
    for (std::size_t s = 0; s < r.scales.size(); ++s)
        if (r.scales[s].stride != (1 << s)) {
            detail = "scale " + std::to_string(s) + " uses stride " +
                     std::to_string(r.scales[s].stride);
            return false;
        }
    detail = "trim 0.2, decay 0.5, weight 1, strides {5,10,15,20,30,40}, dyadic loss strides";
    return true;
}

// --- criterion 4: metrics vs brute force -----------------------------------

bool criterion_metrics(std::string& detail) {
    oracle::Rng rng(104);
    long vc_checks = 0, miou_checks = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int frames = 1 + rng.below(5);
        const int h = 1 + rng.below(6);
        const int w = 1 + rng.below(6);
        const int k = 2 + rng.below(3);
        const bool strict = rng.below(2) == 1;
        VideoEval v;
        v.gt = oracle::random_label_video(rng, frames, h, w, k, 0.25, 0.4);
        v.pred = oracle::random_label_video(rng, frames, h, w, k, 0.05, 0.4);
        for (int t = 0; t < frames; ++t) {
            Grid2D g(h, w, 1);
            for (auto& x : g.data) x = std::floor(rng.uniform(0.0, 255.0));
            v.gray.push_back(std::move(g));
        }
        for (int t = 0; t < frames; ++t)
            if (rng.below(2) == 1) v.labeled_frames.push_back(t);
        const double theta = std::floor(rng.uniform(0.0, 40.0));

        for (int n = 1; n <= frames + 1; ++n) {
            const auto dense_ref = oracle::vc_dense(v.pred, v.gt, n, strict);
            try {
                const double got = t2g::vc_dense(v, n, strict);
                if (!dense_ref.has_value() || got != *dense_ref) {
                    detail = "dense mismatch, trial " + std::to_string(trial);
                    return false;
                }
            } catch (const t2g::ProtocolError&) {
                if (dense_ref.has_value()) {
                    detail = "dense raised where the reference has a value";
                    return false;
                }
            }
            const auto approx_ref =
                oracle::vc_approx(v.pred, v.gt, v.labeled_frames, v.gray, n, theta, strict);
            try {
                const double got = t2g::vc_approx(v, n, theta, strict);
                if (!approx_ref.has_value() || got != *approx_ref) {
                    detail = "approx mismatch, trial " + std::to_string(trial);
                    return false;
                }
            } catch (const t2g::ProtocolError&) {
                if (approx_ref.has_value()) {
                    detail = "approx raised where the reference has a value";
                    return false;
                }
            }
            ++vc_checks;
        }

        const oracle::IouEval ref = oracle::miou({v.pred}, {v.gt}, k);
        try {
            t2g::ConfusionMatrix conf(k);
            t2g::accumulate_confusion(v.pred, v.gt, k, conf);
            const t2g::IouReport got = t2g::miou(conf);
            if (!ref.any_present || got.miou != ref.miou) {
                detail = "mIoU mismatch, trial " + std::to_string(trial);
                return false;
            }
            for (int c = 0; c < k; ++c) {
                if (got.present[c] != ref.present[c] ||
                    (got.present[c] && got.per_class[c] != ref.per_class[c])) {
                    detail = "per-class IoU mismatch, trial " + std::to_string(trial);
                    return false;
                }
            }
            ++miou_checks;
        } catch (const t2g::DataError&) {
            if (ref.any_present) {
                detail = "mIoU raised where the reference has a value";
                return false;
            }
        }
    }
    detail = std::to_string(vc_checks) + " consistency checks, " + std::to_string(miou_checks) +
             " IoU checks, all exact";
    return true;
}

// --- criterion 5: metric fixed points ---------------------------------------

bool criterion_fixed_points(std::string& detail) {
    oracle::Rng rng(105);
    // Static GT with a hole, constant prediction of an arbitrary class.
    const int frames = 5;
    VideoEval v;
    v.gt = LabelVideo(frames, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const std::uint8_t c = static_cast<std::uint8_t>(rng.below(3));
            for (int t = 0; t < frames; ++t) v.gt.at(t, y, x) = c;
        }
    for (int t = 0; t < frames; ++t) v.gt.at(t, 1, 1) = t2g::kIgnoreId;
    v.pred = LabelVideo(frames, 4, 4, 2);
    for (int t = 0; t < frames; ++t) {
        v.gray.push_back(Grid2D(4, 4, 1, 120.0));
        v.labeled_frames.push_back(t);
    }
    for (int n = 1; n <= frames; ++n) {
        if (t2g::vc_dense(v, n) != 1.0) {
            detail = "dense consistency of a constant prediction != 1 at n=" + std::to_string(n);
            return false;
        }
        if (t2g::vc_approx(v, n, 3.0) != 1.0) {
            detail = "approx consistency of a constant prediction != 1 at n=" + std::to_string(n);
            return false;
        }
    }
    if (t2g::mvc(std::vector<double>{1.0, 1.0}) != 1.0) {
        detail = "mean consistency of perfect videos != 1";
        return false;
    }
    // Perfect predictions with absent classes: only classes 0..2 appear out
    // of 4, so the mean must ignore the absent one and still be exactly 1.
    t2g::ConfusionMatrix conf(4);
    t2g::accumulate_confusion(v.gt, v.gt, 4, conf);
    const t2g::IouReport r = t2g::miou(conf);
    if (r.miou != 1.0) {
        detail = "perfect prediction mIoU != 1";
        return false;
    }
    if (r.present[3]) {
        detail = "absent class counted as present";
        return false;
    }
    detail = "constant predictions score 1 under both protocols, perfect mIoU 1, absent class excluded";
    return true;
}

// --- criterion 6: attention distributions and memory-order invariance ------

bool criterion_attention(std::string& detail) {
    oracle::Rng rng(106);
    double worst_row = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 4 + 2 * rng.below(3);
        const int ch = 3 + rng.below(4);
        t2g::LayerParams p;
        p.w_q = random_matrix(rng, d, d, 0.5);
        p.w_k = random_matrix(rng, ch, d, 0.5);
        p.w_v = random_matrix(rng, ch, d, 0.5);
        p.phi = random_matrix(rng, ch, d, 0.5);
        p.norm_gain.assign(d, 1.0);
        p.norm_bias.assign(d, 0.0);
        t2g::TokenGrid g;
        g.height = 1 + rng.below(4);
        g.width = 1 + rng.below(5);
        g.channels = ch;
        g.tokens = random_matrix(rng, g.height * g.width, ch, 1.0);
        t2g::QuerySet s(1 + rng.below(5), d);
        for (auto& x : s.values.data) x = rng.uniform(-1.0, 1.0);
        const t2g::AttendResult r = t2g::attend(s, g, p);
        for (int i = 0; i < r.attention.weights.rows; ++i) {
            double sum = 0.0;
            for (int j = 0; j < r.attention.weights.cols; ++j) sum += r.attention.weights.at(i, j);
            worst_row = std::max(worst_row, std::abs(sum - 1.0));
        }
    }

    double worst_perm = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int heads = 1 + rng.below(2);
        const int d = heads * (2 + rng.below(3));
        const int n = 3 + rng.below(8);
        t2g::DecoderParams p;
        p.heads = heads;
        p.blocks.push_back(random_block(rng, d, d + 4));
        p.blocks.push_back(random_block(rng, d, d + 4));
        t2g::QuerySet s(2 + rng.below(4), d);
        for (auto& x : s.values.data) x = rng.uniform(-1.0, 1.0);
        t2g::MemoryTokens m;
        m.tokens = random_matrix(rng, n, d, 1.0);
        m.tags.assign(n, {});
        t2g::DecodeTrace trace;
        const t2g::QuerySet base = t2g::decode_queries(s, m, p, &trace);
        for (const auto& block_maps : trace.attention)
            for (const Matrix& a : block_maps)
                for (int i = 0; i < a.rows; ++i) {
                    double sum = 0.0;
                    for (int j = 0; j < a.cols; ++j) sum += a.at(i, j);
                    worst_row = std::max(worst_row, std::abs(sum - 1.0));
                }

        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
        t2g::MemoryTokens shuffled;
        shuffled.tokens = Matrix(n, d);
        shuffled.tags.assign(n, {});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) shuffled.tokens.at(i, j) = m.tokens.at(perm[i], j);
        const t2g::QuerySet moved = t2g::decode_queries(s, shuffled, p);
        for (std::size_t i = 0; i < base.values.data.size(); ++i)
            worst_perm =
                std::max(worst_perm, std::abs(base.values.data[i] - moved.values.data[i]));
    }
    detail = "worst row-sum deviation " + fmt(worst_row) + ", worst permutation deviation " +
             fmt(worst_perm);
    return worst_row < 1e-6 && worst_perm < 1e-9;
}

// --- criterion 7: memory token count ----------------------------------------

bool criterion_memory_count(std::string& detail) {
    oracle::Rng rng(107);
    for (int trial = 0; trial < 50; ++trial) {
        const int t_len = 1 + rng.below(5);
        const int scales = 1 + rng.below(4);
        const int d = 2 + rng.below(4);
        std::vector<int> hs(scales), ws(scales);
        long expected_per_frame = 0;
        for (int l = 0; l < scales; ++l) {
            hs[l] = 1 + rng.below(5);
            ws[l] = 1 + rng.below(5);
            expected_per_frame += hs[l] * ws[l];
        }
        std::vector<std::vector<Grid2D>> grids(t_len);
        for (int t = 0; t < t_len; ++t)
            for (int l = 0; l < scales; ++l) {
                Grid2D g(hs[l], ws[l], d);
                for (auto& x : g.data) x = rng.uniform(-1.0, 1.0);
                grids[t].push_back(std::move(g));
            }
        t2g::EmbeddingTables emb;
        emb.temporal = random_matrix(rng, t_len, d, 0.3);
        emb.scale = random_matrix(rng, scales, d, 0.3);
        const t2g::MemoryTokens m = t2g::build_memory(grids, emb);
        const long expected = static_cast<long>(t_len) * expected_per_frame;
        if (m.tokens.rows != expected || static_cast<long>(m.tags.size()) != expected) {
            detail = "trial " + std::to_string(trial) + ": got " + std::to_string(m.tokens.rows) +
                     " tokens, expected " + std::to_string(expected);
            return false;
        }
        // Per-(frame, scale) tag counts must equal that grid's pixel count.
        std::map<std::pair<int, int>, long> tag_counts;
        for (const auto& tag : m.tags) ++tag_counts[{tag.frame, tag.scale}];
        for (int t = 0; t < t_len; ++t)
            for (int l = 0; l < scales; ++l)
                if (tag_counts[{t, l}] != static_cast<long>(hs[l]) * ws[l]) {
                    detail = "tag count mismatch at frame " + std::to_string(t) + " scale " +
                             std::to_string(l);
                    return false;
                }
    }
    detail = "50 random frame/scale layouts";
    return true;
}

// --- criterion 8: clip sampler ----------------------------------------------

bool criterion_sampler(std::string& detail) {
    t2g::Rng rng(108);
    oracle::Rng meta(1080);
    for (int i = 0; i < 100000; ++i) {
        const int clip_len = 2 + meta.below(5);
        std::vector<int> sv(1 + meta.below(4));
        for (auto& s : sv) s = 1 + meta.below(40);
        const t2g::StrideSet strides = t2g::StrideSet::make(sv);
        const int min_needed = 1 + (clip_len - 1) * strides.values.front();
        const int video_len = min_needed + meta.below(60);
        const t2g::ClipSpec clip = t2g::sample_clip(video_len, clip_len, strides, rng);
        if (static_cast<int>(clip.indices.size()) != clip_len) {
            detail = "wrong clip length at trial " + std::to_string(i);
            return false;
        }
        if (std::find(strides.values.begin(), strides.values.end(), clip.stride) ==
            strides.values.end()) {
            detail = "stride outside the set at trial " + std::to_string(i);
            return false;
        }
        for (int j = 0; j < clip_len; ++j) {
            const int idx = clip.indices[j];
            if (idx < 0 || idx >= video_len || idx != clip.start + j * clip.stride) {
                detail = "bad index at trial " + std::to_string(i);
                return false;
            }
        }
    }

    // Frequency: exactly two feasible strides out of three must split evenly.
    const t2g::StrideSet mixed = t2g::StrideSet::make({5, 10, 100});
    long low = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const t2g::ClipSpec clip = t2g::sample_clip(40, 4, mixed, rng);
        if (clip.stride == 100) {
            detail = "infeasible stride drawn";
            return false;
        }
        if (clip.stride == 5) ++low;
    }
    const double freq = static_cast<double>(low) / draws;
    detail = "100000 structural checks; stride-5 frequency " + fmt(freq);
    return std::abs(freq - 0.5) <= 0.03;
}

// --- criterion 9: label alignment tables ------------------------------------

bool criterion_mappings(std::string& detail) {
    struct Expect {
        const char* dataset;
        // source id whose pixels land on overlap id i, in overlap order 0..14
        std::vector<int> sources;
        int extra_source;
        int extra_overlap;
    };
    const std::vector<Expect> tables = {
        {"cityscapes", {0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 17}, 15, 13},
        {"apolloscape", {9, 10, 20, 17, 13, 15, 14, 16, 21, 0, 4, 5, 1, 6, 2}, 7, 13},
        {"camvid", {17, 19, 4, 30, 9, 8, 24, 20, 26, 21, 16, 2, 5, 27, 13}, 29, 8},
    };
    for (const Expect& e : tables) {
        std::vector<std::uint8_t> lut(256, t2g::kIgnoreId);
        for (int i = 0; i < 15; ++i) lut[static_cast<std::size_t>(e.sources[i])] =
            static_cast<std::uint8_t>(i);
        lut[static_cast<std::size_t>(e.extra_source)] =
            static_cast<std::uint8_t>(e.extra_overlap);
        const t2g::MappingTable table = t2g::builtin_mapping(e.dataset);
        for (int s = 0; s < 256; ++s)
            if (table.map(static_cast<std::uint8_t>(s)) != lut[static_cast<std::size_t>(s)]) {
                detail = std::string(e.dataset) + ": source " + std::to_string(s) + " maps to " +
                         std::to_string(table.map(static_cast<std::uint8_t>(s))) +
                         ", expected " + std::to_string(lut[static_cast<std::size_t>(s)]);
                return false;
            }
    }
    detail = "3 datasets, 256 source ids each, merges included";
    return true;
}

// --- criterion 10: committed training fixture --------------------------------

double mean_vc2(const t2g::Dataset& ds, const std::vector<LabelVideo>& preds) {
    std::vector<double> scores;
    for (std::size_t v = 0; v < ds.videos.size(); ++v) {
        VideoEval eval;
        eval.pred = preds[v];
        eval.gt = t2g::load_label_video(ds, ds.videos[v]);
        scores.push_back(t2g::vc_dense(eval, 2));
    }
    return t2g::mvc(scores);
}

bool criterion_training(std::string& detail) {
    const t2g::RunConfig cfg = t2g::load_run_config(fs::path(T2G_REPO_DIR) / "configs/toy.json");
    if (cfg.train_steps > 500) {
        detail = "fixture allows more than 500 steps";
        return false;
    }
    TempDir data("t2g_accept_toy");
    const t2g::Dataset ds = t2g::generate_dataset(cfg, data.path);

    t2g::ToyTrainOptions with;
    with.steps = cfg.train_steps;
    with.learning_rate = cfg.learning_rate;
    with.lambda_mtc = cfg.mtc.weight;
    t2g::ToyTrainOptions without = with;
    without.lambda_mtc = 0.0;

    const t2g::ToyTrainResult r1 = t2g::toy_train(cfg, ds, with);
    const t2g::ToyTrainResult r0 = t2g::toy_train(cfg, ds, without);

    const double drop = 1.0 - r1.final_total / r1.initial_total;
    const double vc_with = mean_vc2(ds, r1.predictions);
    const double vc_without = mean_vc2(ds, r0.predictions);
    detail = "loss drop " + fmt(drop * 100.0) + "% in " + std::to_string(with.steps) +
             " steps; window-2 consistency " + fmt(vc_with) + " with the temporal term vs " +
             fmt(vc_without) + " without";
    return drop >= 0.9 && vc_with >= vc_without;
}

// --- criterion 11: CLI determinism and tensor round trips ---------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(T2G_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status == -1 ? -1 : WEXITSTATUS(status);
}

std::map<std::string, std::vector<char>> read_tree(const fs::path& root) {
    std::map<std::string, std::vector<char>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        files[fs::relative(entry.path(), root).string()] = {
            std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    return files;
}

bool criterion_cli(std::string& detail) {
    oracle::Rng rng(111);
    TempDir tensor_tmp("t2g_accept_tensor");
    for (int trial = 0; trial < 30; ++trial) {
        const int rank = 1 + rng.below(4);
        std::vector<std::uint32_t> dims;
        for (int r = 0; r < rank; ++r) dims.push_back(1 + rng.below(5));
        t2g::Tensor t;
        const int which = rng.below(3);
        if (which == 0) {
            t = t2g::Tensor::make_u8(dims);
            for (auto& b : t.u8) b = static_cast<std::uint8_t>(rng.below(256));
        } else if (which == 1) {
            t = t2g::Tensor::make_f32(dims);
            for (auto& v : t.f32) v = static_cast<float>(rng.uniform(-5.0, 5.0));
        } else {
            t = t2g::Tensor::make_f64(dims);
            for (auto& v : t.f64) v = rng.uniform(-5.0, 5.0);
        }
        const fs::path file = tensor_tmp.path / ("x" + std::to_string(trial) + ".t2g");
        t2g::save_tensor(file, t);
        const t2g::Tensor back = t2g::load_tensor(file);
        if (back.dtype != t.dtype || back.dims != t.dims || back.u8 != t.u8 ||
            back.f32 != t.f32 || back.f64 != t.f64) {
            detail = "tensor round trip lost data at trial " + std::to_string(trial);
            return false;
        }
    }

    TempDir work("t2g_accept_cli");
    const std::string cfg = (work.path / "cfg.json").string();
    {
        std::ofstream out(cfg);
        out << R"({"seed": 21, "videos": 1, "frames_per_video": 6, "frame_height": 12,)"
            << R"( "frame_width": 16, "class_count": 3, "labeled_every": 2,)"
            << R"( "windows": [2, 3], "clip_len": 3})";
    }
    const std::string gen_a = (work.path / "data_a").string();
    const std::string gen_b = (work.path / "data_b").string();
    for (const std::string& out : {gen_a, gen_b})
        if (run_cli("gen --config " + cfg + " --out " + out) != 0) {
            detail = "gen exited nonzero";
            return false;
        }
    if (read_tree(gen_a) != read_tree(gen_b)) {
        detail = "gen reruns differ";
        return false;
    }

    const std::string infer_a = (work.path / "pred_a").string();
    const std::string infer_b = (work.path / "pred_b").string();
    for (const std::string& out : {infer_a, infer_b})
        if (run_cli("infer --config " + cfg + " --data " + gen_a + "/manifest.json --out " +
                    out) != 0) {
            detail = "infer exited nonzero";
            return false;
        }
    if (read_tree(infer_a) != read_tree(infer_b)) {
        detail = "infer reruns differ";
        return false;
    }

    const fs::path eval_a = work.path / "eval_a.json";
    const fs::path eval_b = work.path / "eval_b.json";
    for (const fs::path& out : {eval_a, eval_b})
        if (run_cli("eval --config " + cfg + " --data " + gen_a + "/manifest.json --pred " +
                    infer_a + "/predictions.json --out " + out.string()) != 0) {
            detail = "eval exited nonzero";
            return false;
        }
    std::ifstream in_a(eval_a), in_b(eval_b);
    const std::string report_a((std::istreambuf_iterator<char>(in_a)),
                               std::istreambuf_iterator<char>());
    const std::string report_b((std::istreambuf_iterator<char>(in_b)),
                               std::istreambuf_iterator<char>());
    if (report_a.empty() || report_a != report_b) {
        detail = "eval reruns differ";
        return false;
    }
    detail = "30 tensor round trips, generate/infer/evaluate reruns byte-identical";
    return true;
}

struct Criterion {
    int id;
    const char* description;
    bool (*run)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "temporal-consistency gradient matches central differences", criterion_grad},
    {2, "trimmed mean equals the sort-drop-average reference exactly", criterion_trim},
    {3, "shipped defaults and dyadic loss strides", criterion_defaults},
    {4, "consistency and IoU metrics equal brute force exactly", criterion_metrics},
    {5, "metric fixed points hold", criterion_fixed_points},
    {6, "attention rows are distributions and memory order is irrelevant", criterion_attention},
    {7, "memory size equals the summed token counts", criterion_memory_count},
    {8, "clip sampler structure and stride uniformity", criterion_sampler},
    {9, "built-in label alignments match the reference rows", criterion_mappings},
    {10, "committed toy fixture trains and the temporal term helps", criterion_training},
    {11, "CLI reruns are byte-identical and tensors round trip", criterion_cli},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 11) {
            std::fprintf(stderr, "usage: %s [criterion 1..11]\n", argv[0]);
            return 2;
        }
    }
    bool all_ok = true;
    for (const Criterion& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        std::string detail;
        bool ok = false;
        const auto start = std::chrono::steady_clock::now();
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("unexpected exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d: %s - %s (%s; %.1fs)\n", c.id, ok ? "PASS" : "FAIL",
                    c.description, detail.c_str(), seconds);
        std::fflush(stdout);
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
