#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "t2g/features.hpp"
#include "t2g/model.hpp"
#include "t2g/mtc.hpp"
#include "t2g/numerics.hpp"
#include "t2g/queries.hpp"
#include "t2g/sampling.hpp"

namespace {

// Deterministic fill so every run times the same arithmetic.
double unit(t2g::Rng& rng) {
    return static_cast<double>(rng.next() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

t2g::Matrix random_matrix(t2g::Rng& rng, int rows, int cols) {
    t2g::Matrix m(rows, cols);
    for (double& v : m.data) v = unit(rng);
    return m;
}

static void BM_Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    t2g::Rng rng(1);
    const t2g::Matrix a = random_matrix(rng, n, n);
    const t2g::Matrix b = random_matrix(rng, n, n);
    for (auto _ : state) {
        t2g::Matrix c = t2g::matmul(a, b);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_SoftmaxRows(benchmark::State& state) {
    const int cols = static_cast<int>(state.range(0));
    t2g::Rng rng(2);
    const t2g::Matrix m = random_matrix(rng, 64, cols);
    const double scale = std::sqrt(static_cast<double>(cols));
    for (auto _ : state) {
        t2g::Matrix s = t2g::softmax_rows(m, scale);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 64 * static_cast<std::int64_t>(cols));
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(512);

static void BM_Attend(benchmark::State& state) {
    const int d = 32;
    t2g::Rng rng(3);
    t2g::QuerySet queries(16, d);
    queries.values = random_matrix(rng, 16, d);
    t2g::TokenGrid tokens;
    tokens.height = 24;
    tokens.width = 32;
    tokens.channels = d;
    tokens.tokens = random_matrix(rng, 24 * 32, d);
    t2g::LayerParams p;
    p.w_q = random_matrix(rng, d, d);
    p.w_k = random_matrix(rng, d, d);
    p.w_v = random_matrix(rng, d, d);
    p.phi = random_matrix(rng, d, d);
    p.norm_gain.assign(d, 1.0);
    p.norm_bias.assign(d, 0.0);
    for (auto _ : state) {
        t2g::AttendResult r = t2g::attend(queries, tokens, p);
        benchmark::DoNotOptimize(r.summaries.data.data());
    }
}
BENCHMARK(BM_Attend);

static void BM_RunClip(benchmark::State& state) {
    const int frames = static_cast<int>(state.range(0));
    t2g::ModelConfig cfg;
    cfg.seed = 9;
    cfg.scales.levels = {{0, 12, 16, 32}, {1, 6, 8, 32}};
    cfg.query_count = 8;
    cfg.dim = 32;
    cfg.block_count = 2;
    cfg.heads = 4;
    cfg.ffn_dim = 128;
    cfg.max_clip_len = frames;
    cfg.class_count = 4;
    const t2g::ModelParams params = t2g::init_model(cfg);
    std::vector<t2g::FrameTokens> clip(frames);
    for (int t = 0; t < frames; ++t) {
        clip[t].rgb = t2g::synth_tokens(cfg.seed, t, t2g::Branch::Rgb, cfg.scales);
        clip[t].depth = t2g::synth_tokens(cfg.seed, t, t2g::Branch::Depth, cfg.scales);
    }
    for (auto _ : state) {
        t2g::LogitsVolume v = t2g::run_clip(clip, params, cfg);
        benchmark::DoNotOptimize(v.data.data());
    }
}
BENCHMARK(BM_RunClip)->Arg(2)->Arg(4);

t2g::LogitsVolume bench_logits(int frames, int classes, int h, int w) {
    t2g::Rng rng(4);
    t2g::LogitsVolume x(1, frames, classes, h, w);
    for (double& v : x.data) v = 2.0 * unit(rng);
    return x;
}

t2g::LabelVideo bench_labels(int frames, int classes, int h, int w) {
    t2g::Rng rng(5);
    t2g::LabelVideo labels(frames, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto c =
                static_cast<std::uint8_t>(rng.uniform_below(static_cast<std::uint64_t>(classes)));
            for (int t = 0; t < frames; ++t) labels.at(t, y, x) = c;
        }
    return labels;
}

static void BM_MtcLoss(benchmark::State& state) {
    const int frames = 8;
    const t2g::LogitsVolume x = bench_logits(frames, 4, 32, 32);
    const t2g::LabelVideo labels = bench_labels(frames, 4, 32, 32);
    t2g::MtcConfig cfg;
    for (auto _ : state) {
        t2g::MtcResult r = t2g::mtc_loss(x, labels, cfg);
        benchmark::DoNotOptimize(&r.loss);
    }
}
BENCHMARK(BM_MtcLoss);

static void BM_MtcGrad(benchmark::State& state) {
    const int frames = 8;
    const t2g::LogitsVolume x = bench_logits(frames, 4, 32, 32);
    const t2g::LabelVideo labels = bench_labels(frames, 4, 32, 32);
    t2g::MtcConfig cfg;
    for (auto _ : state) {
        t2g::LogitsVolume g = t2g::mtc_grad(x, labels, cfg);
        benchmark::DoNotOptimize(g.data.data());
    }
}
BENCHMARK(BM_MtcGrad);

static void BM_TrimmedMean(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    t2g::Rng rng(6);
    std::vector<double> values(n);
    for (double& v : values) v = unit(rng);
    for (auto _ : state) {
        auto r = t2g::trimmed_mean(values, 0.2);
        benchmark::DoNotOptimize(&r);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TrimmedMean)->Arg(256)->Arg(4096);

static void BM_SampleClip(benchmark::State& state) {
    const t2g::StrideSet strides = t2g::StrideSet::make({5, 10, 15, 20, 30, 40});
    t2g::Rng rng(7);
    for (auto _ : state) {
        t2g::ClipSpec c = t2g::sample_clip(400, 4, strides, rng);
        benchmark::DoNotOptimize(&c.start);
    }
}
BENCHMARK(BM_SampleClip);

} // namespace

BENCHMARK_MAIN();
