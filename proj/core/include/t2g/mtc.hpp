#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "t2g/decoder.hpp"
#include "t2g/labels.hpp"

namespace t2g {

/// Temporal-consistency loss settings. Scale s uses stride 2^s; scale_count 0
/// derives the largest count whose top stride still fits the clip
/// (floor(log2(T-1)) + 1 for T >= 2). weight is the lambda multiplier applied
/// by trainers; mtc_loss itself returns the unweighted loss.
struct MtcConfig {
    int scale_count = 0;
    double trim_ratio = 0.2;
    double decay = 0.5;
    double weight = 1.0;

    void validate() const;
};

/// Per-scale diagnostics. valid means the scale entered the loss average:
/// its stride fits the clip and at least one masked pixel survived.
struct MtcScaleStat {
    int scale = 0;
    int stride = 0;
    std::size_t count = 0;
    double trimmed = 0.0;
    bool valid = false;
};

struct MtcResult {
    double loss = 0.0;
    std::vector<MtcScaleStat> scales;
    bool no_valid_scale = false;
};

/// Per-pixel L1 distances between class distributions r frames apart,
/// indexed by (batch, pair, y, x) with pair t covering frames (t, t+r).
struct DeltaMaps {
    int batch = 0;
    int pairs = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int b, int t, int y, int x) const {
        return values[((static_cast<std::size_t>(b) * pairs + t) * height + y) * width + x];
    }
};

/// Binary stability masks for one video: 1 where both frames of the pair are
/// valid and carry the same label.
struct StableMask {
    int pairs = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int t, int y, int x) const {
        return values[(static_cast<std::size_t>(t) * height + y) * width + x];
    }
};

/// Softmax over the class axis at every (batch, frame, pixel).
LogitsVolume prob_from_logits(const LogitsVolume& x);

/// L1 probability differences at stride r; requires r < frames.
DeltaMaps temporal_delta(const LogitsVolume& probs, int stride);

/// Ground-truth stability masks at stride r; requires r < frames.
StableMask stable_mask(const LabelVideo& y, int stride);

/// How many of n values the trim keeps: max(1, floor((1 - tau) n)), with a
/// 1e-9 guard so products that are exact fractions cannot round down.
std::size_t trim_keep_count(std::size_t n, double trim_ratio);

/// Indices of the kept elements, smallest values first; ties keep input
/// order (stable). Empty input yields an empty selection.
std::vector<std::size_t> trim_selection(std::span<const double> values, double trim_ratio);

/// Mean of the smallest (1 - tau) fraction, summed in ascending order.
/// Empty input returns nullopt (the caller drops that scale).
std::optional<double> trimmed_mean(std::span<const double> values, double trim_ratio);

/// Scale count used when cfg.scale_count is 0.
int auto_scale_count(int frames);

/// The loss over a batch of clips: values are pooled across batch, pair, and
/// pixel per scale, trimmed, then averaged over valid scales with decay^s
/// weights. labels.size() must equal x.batch and every video must match the
/// volume's (frames, height, width). Requires at least 2 classes.
MtcResult mtc_loss(const LogitsVolume& x, std::span<const LabelVideo> labels,
                   const MtcConfig& cfg);
MtcResult mtc_loss(const LogitsVolume& x, const LabelVideo& labels, const MtcConfig& cfg);

/// Analytic subgradient of mtc_loss w.r.t. the logits. The trimmed selection
/// and the signs of probability differences are held fixed (sign(0) = 0) and
/// chained through the softmax Jacobian at each pixel.
LogitsVolume mtc_grad(const LogitsVolume& x, std::span<const LabelVideo> labels,
                      const MtcConfig& cfg);
LogitsVolume mtc_grad(const LogitsVolume& x, const LabelVideo& labels, const MtcConfig& cfg);

struct FdReport {
    double max_abs_dev = 0.0;
    double max_rel_dev = 0.0;
    int coords_checked = 0;
};

/// Central-difference check of mtc_grad on a random coordinate subset. The
/// volume is first jittered (uniform, amplitude 1e-3, keyed by seed) so the
/// +-eps ball avoids trim-boundary ties and exact zero differences. eps must
/// lie in [1e-7, 1e-3]. Relative deviation uses max(|fd|, |grad|, 1e-6).
FdReport finite_diff_check(const LogitsVolume& x, std::span<const LabelVideo> labels,
                           const MtcConfig& cfg, double eps = 1e-6, int coord_count = 24,
                           std::uint64_t seed = 0);

} // namespace t2g
